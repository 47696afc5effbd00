#include "doctest.h"
#include "snn/gradcheck.hpp"
#include "snn/ops.hpp"

using namespace snn;

TEST_SUITE("gradcheck") {
  TEST_CASE("relative error") {
    CHECK(gradcheck::relative_error(1.0, 1.0, 1e-6) == 0);
    CHECK(gradcheck::relative_error(2.0, 1.0, 1e-6) == 0.5);
    CHECK(gradcheck::relative_error(0.0, 1e-9, 1e-6) == doctest::Approx(1e-3));
  }

  TEST_CASE("a wrong gradient is caught") {
    auto x = Tensor::from({3}, {0.3, -0.2, 0.9}, DType::f64, true);
    // y = sum(x * detach(x)) has autodiff gradient x but true gradient 2x
    auto res = gradcheck::check("t", [&] { return sum(mul(x, x.detach())); }, {{"x", x}}, {});
    REQUIRE(res.size() == 1);
    CHECK_FALSE(res[0].passed);
    auto ok = gradcheck::check("t", [&] { return sum(mul(x, x)); }, {{"x", x}}, {});
    CHECK(ok[0].passed);
    CHECK(x.at({0}) == 0.3);
  }

  TEST_CASE("suites pass") {
    for (const auto& r : gradcheck::run_suite("all", 0)) CHECK_MESSAGE(r.passed, r.suite << " " << r.name);
    CHECK_THROWS(gradcheck::run_suite("bogus", 0));
  }
}
