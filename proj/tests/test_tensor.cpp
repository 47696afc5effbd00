#include <cmath>
#include <limits>

#include "doctest.h"
#include "snn/ops.hpp"
#include "snn/tensor.hpp"

using namespace snn;

TEST_SUITE("tensor") {
  TEST_CASE("construction and element access") {
    auto t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.numel() == 6);
    CHECK(t.dim() == 2);
    CHECK(t.at({1, 2}) == 6);
    CHECK(t.dtype() == DType::f64);
    CHECK(Tensor::full({2}, 1.5).to_vector() == std::vector<double>{1.5, 1.5});
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
    CHECK(to_string(Shape{2, 3}) == "(2,3)");
  }

  TEST_CASE("dtype conversion keeps values") {
    auto t = Tensor::from({3}, {0.5, -1.25, 2});
    auto f = t.to(DType::f32);
    CHECK(f.dtype() == DType::f32);
    CHECK(f.to_vector() == t.to_vector());
    CHECK_THROWS(f.data<double>());
  }

  TEST_CASE("backward accumulates into leaves") {
    auto x = Tensor::from({3}, {1, 2, 3}, DType::f64, true);
    auto y = sum(mul(x, x));
    backward(y);
    REQUIRE(x.grad());
    CHECK(x.grad()->to_vector() == std::vector<double>{2, 4, 6});
    backward(sum(x));
    CHECK(x.grad()->to_vector() == std::vector<double>{3, 5, 7});
    x.zero_grad();
    CHECK((!x.grad() || x.grad()->to_vector() == std::vector<double>{0, 0, 0}));
  }

  TEST_CASE("a tape runs once") {
    auto x = Tensor::from({2}, {1, 2}, DType::f64, true);
    auto y = sum(mul_scalar(x, 3));
    auto tape = Tape::record(y);
    CHECK(tape.size() >= 2);
    CHECK(tape.op_names().back() == "sum");
    tape.run();
    CHECK_THROWS_AS(tape.run(), AutogradError);
    CHECK_THROWS_AS(backward(y), AutogradError);
  }

  TEST_CASE("no-grad guard skips recording") {
    auto x = Tensor::from({2}, {1, 2}, DType::f64, true);
    {
      NoGradGuard g;
      CHECK_FALSE(grad_enabled());
      auto y = mul(x, x);
      CHECK_FALSE(y.requires_grad());
    }
    CHECK(grad_enabled());
    CHECK(mul(x, x).requires_grad());
  }

  TEST_CASE("non-finite diagnostics name the op") {
    auto x = Tensor::from({2}, {1, -1}, DType::f64, true);
    auto big = mul_scalar(x, std::numeric_limits<double>::max());
    auto bad = mul_scalar(big, 10.0);
    auto loss = sum(bad);
    auto op = first_nonfinite_op(loss);
    REQUIRE(op);
    CHECK(*op == "mul_scalar");
    CHECK_FALSE(first_nonfinite_op(sum(x)));
  }

  TEST_CASE("detach and clone") {
    auto x = Tensor::from({2}, {1, 2}, DType::f64, true);
    CHECK_FALSE(x.detach().requires_grad());
    auto c = x.clone();
    c.mutable_data<double>()[0] = 9;
    CHECK(x.at({0}) == 1);
  }
}
