#include <cmath>

#include "doctest.h"
#include "snn/ops.hpp"

using namespace snn;

TEST_SUITE("ops") {
  TEST_CASE("broadcasting") {
    CHECK(broadcast_shape({2, 1, 3}, {4, 1}) == Shape{2, 4, 3});
    CHECK_THROWS_AS(broadcast_shape({2, 3}, {4}), ShapeError);
    auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
    auto b = Tensor::from({2}, {10, 20});
    CHECK(add(a, b).to_vector() == std::vector<double>{11, 22, 13, 24});
    CHECK(sub(a, b).to_vector() == std::vector<double>{-9, -18, -7, -16});
    CHECK(mul(a, b).to_vector() == std::vector<double>{10, 40, 30, 80});
  }

  TEST_CASE("broadcast gradient reduces") {
    auto a = Tensor::from({2, 2}, {1, 2, 3, 4}, DType::f64, true);
    auto b = Tensor::from({2}, {10, 20}, DType::f64, true);
    backward(sum(mul(a, b)));
    CHECK(b.grad()->to_vector() == std::vector<double>{4, 6});
    CHECK(a.grad()->to_vector() == std::vector<double>{10, 20, 10, 20});
  }

  TEST_CASE("conv output size floors") {
    CHECK(conv_output_size(8, 3, 2, 1) == 4);
    CHECK(conv_output_size(5, 3, 1, 1) == 5);
    CHECK(conv_output_size(7, 3, 2, 0) == 3);
    CHECK_THROWS(conv_output_size(2, 5, 1, 0));
  }

  TEST_CASE("conv2d against a direct sum") {
    auto x = Tensor::from({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    auto w = Tensor::from({1, 1, 2, 2}, {1, 0, 0, -1});
    auto b = Tensor::from({1}, {0.5});
    auto y = conv2d(x, w, b, {1, 0});
    CHECK(y.shape() == Shape{1, 1, 2, 2});
    CHECK(y.to_vector() == std::vector<double>{-3.5, -3.5, -3.5, -3.5});
    auto p = conv2d(x, Tensor::ones({2, 1, 1, 1}), Tensor::zeros({2}), {2, 0});
    CHECK(p.shape() == Shape{1, 2, 2, 2});
    CHECK(p.to_vector() == std::vector<double>{1, 3, 7, 9, 1, 3, 7, 9});
  }

  TEST_CASE("matmul and linear") {
    auto a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = Tensor::from({3, 1}, {1, 0, -1});
    CHECK(matmul(a, b).to_vector() == std::vector<double>{-2, -2});
    auto w = Tensor::from({1, 3}, {1, 1, 1});
    CHECK(linear(a, w, Tensor::from({1}, {1})).to_vector() == std::vector<double>{7, 16});
  }

  TEST_CASE("pooling, norm, softmax cross-entropy") {
    auto x = Tensor::from({1, 2, 2, 2}, {1, 2, 3, 4, 0, 0, 0, 8});
    CHECK(global_avg_pool(x).to_vector() == std::vector<double>{2.5, 2});
    auto ln = layer_norm(Tensor::from({1, 2, 1, 1}, {1, 3}), Tensor::ones({2}), Tensor::zeros({2}), 0.0);
    CHECK(ln.at({0, 0, 0, 0}) == doctest::Approx(-1));
    CHECK(ln.at({0, 1, 0, 0}) == doctest::Approx(1));
    auto logits = Tensor::from({1, 2}, {0, 0});
    CHECK(cross_entropy(logits, {1}).item() == doctest::Approx(std::log(2.0)));
    CHECK(cross_entropy(logits, Tensor::from({1, 2}, {0.5, 0.5})).item() == doctest::Approx(std::log(2.0)));
    CHECK_THROWS(cross_entropy(logits, {2}));
  }

  TEST_CASE("activations") {
    auto x = Tensor::from({3}, {-1, 0, 2});
    CHECK(relu(x).to_vector() == std::vector<double>{0, 0, 2});
    CHECK(sigmoid(Tensor::from({1}, {0})).item() == 0.5);
    CHECK(select_row(Tensor::from({2, 2}, {1, 2, 3, 4}), 1).to_vector() == std::vector<double>{3, 4});
  }

  TEST_CASE("float32 path") {
    auto a = Tensor::from({2}, {1, 2}, DType::f32);
    auto y = add_scalar(mul_scalar(a, 2), 1);
    CHECK(y.dtype() == DType::f32);
    CHECK(y.to_vector() == std::vector<double>{3, 5});
  }
}
