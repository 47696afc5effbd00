#pragma once

// Central finite-difference checks of reverse-mode gradients.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "snn/staa.hpp"
#include "snn/tensor.hpp"

namespace snn::gradcheck {

struct Options {
  double h = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor for the relative error.
  double floor = 1e-6;
};

struct Result {
  std::string suite;
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0;
  double tolerance = 0;
  bool passed = false;
};

// |a - f| / max(|a|, |f|, floor)
double relative_error(double analytic, double numeric, double floor);

// Compares d loss / d p against (loss(p + h) - loss(p - h)) / 2h for every
// entry of every named parameter. Parameters are restored afterwards.
std::vector<Result> check(const std::string& suite, const std::function<Tensor()>& loss,
                          const std::vector<staa::NamedTensor>& params, const Options& opt);

// Smooth pointwise ops in isolation (tolerance 1e-6).
std::vector<Result> pointwise_suite(std::uint64_t seed);
// Structured differentiable ops: conv, matmul, layer norm, pooling, losses.
std::vector<Result> ops_suite(std::uint64_t seed);
// Two STAA-LIF layers, C=4, 4x4, T=2, batch 2, float64, ramp spikes.
std::vector<Result> micro_staa_suite(std::uint64_t seed);

std::vector<Result> run_suite(const std::string& name, std::uint64_t seed);

}  // namespace snn::gradcheck
