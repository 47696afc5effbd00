#include "snn/neuron.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "snn/ops.hpp"

namespace snn::neuron {

void LifParams::validate() const {
  if (!(tau > 0)) throw std::invalid_argument("LIF tau must be > 0");
  if (!(a > 0)) throw std::invalid_argument("surrogate width a must be > 0");
}

LifState initial_state(const Shape& shape, const LifParams& p, DType dt) {
  return {Tensor::full(shape, p.v_reset, dt), Tensor::full(shape, p.v_reset, dt)};
}

AdaptiveCoeffs AdaptiveCoeffs::vanilla(std::size_t channels, const LifParams& p, DType dt) {
  p.validate();
  return {Tensor::full({1, channels, 1, 1}, 1.0 - 1.0 / p.tau, dt, true),
          Tensor::full({1, channels, 1, 1}, 1.0 / p.tau, dt, true)};
}

double surrogate_factor(double v, const LifParams& p) { return std::abs(v - p.v_th) < p.a / 2 ? 1.0 / p.a : 0.0; }

Tensor heaviside_surrogate(const Tensor& v, const LifParams& p, SpikeMode mode) {
  p.validate();
  const double v_th = p.v_th;
  const double a = p.a;
  Buffer out = dispatch(v.dtype(), [&](auto tag) -> Buffer {
    using T = decltype(tag);
    auto vd = v.data<T>();
    std::vector<T> s(vd.size());
    if (mode == SpikeMode::kHeaviside) {
      for (std::size_t i = 0; i < s.size(); ++i) s[i] = vd[i] >= v_th ? T(1) : T(0);
    } else {
      for (std::size_t i = 0; i < s.size(); ++i) {
        const double r = (vd[i] - v_th) / a + 0.5;
        s[i] = static_cast<T>(std::clamp(r, 0.0, 1.0));
      }
    }
    return s;
  });
  return make_op_result("spike", v.shape(), std::move(out), {v}, [v, v_th, a](const Buffer& gout, std::span<Buffer* const> gin) {
    if (!gin[0]) return;
    dispatch(v.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto vd = v.data<T>();
      const auto& g = std::get<std::vector<T>>(gout);
      auto& gv = std::get<std::vector<T>>(*gin[0]);
      const T inv_a = static_cast<T>(1.0 / a);
      for (std::size_t i = 0; i < gv.size(); ++i) {
        if (std::abs(static_cast<double>(vd[i]) - v_th) < a / 2) gv[i] += g[i] * inv_a;
      }
    });
  });
}

StepResult fire(const Tensor& v, const LifParams& p, SpikeMode mode) {
  Tensor s = heaviside_surrogate(v, p, mode);
  // H' = v_reset * S + V * (1 - S)
  Tensor keep = add_scalar(mul_scalar(s, -1.0), 1.0);
  Tensor h = mul(v, keep);
  if (p.v_reset != 0.0) h = add(mul_scalar(s, p.v_reset), h);
  return {s, {h, v}};
}

StepResult lif_step(const LifState& state, const Tensor& input, const LifParams& p, SpikeMode mode) {
  p.validate();
  if (state.h.shape() != input.shape()) {
    throw ShapeError("lif_step: state " + to_string(state.h.shape()) + " vs input " + to_string(input.shape()));
  }
  // H + (I - (H - v_reset))/tau, expanded as (1 - 1/tau) H + (1/tau) I + v_reset/tau.
  const double inv_tau = 1.0 / p.tau;
  Tensor v = add(mul_scalar(state.h, 1.0 - inv_tau), mul_scalar(input, inv_tau));
  if (p.v_reset != 0.0) v = add_scalar(v, p.v_reset * inv_tau);
  return fire(v, p, mode);
}

Tensor adaptive_integrate(const Tensor& h, const Tensor& input, const AdaptiveCoeffs& coeffs) {
  if (h.shape() != input.shape()) {
    throw ShapeError("adaptive_lif_step: state " + to_string(h.shape()) + " vs input " + to_string(input.shape()));
  }
  return add(mul(h, coeffs.m), mul(input, coeffs.n));
}

StepResult adaptive_lif_step(const LifState& state, const Tensor& input, const AdaptiveCoeffs& coeffs,
                             const LifParams& p, SpikeMode mode) {
  p.validate();
  return fire(adaptive_integrate(state.h, input, coeffs), p, mode);
}

}  // namespace snn::neuron
