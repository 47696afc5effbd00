#include "snn/staa.hpp"

#include <cmath>
#include <stdexcept>

#include "snn/ops.hpp"
#include "snn/tsrd.hpp"

namespace snn::staa {

Tensor uniform_init(const Shape& shape, std::size_t fan_in, Rng& rng, DType dt) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(shape, v, dt, true);
}

namespace {

void require_divisible(const char* what, std::size_t channels, std::size_t factor) {
  if (factor == 0 || channels % factor != 0) {
    throw std::invalid_argument(std::string(what) + ": channel count " + std::to_string(channels) +
                                " is not divisible by " + std::to_string(factor));
  }
}

void require_channels(const char* op, const Tensor& x, std::size_t channels) {
  if (x.dim() != 4 || x.size(1) != channels) {
    throw ShapeError(std::string(op) + ": expected [N," + std::to_string(channels) + ",H,W], got " +
                     to_string(x.shape()));
  }
}

}  // namespace

// ---- global context ----

GcParams GcParams::init(std::size_t channels, std::size_t r, Rng& rng, DType dt, bool zero_value_branch) {
  require_divisible("GC block", channels, r);
  const std::size_t hidden = channels / r;
  GcParams p;
  p.channels = channels;
  p.r = r;
  p.conv_k_w = uniform_init({1, channels, 1, 1}, channels, rng, dt);
  p.conv_k_b = uniform_init({1}, channels, rng, dt);
  p.conv_q_w = uniform_init({hidden, channels, 1, 1}, channels, rng, dt);
  p.conv_q_b = uniform_init({hidden}, channels, rng, dt);
  p.ln_gamma = Tensor::ones({hidden}, dt, true);
  p.ln_beta = Tensor::zeros({hidden}, dt, true);
  if (zero_value_branch) {
    p.conv_v_w = Tensor::zeros({channels, hidden, 1, 1}, dt, true);
    p.conv_v_b = Tensor::zeros({channels}, dt, true);
  } else {
    p.conv_v_w = uniform_init({channels, hidden, 1, 1}, hidden, rng, dt);
    p.conv_v_b = uniform_init({channels}, hidden, rng, dt);
  }
  return p;
}

std::vector<NamedTensor> GcParams::named_parameters(const std::string& prefix) const {
  return {{prefix + "conv_k.weight", conv_k_w}, {prefix + "conv_k.bias", conv_k_b},
          {prefix + "conv_q.weight", conv_q_w}, {prefix + "conv_q.bias", conv_q_b},
          {prefix + "ln.gamma", ln_gamma},      {prefix + "ln.beta", ln_beta},
          {prefix + "conv_v.weight", conv_v_w}, {prefix + "conv_v.bias", conv_v_b}};
}

std::size_t GcParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_parameters("")) n += t.numel();
  return n;
}

std::size_t gc_parameter_count(std::size_t channels, std::size_t r) {
  const std::size_t c = channels;
  const std::size_t hidden = channels / r;
  return 2 * c * c / r + c + (hidden + c + 1) + 2 * hidden;
}

Tensor gc_forward(const Tensor& x, const GcParams& p) {
  require_channels("gc_forward", x, p.channels);
  const std::size_t n = x.size(0), c = x.size(1), hw = x.size(2) * x.size(3);
  Tensor attn = reshape(sigmoid(conv2d(x, p.conv_k_w, p.conv_k_b)), {n, hw, 1});
  Tensor ctx = reshape(matmul(reshape(x, {n, c, hw}), attn), {n, c, 1, 1});
  Tensor q = conv2d(ctx, p.conv_q_w, p.conv_q_b);
  Tensor v = conv2d(relu(layer_norm(q, p.ln_gamma, p.ln_beta, kLayerNormEps)), p.conv_v_w, p.conv_v_b);
  return add(x, v);
}

// ---- position encoding ----

PeTable PeTable::init(std::size_t timesteps, std::size_t channels, DType dt) {
  return {Tensor::zeros({timesteps, channels}, dt, true)};
}

Tensor pe_apply(const Tensor& x, const PeTable& table, std::size_t t) {
  require_channels("pe_apply", x, table.pos.size(1));
  if (t >= table.pos.size(0)) {
    throw std::out_of_range("pe_apply: timestep " + std::to_string(t) + " out of range for T=" +
                            std::to_string(table.pos.size(0)));
  }
  return add(x, reshape(select_row(table.pos, t), {1, table.pos.size(1), 1, 1}));
}

// ---- step attention ----

SaParams SaParams::init(std::size_t channels, std::size_t s, double alpha, Rng& rng, DType dt, double gate_bias) {
  require_divisible("SA block", channels, s);
  if (!(alpha > 0)) throw std::invalid_argument("SA alpha must be > 0");
  const std::size_t hidden = channels / s;
  SaParams p;
  p.channels = channels;
  p.s = s;
  p.alpha = alpha;
  p.conv1_w = uniform_init({hidden, channels, 1, 1}, channels, rng, dt);
  p.conv1_b = uniform_init({hidden}, channels, rng, dt);
  p.conv2_w = uniform_init({channels, hidden, 1, 1}, hidden, rng, dt);
  p.conv2_b = Tensor::full({channels}, gate_bias, dt, true);
  return p;
}

std::vector<NamedTensor> SaParams::named_parameters(const std::string& prefix) const {
  return {{prefix + "conv1.weight", conv1_w},
          {prefix + "conv1.bias", conv1_b},
          {prefix + "conv2.weight", conv2_w},
          {prefix + "conv2.bias", conv2_b}};
}

Tensor sa_gate(const Tensor& u, const SaParams& p) {
  require_channels("sa_forward", u, p.channels);
  Tensor pooled = mul_scalar(global_avg_pool(u), p.alpha);
  return sigmoid(conv2d(relu(conv2d(pooled, p.conv1_w, p.conv1_b)), p.conv2_w, p.conv2_b));
}

Tensor sa_forward(const Tensor& u, const SaParams& p) { return mul(u, sa_gate(u, p)); }

// ---- composite ----

StaaParams StaaParams::init(std::size_t channels, std::size_t timesteps, const StaaOptions& opt,
                            const neuron::LifParams& lif, Rng& rng, DType dt) {
  StaaParams p;
  p.gc_input = GcParams::init(channels, opt.r, rng, dt, opt.zero_value_branch);
  p.gc_state = GcParams::init(channels, opt.r, rng, dt, opt.zero_value_branch);
  p.pe = PeTable::init(timesteps, channels, dt);
  p.sa = SaParams::init(channels, opt.s, opt.alpha, rng, dt, opt.sa_gate_bias);
  p.coeffs = neuron::AdaptiveCoeffs::vanilla(channels, lif, dt);
  p.blocks = opt.blocks;
  return p;
}

std::vector<NamedTensor> StaaParams::named_parameters(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  out.emplace_back(prefix + "adaptive.m", coeffs.m);
  out.emplace_back(prefix + "adaptive.n", coeffs.n);
  if (blocks.gc) {
    for (auto& e : gc_input.named_parameters(prefix + "gc_input.")) out.push_back(std::move(e));
    for (auto& e : gc_state.named_parameters(prefix + "gc_state.")) out.push_back(std::move(e));
  }
  if (blocks.pe) out.emplace_back(prefix + "pe.pos", pe.pos);
  if (blocks.sa) {
    for (auto& e : sa.named_parameters(prefix + "sa.")) out.push_back(std::move(e));
  }
  return out;
}

Tensor attend(const Tensor& x, const Tensor& h_prev, const StaaParams& p, std::size_t t) {
  if (x.shape() != h_prev.shape()) {
    throw ShapeError("staa: input " + to_string(x.shape()) + " vs state " + to_string(h_prev.shape()));
  }
  Tensor xin = p.blocks.pe ? pe_apply(x, p.pe, t) : x;
  Tensor from_input = p.blocks.gc ? gc_forward(xin, p.gc_input) : xin;
  Tensor from_state = p.blocks.gc ? gc_forward(h_prev, p.gc_state) : h_prev;
  Tensor u = add(mul(from_state, p.coeffs.m), mul(from_input, p.coeffs.n));
  return p.blocks.sa ? sa_forward(u, p.sa) : u;
}

neuron::StepResult staa_lif_step(const Tensor& x, const neuron::LifState& state, const StaaParams& p,
                                 const neuron::LifParams& lif, std::size_t t, bool bypass, neuron::SpikeMode mode) {
  return neuron::fire(tsrd::aggregate(x, state.h, p, t, bypass), lif, mode);
}

}  // namespace snn::staa
