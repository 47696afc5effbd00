#include "snn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "snn/model.hpp"
#include "snn/neuron.hpp"
#include "snn/ops.hpp"
#include "snn/rng.hpp"

namespace snn::gradcheck {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::vector<Result> check(const std::string& suite, const std::function<Tensor()>& loss,
                          const std::vector<staa::NamedTensor>& params, const Options& opt) {
  for (const auto& [name, p] : params) {
    if (p.dtype() != DType::f64) throw std::invalid_argument("gradcheck needs float64 parameters ('" + name + "')");
    if (!p.is_leaf() || !p.requires_grad()) throw std::invalid_argument("'" + name + "' is not a trainable leaf");
  }
  for (const auto& [name, p] : params) Tensor(p).zero_grad();
  backward(loss());

  std::vector<Result> out;
  NoGradGuard no_grad;
  for (const auto& [name, param] : params) {
    Tensor p = param;
    const auto g = p.grad();
    const std::vector<double> analytic = g ? g->to_vector() : std::vector<double>(p.numel(), 0.0);
    auto data = p.mutable_data<double>();
    Result r;
    r.suite = suite;
    r.name = name;
    r.tolerance = opt.tolerance;
    r.entries = data.size();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + opt.h;
      const double up = loss().item();
      data[i] = orig - opt.h;
      const double down = loss().item();
      data[i] = orig;
      const double numeric = (up - down) / (2.0 * opt.h);
      r.max_rel_error = std::max(r.max_rel_error, relative_error(analytic[i], numeric, opt.floor));
    }
    r.passed = r.max_rel_error <= opt.tolerance;
    out.push_back(r);
  }
  return out;
}

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(shape, v, DType::f64, true);
}

// Values whose distance to every kink exceeds margin.
Tensor away_from(const Shape& shape, Rng& rng, double lo, double hi, const std::vector<double>& kinks, double margin) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) {
    do {
      x = rng.uniform(lo, hi);
    } while (std::any_of(kinks.begin(), kinks.end(), [&](double k) { return std::abs(x - k) < margin; }));
  }
  return Tensor::from(shape, v, DType::f64, true);
}

Tensor weighted_sum(const Tensor& y, const Tensor& weights) { return sum(mul(y, weights)); }

void append(std::vector<Result>& dst, std::vector<Result> src) {
  for (auto& r : src) dst.push_back(std::move(r));
}

}  // namespace

std::vector<Result> pointwise_suite(std::uint64_t seed) {
  Rng rng(hash_key({0x7077ULL, seed}));
  Options opt;
  opt.tolerance = 1e-6;
  const Shape shape{3, 4};
  const Tensor r = random_tensor(shape, rng, -1, 1).detach();
  std::vector<Result> out;

  Tensor x = random_tensor(shape, rng, -3, 3);
  append(out, check("pointwise", [&] { return weighted_sum(sigmoid(x), r); }, {{"sigmoid.x", x}}, opt));

  Tensor xr = away_from(shape, rng, -2, 2, {0.0}, 0.05);
  append(out, check("pointwise", [&] { return weighted_sum(relu(xr), r); }, {{"relu.x", xr}}, opt));

  Tensor a = random_tensor(shape, rng, -2, 2), b = random_tensor({4}, rng, -2, 2);
  append(out, check("pointwise", [&] { return weighted_sum(add(a, b), r); }, {{"add.a", a}, {"add.b", b}}, opt));
  append(out, check("pointwise", [&] { return weighted_sum(sub(a, b), r); }, {{"sub.a", a}, {"sub.b", b}}, opt));
  append(out, check("pointwise", [&] { return weighted_sum(mul(a, b), r); }, {{"mul.a", a}, {"mul.b", b}}, opt));
  append(out, check("pointwise", [&] { return weighted_sum(add_scalar(a, 0.7), r); }, {{"add_scalar.x", a}}, opt));
  append(out, check("pointwise", [&] { return weighted_sum(mul_scalar(a, -1.3), r); }, {{"mul_scalar.x", a}}, opt));

  neuron::LifParams lif;
  const double lo = lif.v_th - lif.a / 2, hi = lif.v_th + lif.a / 2;
  Tensor v = away_from(shape, rng, lo - 0.5, hi + 0.5, {lo, hi}, 0.05);
  append(out, check("pointwise",
                    [&] { return weighted_sum(neuron::heaviside_surrogate(v, lif, neuron::SpikeMode::kRamp), r); },
                    {{"spike_ramp.v", v}}, opt));
  return out;
}

std::vector<Result> ops_suite(std::uint64_t seed) {
  Rng rng(hash_key({0x6f7073ULL, seed}));
  Options opt;
  opt.tolerance = 1e-6;
  std::vector<Result> out;

  Tensor x = random_tensor({2, 3, 5, 5}, rng, -1, 1);
  Tensor w = random_tensor({4, 3, 3, 3}, rng, -0.5, 0.5);
  Tensor b = random_tensor({4}, rng, -0.5, 0.5);
  const Tensor rc = random_tensor({2, 4, 3, 3}, rng, -1, 1).detach();
  append(out, check("ops", [&] { return weighted_sum(conv2d(x, w, b, {2, 1}), rc); },
                    {{"conv2d.x", x}, {"conv2d.w", w}, {"conv2d.b", b}}, opt));

  Tensor ma = random_tensor({2, 3, 4}, rng, -1, 1), mb = random_tensor({2, 4, 2}, rng, -1, 1);
  const Tensor rm = random_tensor({2, 3, 2}, rng, -1, 1).detach();
  append(out, check("ops", [&] { return weighted_sum(matmul(ma, mb), rm); }, {{"matmul.a", ma}, {"matmul.b", mb}}, opt));

  Tensor lx = random_tensor({2, 5}, rng, -1, 1), lw = random_tensor({3, 5}, rng, -1, 1), lb = random_tensor({3}, rng, -1, 1);
  const std::vector<std::size_t> labels{2, 0};
  append(out, check("ops", [&] { return cross_entropy(linear(lx, lw, lb), labels); },
                    {{"linear.x", lx}, {"linear.w", lw}, {"linear.b", lb}}, opt));

  Tensor soft_logits = random_tensor({2, 3}, rng, -2, 2);
  const Tensor targets = Tensor::from({2, 3}, {0.2, 0.5, 0.3, 1.0, 0.0, 0.0});
  append(out, check("ops", [&] { return cross_entropy(soft_logits, targets); }, {{"cross_entropy_soft.logits", soft_logits}},
                    opt));

  Tensor nx = random_tensor({2, 3, 2, 2}, rng, -1, 1);
  Tensor gamma = random_tensor({3}, rng, 0.5, 1.5), beta = random_tensor({3}, rng, -0.5, 0.5);
  const Tensor rn = random_tensor({2, 3, 2, 2}, rng, -1, 1).detach();
  append(out, check("ops", [&] { return weighted_sum(layer_norm(nx, gamma, beta), rn); },
                    {{"layer_norm.x", nx}, {"layer_norm.gamma", gamma}, {"layer_norm.beta", beta}}, opt));

  const Tensor rp = random_tensor({2, 3, 1, 1}, rng, -1, 1).detach();
  append(out, check("ops", [&] { return weighted_sum(global_avg_pool(nx), rp); }, {{"global_avg_pool.x", nx}}, opt));

  Tensor table = random_tensor({3, 4}, rng, -1, 1);
  const Tensor rs = random_tensor({2, 2}, rng, -1, 1).detach();
  append(out, check("ops", [&] { return weighted_sum(reshape(select_row(table, 1), {2, 2}), rs); },
                    {{"select_row.table", table}}, opt));
  append(out, check("ops", [&] { return mean(mul(table, table)); }, {{"mean.x", table}}, opt));
  return out;
}

std::vector<Result> micro_staa_suite(std::uint64_t seed) {
  model::NetworkConfig cfg;
  cfg.name = "micro-staa";
  cfg.in_channels = 2;
  cfg.height = cfg.width = 4;
  cfg.num_classes = 2;
  cfg.timesteps = 2;
  cfg.convs = {{4, 3, 1, 1}, {4, 3, 1, 1}};
  cfg.neuron = model::NeuronKind::kStaa;
  cfg.staa.r = 2;
  cfg.staa.s = 2;
  cfg.staa.zero_value_branch = false;
  cfg.staa.sa_gate_bias = 0.0;
  cfg.init_gain = 3.0;
  auto net = model::Network::build(cfg, seed);

  Rng rng(hash_key({0x6d6963ULL, seed}));
  std::vector<Tensor> frames;
  for (std::size_t t = 0; t < cfg.timesteps; ++t) frames.push_back(random_tensor({2, 2, 4, 4}, rng, 0, 1).detach());
  const std::vector<std::size_t> labels{0, 1};
  model::ForwardOptions fo;
  fo.mode = neuron::SpikeMode::kRamp;
  auto loss = [&] { return cross_entropy(net.forward(frames, fo).logits, labels); };

  Options opt;
  opt.tolerance = 1e-4;
  return check("micro-staa", loss, net.named_parameters(), opt);
}

std::vector<Result> run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "pointwise") return pointwise_suite(seed);
  if (name == "ops") return ops_suite(seed);
  if (name == "micro-staa") return micro_staa_suite(seed);
  if (name == "all") {
    auto out = pointwise_suite(seed);
    append(out, ops_suite(seed));
    append(out, micro_staa_suite(seed));
    return out;
  }
  throw std::invalid_argument("unknown gradcheck suite '" + name + "' (expected pointwise, ops, micro-staa or all)");
}

}  // namespace snn::gradcheck
