#include "snn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "snn/archive.hpp"
#include "snn/io_util.hpp"
#include "snn/ops.hpp"
#include "snn/rng.hpp"

namespace snn::training {

namespace {
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;
constexpr std::uint64_t kAugmentStream = 0x61756721ULL;
constexpr std::uint64_t kMixupStream = 0x6d697875ULL;
}  // namespace

void TrainConfig::validate() const {
  if (!(lr >= 0)) throw std::invalid_argument("lr must be >= 0");
  if (!(lr_min >= 0) || lr_min > lr) throw std::invalid_argument("lr_min must be in [0, lr]");
  if (!(momentum >= 0 && momentum < 1)) throw std::invalid_argument("momentum must be in [0,1)");
  if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (!(weight_decay >= 0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(mixup >= 0 && mixup <= 1)) throw std::invalid_argument("mixup must be in [0,1]");
  if (!(grad_clip >= 0)) throw std::invalid_argument("grad_clip must be >= 0");
  tsrd.validate();
}

double cosine_lr(std::size_t epoch, std::size_t epochs_total, double lr_init, double lr_min) {
  if (epochs_total == 0 || epoch > epochs_total) {
    throw std::invalid_argument("cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " +
                                std::to_string(epochs_total) + "]");
  }
  const double phase = std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(epochs_total);
  return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + std::cos(phase));
}

void sgd_momentum_update(std::vector<double>& w, std::vector<double>& v, const std::vector<double>& g, double lr,
                         double momentum) {
  if (w.size() != v.size() || w.size() != g.size()) throw ShapeError("sgd_momentum_update: size mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = momentum * v[i] + g[i];
    w[i] -= lr * v[i];
  }
}

double grad_norm(const std::vector<Tensor>& params) {
  double sq = 0;
  for (const auto& p : params) {
    const auto g = p.grad();
    if (!g) continue;
    for (double v : g->to_vector()) sq += v * v;
  }
  return std::sqrt(sq);
}

void sgd_momentum_step(std::vector<Tensor>& params, std::vector<Tensor>& velocity, double lr, double momentum,
                       double weight_decay, double grad_scale) {
  if (params.size() != velocity.size()) throw ShapeError("sgd_momentum_step: params/velocity count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& w = params[k];
    auto& v = velocity[k];
    if (w.shape() != v.shape() || w.dtype() != v.dtype()) {
      throw ShapeError("sgd_momentum_step: velocity " + to_string(v.shape()) + " does not match parameter " +
                       to_string(w.shape()));
    }
    auto g = w.grad();
    if (!g) continue;
    dispatch(w.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto wd = w.mutable_data<T>();
      auto vd = v.mutable_data<T>();
      auto gd = g->template data<T>();
      for (std::size_t i = 0; i < wd.size(); ++i) {
        T grad = static_cast<T>(grad_scale * gd[i]);
        if (weight_decay != 0) grad = static_cast<T>(grad + weight_decay * wd[i]);
        vd[i] = static_cast<T>(momentum * vd[i] + grad);
        wd[i] = static_cast<T>(wd[i] - lr * vd[i]);
      }
    });
  }
}

Tensor batch_loss(const model::ForwardResult& fwd, const std::vector<std::size_t>& labels) {
  return cross_entropy(fwd.logits, labels);
}

std::size_t count_correct(const Tensor& logits, const std::vector<std::size_t>& labels) {
  const auto v = logits.to_vector();
  const std::size_t n = logits.size(0), k = logits.size(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = v.begin() + static_cast<std::ptrdiff_t>(i * k);
    const auto best = static_cast<std::size_t>(std::max_element(row, row + static_cast<std::ptrdiff_t>(k)) - row);
    if (best == labels[i]) ++correct;
  }
  return correct;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(hash_key({kShuffleStream, seed, epoch}));
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

Trainer::Trainer(model::Network net, TrainConfig cfg) : net_(std::move(net)), cfg_(std::move(cfg)) {
  cfg_.validate();
  for (const auto& p : net_.parameters()) velocity_.push_back(Tensor::zeros(p.shape(), p.dtype()));
}

EpochMetrics Trainer::train_epoch(const data::Dataset& train) {
  if (train.size() == 0) throw std::invalid_argument("train_epoch: empty dataset");
  if (epochs_done_ >= cfg_.epochs) throw std::logic_error("train_epoch: all configured epochs already run");
  const std::size_t epoch = epochs_done_;
  const double lr = cosine_lr(epoch, cfg_.epochs, cfg_.lr, cfg_.lr_min);
  const auto order = shuffled_indices(train.size(), cfg_.seed, epoch);
  const DType dt = net_.config().dtype;
  auto params = net_.parameters();
  const std::size_t L = net_.spiking_layers();

  EpochMetrics m;
  m.epoch = epoch + 1;
  m.lr = lr;
  std::vector<double> counts(L, 0.0), slots(L, 0.0);
  double loss_sum = 0;
  std::size_t correct = 0;

  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size, ++batch_index) {
    const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
    std::vector<std::size_t> labels;
    std::vector<Tensor> samples;
    for (std::size_t i = start; i < end; ++i) {
      const auto& s = train.samples[order[i]];
      labels.push_back(s.label);
      Tensor f = s.frames;
      if (cfg_.augment) {
        Rng rng(hash_key({kAugmentStream, cfg_.seed, epoch, order[i]}));
        if (train.timesteps == 1) {
          f = reshape(data::augment_static(reshape(f, {f.size(1), f.size(2), f.size(3)}), rng, cfg_.policy),
                      f.shape());
        } else {
          f = data::augment_event_frames(f, rng);
        }
      }
      samples.push_back(f);
    }

    Tensor soft_targets;
    const bool mix = cfg_.mixup > 0 && counter_uniform({kMixupStream, cfg_.seed, epoch, batch_index}) < cfg_.mixup;
    if (mix) {
      const double lambda = counter_uniform({kMixupStream, cfg_.seed, epoch, batch_index, 1});
      const std::size_t nb = samples.size();
      std::vector<Tensor> mixed;
      std::vector<double> targets;
      for (std::size_t i = 0; i < nb; ++i) {
        const std::size_t j = (i + 1) % nb;
        auto r = data::mixup({samples[i], labels[i]}, {samples[j], labels[j]}, lambda, train.num_classes);
        mixed.push_back(r.frames);
        targets.insert(targets.end(), r.soft_label.begin(), r.soft_label.end());
      }
      samples = std::move(mixed);
      soft_targets = Tensor::from({nb, train.num_classes}, targets, dt);
    }

    for (auto& p : params) p.zero_grad();
    model::ForwardOptions fo;
    fo.training = true;
    fo.tsrd = cfg_.use_tsrd ? &cfg_.tsrd : nullptr;
    fo.epoch = epoch;
    fo.batch = batch_index;
    auto fwd = net_.forward(data::stack_samples(samples, dt), fo);
    Tensor loss = mix ? cross_entropy(fwd.logits, soft_targets) : batch_loss(fwd, labels);
    const double loss_value = loss.item();
    if (!std::isfinite(loss_value)) {
      const auto op = first_nonfinite_op(loss);
      throw NonFiniteError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batch_index) + "; first non-finite op: " + op.value_or("<input data>"));
    }
    backward(loss);
    double scale = 1.0;
    if (cfg_.grad_clip > 0) {
      const double norm = grad_norm(params);
      if (norm > cfg_.grad_clip) scale = cfg_.grad_clip / norm;
    }
    sgd_momentum_step(params, velocity_, lr, cfg_.momentum, cfg_.weight_decay, scale);

    loss_sum += loss_value * static_cast<double>(end - start);
    correct += count_correct(fwd.logits, labels);
    for (std::size_t l = 0; l < L; ++l) {
      counts[l] += fwd.spike_count[l];
      slots[l] += fwd.spike_slots[l];
    }
  }
  m.loss = loss_sum / static_cast<double>(train.size());
  m.accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
  for (std::size_t l = 0; l < L; ++l) m.activity.push_back(slots[l] > 0 ? counts[l] / slots[l] : 0.0);
  ++epochs_done_;
  return m;
}

EvalResult Trainer::evaluate(const data::Dataset& ds, std::size_t batch_size) const {
  NoGradGuard no_grad;
  const std::size_t L = net_.spiking_layers();
  std::vector<double> counts(L, 0.0), slots(L, 0.0);
  double loss_sum = 0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t end = std::min(ds.size(), start + batch_size);
    std::vector<std::size_t> idx, labels;
    for (std::size_t i = start; i < end; ++i) {
      idx.push_back(i);
      labels.push_back(ds.samples[i].label);
    }
    model::ForwardOptions fo;
    fo.tsrd = cfg_.use_tsrd ? &cfg_.tsrd : nullptr;
    auto fwd = net_.forward(data::make_batch(ds, idx, net_.config().dtype), fo);
    loss_sum += cross_entropy(fwd.logits, labels).item() * static_cast<double>(end - start);
    correct += count_correct(fwd.logits, labels);
    for (std::size_t l = 0; l < L; ++l) {
      counts[l] += fwd.spike_count[l];
      slots[l] += fwd.spike_slots[l];
    }
  }
  EvalResult r;
  if (ds.size() > 0) {
    r.loss = loss_sum / static_cast<double>(ds.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
  }
  for (std::size_t l = 0; l < L; ++l) r.activity.push_back(slots[l] > 0 ? counts[l] / slots[l] : 0.0);
  return r;
}

void Trainer::save_checkpoint(const std::string& path) const {
  Archive a;
  a.set_attr("format", kCheckpointFormat);
  a.set_attr("checkpoint_version", std::to_string(kCheckpointVersion));
  a.set_attr("epoch", std::to_string(epochs_done_));
  a.set_attr("seed", std::to_string(cfg_.seed));
  a.set_attr("neuron", model::neuron_kind_name(net_.config().neuron));
  // All randomness is counter-based on (seed, epoch, ...), so these two
  // values are the complete generator state.
  a.set_attr("rng", "counter:" + std::to_string(cfg_.seed) + ":" + std::to_string(epochs_done_));
  const auto named = net_.named_parameters();
  for (const auto& [name, t] : named) a.put("param/" + name, t);
  for (std::size_t i = 0; i < named.size(); ++i) a.put("velocity/" + named[i].first, velocity_[i]);
  a.save(path);
}

void Trainer::load_checkpoint(const std::string& path) {
  const Archive a = Archive::load(path);
  if (a.attr("format") != std::optional<std::string>(kCheckpointFormat)) {
    throw CheckpointError(path + ": not a checkpoint");
  }
  if (a.attr("checkpoint_version") != std::optional<std::string>(std::to_string(kCheckpointVersion))) {
    throw CheckpointError(path + ": checkpoint version " + a.attr("checkpoint_version").value_or("?") +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto named = net_.named_parameters();
  std::size_t expected_entries = 2 * named.size();
  if (a.names().size() != expected_entries) {
    throw CheckpointError(path + ": has " + std::to_string(a.names().size()) + " arrays, expected " +
                          std::to_string(expected_entries));
  }
  auto copy_into = [&](Tensor dst, const std::string& key) {
    if (!a.contains(key)) throw CheckpointError(path + ": missing array '" + key + "'");
    const Tensor& src = a.get(key);
    if (src.shape() != dst.shape() || src.dtype() != dst.dtype()) {
      throw CheckpointError(path + ": array '" + key + "' has shape " + to_string(src.shape()) + " (" +
                            std::string(dtype_name(src.dtype())) + "), expected " + to_string(dst.shape()) + " (" +
                            std::string(dtype_name(dst.dtype())) + ")");
    }
    return src;
  };
  // Validate everything before touching any state.
  std::vector<std::pair<Tensor, Tensor>> copies;
  for (std::size_t i = 0; i < named.size(); ++i) {
    copies.emplace_back(named[i].second, copy_into(named[i].second, "param/" + named[i].first));
    copies.emplace_back(velocity_[i], copy_into(velocity_[i], "velocity/" + named[i].first));
  }
  const auto epoch_attr = a.attr("epoch");
  if (!epoch_attr) throw CheckpointError(path + ": missing epoch");
  std::size_t epoch = 0;
  try {
    epoch = std::stoul(*epoch_attr);
  } catch (const std::exception&) {
    throw CheckpointError(path + ": malformed epoch '" + *epoch_attr + "'");
  }
  for (auto& [dst, src] : copies) {
    dispatch(dst.dtype(), [&](auto tag) {
      using T = decltype(tag);
      auto d = dst.mutable_data<T>();
      auto s = src.template data<T>();
      std::copy(s.begin(), s.end(), d.begin());
    });
  }
  epochs_done_ = epoch;
}

std::string metrics_header(std::size_t layers) {
  std::string h = "epoch,lr,loss,acc,test_loss,test_acc";
  for (std::size_t l = 1; l <= layers; ++l) h += ",a_" + std::to_string(l);
  return h;
}

std::string metrics_row(const EpochMetrics& m, const EvalResult& eval) {
  std::string row = std::to_string(m.epoch) + "," + shortest(m.lr) + "," + shortest(m.loss) + "," +
                    shortest(m.accuracy) + "," + shortest(eval.loss) + "," + shortest(eval.accuracy);
  for (double a : eval.activity) row += "," + shortest(a);
  return row;
}

}  // namespace snn::training
