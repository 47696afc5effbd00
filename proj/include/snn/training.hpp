#pragma once

// Unrolled-time training: SGD with momentum, cosine learning-rate schedule,
// cross-entropy on time-averaged logits, metrics and checkpoints.

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "snn/data.hpp"
#include "snn/model.hpp"
#include "snn/tensor.hpp"
#include "snn/tsrd.hpp"

namespace snn::training {

struct TrainConfig {
  double lr = 0.1;
  double momentum = 0.9;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double weight_decay = 0.0;
  double lr_min = 0.0;
  std::uint64_t seed = 0;
  tsrd::TsrdConfig tsrd;
  // false: never pass masks to the network at all
  bool use_tsrd = true;
  bool augment = false;
  data::AugmentPolicy policy = data::make_policy({"crop", "hflip", "cutout", "contrast", "rotate", "translate"});
  // Fraction of training batches drawn as mixup pairs (0 disables).
  double mixup = 0.0;
  // Global gradient L2-norm limit per step (0 disables).
  double grad_clip = 0.0;

  void validate() const;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double cosine_lr(std::size_t epoch, std::size_t epochs_total, double lr_init, double lr_min = 0.0);

// v <- momentum * v + g (+ weight_decay * w); w <- w - lr * v. Parameters
// without a gradient are left alone.
void sgd_momentum_step(std::vector<Tensor>& params, std::vector<Tensor>& velocity, double lr, double momentum,
                       double weight_decay = 0.0, double grad_scale = 1.0);

// L2 norm over all parameter gradients.
double grad_norm(const std::vector<Tensor>& params);

// Plain-array form of one update, shared with the tensor version.
void sgd_momentum_update(std::vector<double>& w, std::vector<double>& v, const std::vector<double>& g, double lr,
                         double momentum);

struct EvalResult {
  double loss = 0;
  double accuracy = 0;
  std::vector<double> activity;  // per spiking layer
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double lr = 0;
  double loss = 0;
  double accuracy = 0;
  std::vector<double> activity;  // training-pass activity
};

// Loss (cross-entropy on mean-over-T logits) for one batch.
Tensor batch_loss(const model::ForwardResult& fwd, const std::vector<std::size_t>& labels);

std::size_t count_correct(const Tensor& logits, const std::vector<std::size_t>& labels);

// Epoch-keyed sample order.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

class Trainer {
 public:
  Trainer(model::Network net, TrainConfig cfg);

  // Runs the next epoch. Throws NonFiniteError naming the first op that
  // produced a non-finite value when the loss stops being finite.
  EpochMetrics train_epoch(const data::Dataset& train);
  EvalResult evaluate(const data::Dataset& ds, std::size_t batch_size = 64) const;

  std::size_t epochs_done() const { return epochs_done_; }
  const model::Network& network() const { return net_; }
  model::Network& network() { return net_; }
  const TrainConfig& config() const { return cfg_; }

  void save_checkpoint(const std::string& path) const;
  // Restores parameters, velocity and the epoch counter. The network must
  // have the same architecture; names and shapes are validated.
  void load_checkpoint(const std::string& path);

 private:
  model::Network net_;
  TrainConfig cfg_;
  std::vector<Tensor> velocity_;
  std::size_t epochs_done_ = 0;
};

inline constexpr const char* kCheckpointFormat = "snn-checkpoint";
inline constexpr int kCheckpointVersion = 1;

std::string metrics_header(std::size_t layers);
std::string metrics_row(const EpochMetrics& m, const EvalResult& eval);

}  // namespace snn::training
