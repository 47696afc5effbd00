// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.
//   acceptance            all criteria
//   acceptance 3 5        only criteria 3 and 5

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "snn/cli.hpp"
#include "snn/config.hpp"
#include "snn/gradcheck.hpp"
#include "snn/io_util.hpp"
#include "snn/neuron.hpp"
#include "snn/ops.hpp"
#include "snn/profiler.hpp"
#include "snn/staa.hpp"
#include "snn/training.hpp"
#include "snn/tsrd.hpp"

using namespace snn;
namespace fs = std::filesystem;

#ifndef SNN_SOURCE_DIR
#define SNN_SOURCE_DIR "."
#endif

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

bool same_bits(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.dtype() != b.dtype()) return false;
  return a.buffer() == b.buffer();
}

Tensor rand_tensor(const Shape& s, Rng& rng, double lo, double hi) {
  std::vector<double> v(numel(s));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(s, v);
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("snn_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// 1
Outcome energy_table() {
  struct Row {
    const char* stem;
    double acs, macs, mj;
  };
  const Row rows[] = {{"resnet20", 0.10, 0.06, 0.366}, {"resnet19", 1.50, 0.04, 1.534}, {"vgg13", 0.05, 0.28, 1.333}};
  double worst = 0;
  for (const auto& r : rows) {
    worst = std::max(worst, std::abs(profiler::energy(r.acs, r.macs) - r.mj));
    const std::string base = std::string(SNN_SOURCE_DIR) + "/configs/arch/" + r.stem;
    const auto arch = profiler::load_arch(base + ".json");
    const auto rep = profiler::build_report(arch, profiler::load_trace(base + "_activity.csv", arch.timesteps));
    worst = std::max(worst, std::abs(rep.energy_mj - r.mj));
  }
  return {worst <= 0.0005, "max |E - table| = " + fmt("%.2e", worst) + " mJ over formula and arch files"};
}

// 2
Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = gradcheck::run_suite("all", 0);
  double pw = 0, ops = 0, micro = 0;
  bool ok = !results.empty();
  std::string failed;
  for (const auto& r : results) {
    if (r.suite == "micro-staa") {
      ok = ok && r.tolerance <= 1e-4;
      micro = std::max(micro, r.max_rel_error);
    } else {
      ok = ok && r.tolerance <= 1e-6;
      (r.suite == "pointwise" ? pw : ops) = std::max(r.suite == "pointwise" ? pw : ops, r.max_rel_error);
    }
    if (!r.passed) {
      ok = false;
      failed += " " + r.name;
    }
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 60;
  return {ok, "pointwise " + fmt("%.1e", pw) + ", ops " + fmt("%.1e", ops) + ", micro STAA " + fmt("%.1e", micro) +
                  " (" + std::to_string(results.size()) + " groups, " + fmt("%.1f", secs) + " s)" +
                  (failed.empty() ? "" : "; failed:" + failed)};
}

// 3
Outcome surrogate_grid() {
  neuron::LifParams p;
  std::vector<double> vs;
  const double lo = p.v_th - p.a / 2, hi = p.v_th + p.a / 2;
  for (double b : {lo, hi})
    for (double d : {-1e-9, 1e-9}) vs.push_back(b + d);
  while (vs.size() < 1000) vs.push_back(p.v_th - 1.5 + 3.0 * static_cast<double>(vs.size() - 4) / 995.0);
  auto v = Tensor::from({vs.size()}, vs, DType::f64, true);
  backward(sum(neuron::heaviside_surrogate(v, p)));
  const auto g = v.grad()->to_vector();
  std::size_t inside = 0, bad = 0;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const bool in = std::abs(vs[i] - p.v_th) < p.a / 2;
    const double want = in ? 1.0 / p.a : 0.0;
    inside += in ? 1 : 0;
    if (g[i] != want || neuron::surrogate_factor(vs[i], p) != want) ++bad;
  }
  return {bad == 0 && vs.size() == 1000,
          std::to_string(vs.size()) + " points, " + std::to_string(inside) + " inside, " + std::to_string(bad) +
              " mismatches"};
}

// 4
Outcome identity_oracles() {
  Rng rng(11);
  std::vector<std::string> broken;

  auto gc = staa::GcParams::init(8, 4, rng, DType::f64, false);
  gc.conv_v_w = Tensor::zeros(gc.conv_v_w.shape(), DType::f64, true);
  gc.conv_v_b = Tensor::zeros(gc.conv_v_b.shape(), DType::f64, true);
  const auto x = rand_tensor({2, 8, 3, 3}, rng, -2, 2);
  if (!same_bits(staa::gc_forward(x, gc), x)) broken.push_back("GC");

  const auto pe = staa::PeTable::init(4, 8);
  for (std::size_t t = 0; t < 4; ++t)
    if (!same_bits(staa::pe_apply(x, pe, t), x)) broken.push_back("PE");

  auto sa = staa::SaParams::init(8, 4, 2.0, rng, DType::f64, 3.0);
  sa.conv2_w = Tensor::zeros(sa.conv2_w.shape(), DType::f64, true);
  sa.conv2_b = Tensor::zeros(sa.conv2_b.shape(), DType::f64, true);
  for (double gv : staa::sa_gate(x, sa).to_vector())
    if (gv != 0.5) {
      broken.push_back("SA");
      break;
    }

  std::size_t steps = 0;
  for (double tau : {1.5, 2.0, 3.0, 7.0}) {
    neuron::LifParams p;
    p.tau = tau;
    const auto c = neuron::AdaptiveCoeffs::vanilla(8, p);
    auto a = neuron::initial_state({2, 8, 3, 3}, p), b = a;
    for (int t = 0; t < 16; ++t, ++steps) {
      const auto in = rand_tensor({2, 8, 3, 3}, rng, -1, 3);
      auto ra = neuron::lif_step(a, in, p);
      auto rb = neuron::adaptive_lif_step(b, in, c, p);
      if (!same_bits(ra.state.v, rb.state.v) || !same_bits(ra.spikes, rb.spikes) || !same_bits(ra.state.h, rb.state.h)) {
        broken.push_back("adaptive LIF tau=" + fmt("%g", tau));
        break;
      }
      a = ra.state;
      b = rb.state;
    }
  }
  std::string d = "GC, PE, SA gate and adaptive LIF (" + std::to_string(steps) + " steps) exact";
  if (!broken.empty()) {
    d = "broken:";
    for (auto& s : broken) d += " " + s;
  }
  return {broken.empty(), d};
}

training::TrainConfig short_train(std::uint64_t seed, std::size_t epochs) {
  training::TrainConfig t;
  t.epochs = epochs;
  t.seed = seed;
  t.tsrd.seed = seed;
  return t;
}

model::NetworkConfig small_staa() {
  model::NetworkConfig c;
  c.neuron = model::NeuronKind::kStaa;
  c.convs = {{8, 3, 1, 1}, {8, 3, 2, 1}};
  c.staa.s = 4;
  c.init_gain = 6;
  return c;
}

// 5
Outcome tsrd_stats() {
  tsrd::TsrdConfig cfg{0.1, 5};
  std::size_t hits = 0, draws = 0;
  for (std::uint64_t e = 0; e < 50; ++e)
    for (std::uint64_t b = 0; b < 100; ++b)
      for (std::size_t l = 0; l < 5; ++l)
        for (std::size_t t = 0; t < 4; ++t, ++draws) hits += tsrd::bypass_bit(cfg, e, b, l, t) ? 1 : 0;
  const double rate = static_cast<double>(hits) / static_cast<double>(draws);
  const bool rate_ok = draws == 100000 && rate >= 0.095 && rate <= 0.105;

  const auto train = data::synth_dataset(data::SynthKind::kMovingBar, 96, 7);
  auto zero = short_train(7, 2);
  zero.tsrd.beta = 0.0;
  auto off = short_train(7, 2);
  off.use_tsrd = false;
  training::Trainer a(model::Network::build(small_staa(), 7), zero), b(model::Network::build(small_staa(), 7), off);
  bool same = true;
  for (int e = 0; e < 2; ++e) {
    const auto ma = a.train_epoch(train), mb = b.train_epoch(train);
    same = same && ma.loss == mb.loss && ma.activity == mb.activity;
  }
  const auto pa = a.network().parameters(), pb = b.network().parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) same = same && same_bits(pa[i], pb[i]);
  return {rate_ok && same, "bypass rate " + fmt("%.5f", rate) + " over " + std::to_string(draws) +
                               " draws; beta=0 vs disabled " + (same ? "bit-identical" : "DIFFERENT")};
}

// 6
Outcome gc_param_count() {
  const std::size_t C = 64, r = 4, h = C / r;
  // key conv C->1, query conv C->C/r, layer norm over C/r, value conv C/r->C; all with bias
  const std::size_t closed = (C + 1) + (C * h + h) + 2 * h + (h * C + C);
  Rng rng(1);
  const auto gc = staa::GcParams::init(C, r, rng);
  std::size_t allocated = 0;
  for (const auto& [name, t] : gc.named_parameters("gc.")) allocated += t.numel();
  const std::size_t bottleneck = gc.conv_q_w.numel() + gc.conv_v_w.numel();
  const bool ok = closed == allocated && closed == staa::gc_parameter_count(C, r) && closed == gc.parameter_count() &&
                  bottleneck == 2 * C * C / r;
  return {ok, "closed form " + std::to_string(closed) + ", allocated " + std::to_string(allocated) +
                  ", bottleneck weights " + std::to_string(bottleneck) + " = 2*C*C/r (vs C*C = " +
                  std::to_string(C * C) + ")"};
}

struct LearnRun {
  double final_acc = 0;
  double best_acc = 0;
  std::size_t first_95 = 0;
  std::vector<double> activity;
};

LearnRun moving_bar_run(model::NeuronKind kind, std::uint64_t seed, double& secs) {
  auto m = config::defaults();
  auto rc = config::build(config::merge(m, {{"model.neuron", model::neuron_kind_name(kind)},
                                            {"train.seed", std::to_string(seed)},
                                            {"data.seed", std::to_string(seed)}}));
  auto ds = config::load_datasets(rc);
  const auto t0 = std::chrono::steady_clock::now();
  training::Trainer tr(model::Network::build(rc.net, seed), rc.train);
  LearnRun out;
  while (tr.epochs_done() < rc.train.epochs) {
    tr.train_epoch(ds.train);
    const auto ev = tr.evaluate(ds.test);
    out.final_acc = ev.accuracy;
    out.best_acc = std::max(out.best_acc, ev.accuracy);
    out.activity = ev.activity;
    if (out.first_95 == 0 && ev.accuracy >= 0.95) out.first_95 = tr.epochs_done();
  }
  secs = seconds_since(t0);
  return out;
}

// 7
Outcome moving_bar_learning() {
  const auto t0 = std::chrono::steady_clock::now();
  double staa_sum = 0, lif_sum = 0, max_run = 0;
  std::size_t first_95 = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    double s1 = 0, s2 = 0;
    const auto a = moving_bar_run(model::NeuronKind::kStaa, seed, s1);
    const auto b = moving_bar_run(model::NeuronKind::kLif, seed, s2);
    if (seed == 1) first_95 = a.first_95;
    staa_sum += a.final_acc;
    lif_sum += b.final_acc;
    max_run = std::max({max_run, s1, s2});
    per_seed += " " + fmt("%.3f", a.final_acc) + "/" + fmt("%.3f", b.final_acc);
    std::printf("  seed %llu: staa %.4f (95%% at epoch %zu, %.1f s)  lif %.4f (%.1f s)\n",
                static_cast<unsigned long long>(seed), a.final_acc, a.first_95, s1, b.final_acc, s2);
    std::fflush(stdout);
  }
  const double total = seconds_since(t0);
  const double staa_mean = staa_sum / 5, lif_mean = lif_sum / 5;
  const bool ok = first_95 > 0 && first_95 <= 30 && staa_mean >= lif_mean && total < 600;
  return {ok, "seed 1 STAA hits 95% at epoch " + std::to_string(first_95) + "; 5-seed mean STAA " +
                  fmt("%.4f", staa_mean) + " vs LIF " + fmt("%.4f", lif_mean) + " (staa/lif:" + per_seed + "); " +
                  fmt("%.0f", total) + " s total, slowest run " + fmt("%.0f", max_run) + " s"};
}

// 8
Outcome conservation() {
  Rng rng(3);
  bool counts_ok = true;
  std::size_t streams = 0;
  for (std::size_t T : {1, 3, 4, 7, 16}) {
    for (int k = 0; k < 20; ++k, ++streams) {
      data::EventStream s{5, 6, {}};
      const std::size_t n = rng.below(400);
      const std::uint64_t span = 1 + rng.below(k % 2 == 0 ? 1000 : 4000000000ULL);
      for (std::size_t i = 0; i < n; ++i)
        s.events.push_back({rng.below(span), static_cast<std::uint32_t>(rng.below(6)), static_cast<std::uint32_t>(rng.below(5)),
                            static_cast<std::uint8_t>(rng.below(2))});
      std::stable_sort(s.events.begin(), s.events.end(), [](auto& a, auto& b) { return a.t_us < b.t_us; });
      counts_ok = counts_ok && sum(data::bin_events(s, T)).item() == static_cast<double>(n);
    }
  }
  const auto ds = data::synth_dataset(data::SynthKind::kMovingBar, 64, 2);
  bool binary = true, bounded = true;
  std::size_t spike_tensors = 0;
  for (auto kind : {model::NeuronKind::kLif, model::NeuronKind::kAdaptive, model::NeuronKind::kStaa}) {
    auto nc = small_staa();
    nc.neuron = kind;
    training::Trainer tr(model::Network::build(nc, 2), short_train(2, 2));
    tr.train_epoch(ds);
    model::ForwardOptions fo;
    fo.record_spikes = true;
    fo.training = true;
    fo.tsrd = &tr.config().tsrd;
    std::vector<std::size_t> idx(16);
    std::iota(idx.begin(), idx.end(), 0);
    const auto r = tr.network().forward(data::make_batch(ds, idx, DType::f64), fo);
    for (const auto& layer : r.spikes)
      for (const auto& s : layer) {
        ++spike_tensors;
        for (double v : s.to_vector()) binary = binary && (v == 0.0 || v == 1.0);
      }
    for (std::size_t l = 0; l < r.spike_count.size(); ++l) {
      const double a = r.activity(l);
      bounded = bounded && a >= 0 && a <= 1;
    }
    for (double a : tr.evaluate(ds).activity) bounded = bounded && a >= 0 && a <= 1;
  }
  return {counts_ok && binary && bounded,
          std::to_string(streams) + " event streams binned " + (counts_ok ? "losslessly" : "WITH LOSS") + "; " +
              std::to_string(spike_tensors) + " spike tensors " + (binary ? "binary" : "NOT binary") + "; a_l " +
              (bounded ? "in [0,1]" : "OUT OF RANGE")};
}

int cli(const std::vector<std::string>& args) {
  std::vector<std::string> a{"staa-snn", "-q"};
  a.insert(a.end(), args.begin(), args.end());
  std::ostringstream out, err;
  const int rc = cli::run(a, out, err);
  if (rc != 0) std::printf("  cli error: %s\n", err.str().c_str());
  return rc;
}

// 9
Outcome reproducibility() {
  const auto dir = scratch("repro");
  const std::vector<std::string> common{"train", "--train-size", "128", "--test-size", "64", "--epochs", "3",
                                        "--augment", "true", "--mixup", "0.25"};
  auto run = [&](const std::string& name, std::vector<std::string> extra) {
    std::vector<std::string> a{"--seed", "9", "-o", (dir / name).string()};
    a.insert(a.end(), common.begin(), common.end());
    a.insert(a.end(), extra.begin(), extra.end());
    return cli(a);
  };
  bool ran = run("a", {}) == 0 && run("b", {}) == 0;
  const bool identical = ran && read_file((dir / "a/metrics.csv").string()) == read_file((dir / "b/metrics.csv").string());

  // resume: stop after one epoch of the 3-epoch schedule, then continue
  ran = ran && run("c", {"--checkpoint-every", "1"}) == 0;
  fs::create_directories(dir / "d");
  {
    // keep only the header and the first epoch row
    std::istringstream in(read_file((dir / "c/metrics.csv").string()));
    std::string l1, l2;
    std::getline(in, l1);
    std::getline(in, l2);
    write_file((dir / "d/metrics.csv").string(), l1 + "\n" + l2 + "\n");
  }
  ran = ran && run("d", {"--resume", (dir / "c/checkpoints/epoch_001.ckpt").string()}) == 0;
  const bool resumed = ran && read_file((dir / "c/metrics.csv").string()) == read_file((dir / "d/metrics.csv").string()) &&
                       read_file((dir / "c/checkpoints/last.ckpt").string()) ==
                           read_file((dir / "d/checkpoints/last.ckpt").string());
  fs::remove_all(dir);
  return {identical && resumed, std::string("same-seed metrics.csv ") + (identical ? "byte-identical" : "DIFFER") +
                                    "; resume from epoch 1 " +
                                    (resumed ? "matches uninterrupted metrics and final checkpoint" : "DIVERGES")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"energy golden table", energy_table},
      {"gradient suite", gradient_suite},
      {"surrogate window", surrogate_grid},
      {"identity oracles", identity_oracles},
      {"TSRD statistics", tsrd_stats},
      {"GC parameter count", gc_param_count},
      {"moving-bar learning", moving_bar_learning},
      {"conservation", conservation},
      {"reproducibility", reproducibility},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && only.count(i + 1) == 0) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
