#include "snn/cli.hpp"

#include <boost/version.hpp>
#include <filesystem>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"
#include "snn/archive.hpp"
#include "snn/config.hpp"
#include "snn/data.hpp"
#include "snn/gradcheck.hpp"
#include "snn/io_util.hpp"
#include "snn/profiler.hpp"
#include "snn/training.hpp"

namespace snn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int verbosity = 0;
  bool quiet = false;
};

// Flag -> config key. Values stay strings; config::build validates them.
struct Override {
  std::string flag;
  std::string key;
  std::string help;
  std::string value;
  CLI::Option* option = nullptr;
};

std::vector<Override> make_overrides() {
  return {
      {"--epochs", "train.epochs", "training epochs", {}, nullptr},
      {"--lr", "train.lr", "initial learning rate", {}, nullptr},
      {"--lr-min", "train.lr_min", "final cosine learning rate", {}, nullptr},
      {"--momentum", "train.momentum", "SGD momentum", {}, nullptr},
      {"--batch-size", "train.batch_size", "mini-batch size", {}, nullptr},
      {"--timesteps,-T", "train.timesteps", "simulation timesteps T", {}, nullptr},
      {"--beta", "train.beta", "TSRD bypass probability", {}, nullptr},
      {"--weight-decay", "train.weight_decay", "L2 weight decay", {}, nullptr},
      {"--augment", "train.augment", "enable data augmentation (true/false)", {}, nullptr},
      {"--mixup", "train.mixup", "fraction of batches mixed with mixup", {}, nullptr},
      {"--grad-clip", "train.grad_clip", "gradient norm limit per step (0: off)", {}, nullptr},
      {"--neuron", "model.neuron", "neuron kind: lif, adaptive or staa", {}, nullptr},
      {"--channels", "model.channels", "conv output channels, comma separated", {}, nullptr},
      {"--strides", "model.strides", "conv strides, comma separated", {}, nullptr},
      {"--alpha", "model.alpha", "SA pooling scale alpha", {}, nullptr},
      {"--r", "model.r", "GC bottleneck ratio r", {}, nullptr},
      {"--s", "model.s", "SA bottleneck ratio s", {}, nullptr},
      {"--v-th", "model.v_th", "firing threshold", {}, nullptr},
      {"--tau", "model.tau", "membrane time constant", {}, nullptr},
      {"--surrogate-width", "model.surrogate_width", "surrogate window width a", {}, nullptr},
      {"--blocks", "model.blocks", "enabled STAA blocks (gc,pe,sa or none)", {}, nullptr},
      {"--init-gain", "model.init_gain", "conv initialisation gain", {}, nullptr},
      {"--dtype", "model.dtype", "f64 or f32", {}, nullptr},
      {"--dataset", "data.kind", "moving-bar, textures, parity-blobs or manifest", {}, nullptr},
      {"--train-size", "data.train_size", "synthetic training samples", {}, nullptr},
      {"--test-size", "data.test_size", "synthetic test samples", {}, nullptr},
      {"--data-seed", "data.seed", "synthetic data seed", {}, nullptr},
      {"--noise-events", "data.noise_events", "noise events per moving-bar step", {}, nullptr},
      {"--train-manifest", "data.train_manifest", "training manifest (with --dataset manifest)", {}, nullptr},
      {"--test-manifest", "data.test_manifest", "test manifest", {}, nullptr},
  };
}

void add_overrides(CLI::App* cmd, std::vector<Override>& overrides) {
  for (auto& o : overrides) {
    o.value = config::defaults().at(o.key);
    o.option = cmd->add_option(o.flag, o.value, o.help + " [" + o.key + "]")->capture_default_str();
  }
}

struct ResolvedConfig {
  config::ConfigMap file_values;
  config::ConfigMap overrides;
  config::ConfigMap effective;
};

ResolvedConfig resolve(const Globals& g, const std::vector<Override>& overrides, CLI::Option* seed_opt) {
  ResolvedConfig rc;
  if (!g.config_path.empty()) rc.file_values = config::load_config(g.config_path);
  for (const auto& o : overrides) {
    if (o.option != nullptr && o.option->count() > 0) rc.overrides[o.key] = o.value;
  }
  if (seed_opt->count() > 0) rc.overrides["train.seed"] = std::to_string(g.seed);
  rc.effective = config::merge(config::merge(config::defaults(), rc.file_values), rc.overrides);
  return rc;
}

json versions() {
  return {{"staa-snn", kToolVersion},
          {"compiler", __VERSION__},
          {"cplusplus", __cplusplus},
          {"cli11", CLI11_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"boost", BOOST_LIB_VERSION}};
}

void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::string>& args,
                    const Globals& g, const ResolvedConfig* rc, const std::vector<std::string>& outputs) {
  json m;
  m["command"] = command;
  m["argv"] = args;
  m["seed"] = g.seed;
  m["config_file"] = g.config_path;
  if (rc != nullptr) {
    m["config_file_values"] = rc->file_values;
    m["overrides"] = rc->overrides;
    m["effective_config"] = rc->effective;
    m["effective_config_ini"] = config::to_ini(rc->effective);
  }
  m["outputs"] = outputs;
  m["versions"] = versions();
  fs::create_directories(dir);
  write_file((dir / "manifest.json").string(), m.dump(2) + "\n");
}

json activity_json(const std::vector<double>& a) {
  json out = json::array();
  for (double v : a) out.push_back(v);
  return out;
}

profiler::EnergyReport energy_for(const model::Network& net, const std::vector<double>& activity, bool static_input) {
  return profiler::build_report(net.arch_spec(static_input), net.activity_trace(activity, static_input));
}

void write_reports(const fs::path& dir, const profiler::EnergyReport& r, std::vector<std::string>& outputs) {
  write_file((dir / "report.json").string(), profiler::emit_report(r, profiler::ReportFormat::kJson));
  write_file((dir / "report.csv").string(), profiler::emit_report(r, profiler::ReportFormat::kCsv));
  outputs.emplace_back("report.json");
  outputs.emplace_back("report.csv");
}

std::string arch_trace_csv(const model::Network& net, const std::vector<double>& activity, bool static_input) {
  return profiler::trace_to_csv(net.activity_trace(activity, static_input));
}

int cmd_train(const Globals& g, const ResolvedConfig& rc, const std::string& resume, std::size_t checkpoint_every,
              const std::vector<std::string>& args, std::ostream& out) {
  auto cfg = config::build(rc.effective);
  auto ds = config::load_datasets(cfg);
  cfg.net.name = "staa-snn-" + model::neuron_kind_name(cfg.net.neuron);
  training::Trainer trainer(model::Network::build(cfg.net, cfg.train.seed), cfg.train);

  const fs::path dir(g.out_dir);
  fs::create_directories(dir / "checkpoints");
  const auto metrics_path = (dir / "metrics.csv").string();
  const std::size_t L = trainer.network().spiking_layers();
  if (!resume.empty()) {
    trainer.load_checkpoint(resume);
    if (!fs::exists(metrics_path)) write_file(metrics_path, training::metrics_header(L) + "\n");
  } else {
    write_file(metrics_path, training::metrics_header(L) + "\n");
  }
  std::vector<std::string> outputs{"metrics.csv", "summary.json", "checkpoints/last.ckpt", "arch.json", "activity.csv"};
  // The manifest goes down first so even a failed run leaves its configuration behind.
  write_manifest(dir, "train", args, g, &rc, outputs);

  const data::Dataset& eval_set = ds.test.size() > 0 ? ds.test : ds.train;
  training::EpochMetrics last;
  training::EvalResult eval;
  double best = 0;
  while (trainer.epochs_done() < cfg.train.epochs) {
    last = trainer.train_epoch(ds.train);
    eval = trainer.evaluate(eval_set);
    best = std::max(best, eval.accuracy);
    append_file(metrics_path, training::metrics_row(last, eval) + "\n");
    if (!g.quiet) {
      out << "epoch " << last.epoch << "/" << cfg.train.epochs << "  lr " << fixed(last.lr, 5) << "  loss "
          << fixed(last.loss, 4) << "  acc " << fixed(last.accuracy, 4) << "  test_acc " << fixed(eval.accuracy, 4)
          << "\n";
    }
    if (checkpoint_every > 0 && last.epoch % checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03zu.ckpt", last.epoch);
      trainer.save_checkpoint((dir / "checkpoints" / name).string());
    }
    trainer.save_checkpoint((dir / "checkpoints" / "last.ckpt").string());
  }
  if (last.epoch == 0) {
    // Resumed at the final epoch: nothing left to train.
    eval = trainer.evaluate(eval_set);
    best = eval.accuracy;
    trainer.save_checkpoint((dir / "checkpoints" / "last.ckpt").string());
  }

  const bool static_input = ds.train.timesteps == 1 && cfg.net.timesteps > 1;
  const auto& net = trainer.network();
  const auto report = energy_for(net, eval.activity, static_input);
  write_file((dir / "arch.json").string(), profiler::arch_to_json(net.arch_spec(static_input)));
  write_file((dir / "activity.csv").string(), arch_trace_csv(net, eval.activity, static_input));
  write_reports(dir, report, outputs);

  json summary;
  summary["epochs"] = trainer.epochs_done();
  summary["neuron"] = model::neuron_kind_name(cfg.net.neuron);
  summary["train_loss"] = last.loss;
  summary["train_accuracy"] = last.accuracy;
  summary["test_loss"] = eval.loss;
  summary["test_accuracy"] = eval.accuracy;
  summary["best_test_accuracy"] = best;
  summary["activity"] = activity_json(eval.activity);
  summary["parameters"] = net.parameter_count();
  summary["energy"] = json::parse(profiler::emit_report(report, profiler::ReportFormat::kJson));
  write_file((dir / "summary.json").string(), summary.dump(2) + "\n");
  write_manifest(dir, "train", args, g, &rc, outputs);
  return kExitOk;
}

int cmd_eval(const Globals& g, const ResolvedConfig& rc, const std::string& checkpoint,
             const std::vector<std::string>& args, std::ostream& out) {
  auto cfg = config::build(rc.effective);
  auto ds = config::load_datasets(cfg);
  cfg.net.name = "staa-snn-" + model::neuron_kind_name(cfg.net.neuron);
  training::Trainer trainer(model::Network::build(cfg.net, cfg.train.seed), cfg.train);
  trainer.load_checkpoint(checkpoint);
  const data::Dataset& eval_set = ds.test.size() > 0 ? ds.test : ds.train;
  const auto eval = trainer.evaluate(eval_set);
  const bool static_input = ds.train.timesteps == 1 && cfg.net.timesteps > 1;
  const auto report = energy_for(trainer.network(), eval.activity, static_input);

  const fs::path dir(g.out_dir);
  fs::create_directories(dir);
  std::vector<std::string> outputs{"eval.json"};
  json j;
  j["checkpoint"] = checkpoint;
  j["epoch"] = trainer.epochs_done();
  j["samples"] = eval_set.size();
  j["loss"] = eval.loss;
  j["accuracy"] = eval.accuracy;
  j["activity"] = activity_json(eval.activity);
  write_file((dir / "eval.json").string(), j.dump(2) + "\n");
  write_reports(dir, report, outputs);
  write_manifest(dir, "eval", args, g, &rc, outputs);
  if (!g.quiet) {
    out << "accuracy " << fixed(eval.accuracy, 4) << "  loss " << fixed(eval.loss, 4) << "  samples " << eval_set.size()
        << "\n";
  }
  return kExitOk;
}

int cmd_profile(const Globals& g, const std::string& arch_path, const std::string& trace_path, std::size_t timesteps,
                const std::string& format, const std::vector<std::string>& args, std::ostream& out) {
  const auto fmt = profiler::parse_format(format);
  const auto arch = profiler::load_arch(arch_path);
  const std::size_t T = timesteps > 0 ? timesteps : arch.timesteps;
  const auto trace = profiler::load_trace(trace_path, T);
  const auto report = profiler::build_report(arch, trace);
  out << profiler::emit_report(report, fmt);
  const fs::path dir(g.out_dir);
  fs::create_directories(dir);
  std::vector<std::string> outputs;
  write_reports(dir, report, outputs);
  write_manifest(dir, "profile", args, g, nullptr, outputs);
  return kExitOk;
}

int cmd_gradcheck(const Globals& g, const std::string& suite, const std::vector<std::string>& args, std::ostream& out) {
  const auto results = gradcheck::run_suite(suite, g.seed);
  std::string csv = "suite,name,entries,max_rel_error,tolerance,passed\n";
  bool ok = true;
  for (const auto& r : results) {
    ok = ok && r.passed;
    csv += r.suite + "," + r.name + "," + std::to_string(r.entries) + "," + shortest(r.max_rel_error) + "," +
           shortest(r.tolerance) + "," + (r.passed ? "1" : "0") + "\n";
    if (!g.quiet && (g.verbosity > 0 || !r.passed)) {
      char line[160];
      std::snprintf(line, sizeof(line), "%-11s %-34s %5zu  %.3e  (tol %.0e)  %s\n", r.suite.c_str(), r.name.c_str(),
                    r.entries, r.max_rel_error, r.tolerance, r.passed ? "ok" : "FAIL");
      out << line;
    }
  }
  const fs::path dir(g.out_dir);
  fs::create_directories(dir);
  write_file((dir / "gradcheck.csv").string(), csv);
  write_manifest(dir, "gradcheck", args, g, nullptr, {"gradcheck.csv"});
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  out << (ok ? "gradcheck passed: " : "gradcheck FAILED: ") << results.size() - failed << "/" << results.size()
      << " parameter groups within tolerance\n";
  return ok ? kExitOk : kExitInvalid;
}

int cmd_synth(const Globals& g, const std::string& kind, std::size_t n, const std::string& stem,
              const data::SynthOptions& opt, const std::vector<std::string>& args, std::ostream& out) {
  const auto ds = data::synth_dataset(data::parse_synth_kind(kind), n, g.seed, opt);
  data::write_manifest(g.out_dir, ds, stem);
  write_manifest(g.out_dir, "synth-data", args, g, nullptr, {stem + ".json"});
  if (!g.quiet) out << "wrote " << ds.size() << " " << kind << " samples to " << (fs::path(g.out_dir) / (stem + ".json")).string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spiking neural networks with spatio-temporal attention aggregation", "staa-snn"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);

  Globals g;
  app.add_option("--config,-c", g.config_path, "sectioned key/value config file; flags override it");
  auto* seed_opt = app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--out-dir,-o", g.out_dir, "output directory")->capture_default_str();
  app.add_flag("-v,--verbose", g.verbosity, "more output (repeatable)");
  app.add_flag("-q,--quiet", g.quiet, "only errors");

  auto* train = app.add_subcommand("train", "train a network and write metrics, checkpoints and reports");
  auto train_overrides = make_overrides();
  add_overrides(train, train_overrides);
  std::string resume;
  std::size_t checkpoint_every = 0;
  train->add_option("--resume", resume, "continue from a checkpoint");
  train->add_option("--checkpoint-every", checkpoint_every, "also keep checkpoints/epoch_NNN.ckpt every N epochs (0: off)")
      ->capture_default_str();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  auto eval_overrides = make_overrides();
  add_overrides(eval, eval_overrides);
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  auto* profile = app.add_subcommand("profile", "count operations and estimate energy");
  std::string arch_path, trace_path, format = "table";
  std::size_t timesteps = 0;
  profile->add_option("--arch", arch_path, "architecture JSON")->required();
  profile->add_option("--trace", trace_path, "per-layer activity CSV (layer,activity)")->required();
  profile->add_option("--timesteps,-T", timesteps, "timesteps (0: take from the arch file)")->capture_default_str();
  profile->add_option("--format", format, "json, csv or table")->capture_default_str();

  auto* gcheck = app.add_subcommand("gradcheck", "compare autodiff gradients with finite differences");
  std::string suite = "all";
  gcheck->add_option("--suite", suite, "pointwise, ops, micro-staa or all")->capture_default_str();

  auto* synth = app.add_subcommand("synth-data", "write a synthetic dataset with a manifest");
  std::string kind = "moving-bar", stem = "train";
  std::size_t n = 1024;
  data::SynthOptions sopt;
  synth->add_option("--kind", kind, "moving-bar, textures or parity-blobs")->capture_default_str();
  synth->add_option("--n", n, "number of samples")->capture_default_str();
  synth->add_option("--name", stem, "manifest stem")->capture_default_str();
  synth->add_option("--height", sopt.height, "sensor height")->capture_default_str();
  synth->add_option("--width", sopt.width, "sensor width")->capture_default_str();
  synth->add_option("--timesteps,-T", sopt.timesteps, "moving-bar steps")->capture_default_str();
  synth->add_option("--noise-events", sopt.noise_events, "noise events per step")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*train) return cmd_train(g, resolve(g, train_overrides, seed_opt), resume, checkpoint_every, args, out);
    if (*eval) return cmd_eval(g, resolve(g, eval_overrides, seed_opt), checkpoint, args, out);
    if (*profile) return cmd_profile(g, arch_path, trace_path, timesteps, format, args, out);
    if (*gcheck) return cmd_gradcheck(g, suite, args, out);
    if (*synth) return cmd_synth(g, kind, n, stem, sopt, args, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << app.help();
  return kExitInvalid;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace snn::cli
