// egd: runtime executional-error detection for robot-assisted surgery
// kinematics. Subcommands cover the full pipeline: synthetic data, training,
// LOSO evaluation, KL-divergence analysis, latency benchmarking, streaming
// replay monitoring, and gradient verification.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "egd/eval.hpp"
#include "egd/gradcheck_suite.hpp"
#include "egd/monitor.hpp"
#include "egd/synthetic.hpp"
#include "json.hpp"

namespace {

constexpr const char* kToolVersion = egd::models::kToolVersion;

using egd::ValidationError;

uint64_t resolve_seed(const std::optional<uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("EGD_SEED")) return std::strtoull(env, nullptr, 10);
  return 0;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path.string());
  f << content;
}

egd::models::ModelConfig resolve_model_config(const std::string& model,
                                              const std::string& config_json,
                                              uint64_t seed) {
  const auto arch = egd::models::parse_architecture(model);
  if (!arch) throw ValidationError("unknown model '" + model + "'");
  auto cfg = egd::models::ModelConfig::defaults_for(*arch);
  cfg.seed = seed;
  if (!config_json.empty()) egd::models::apply_config_overrides(cfg, config_json);
  return cfg;
}

void log_run(const std::string& cmd, uint64_t seed, const std::string& extra) {
  std::cerr << "egd " << cmd << ": version=" << kToolVersion << " seed=" << seed;
  if (!extra.empty()) std::cerr << " " << extra;
  std::cerr << "\n";
}

egd::eval::Scope scope_from_meta(const egd::models::CheckpointMeta& meta) {
  egd::eval::Scope scope;
  if (!meta.scope_task.empty()) {
    const auto t = egd::dataio::parse_task(meta.scope_task);
    if (!t) throw ValidationError("checkpoint scope task '" + meta.scope_task + "'");
    scope.task = *t;
  }
  if (!meta.scope_gesture.empty())
    scope.gesture_id = std::stoi(meta.scope_gesture.substr(1));
  return scope;
}

// windows + instances of every in-scope labeled modeled gesture
struct ScopedInstances {
  std::vector<egd::eval::InstanceSample> instances;
  egd::Batch normal_windows;
};

ScopedInstances collect_scope(const egd::dataio::DatasetManifest& m,
                              const egd::eval::Scope& scope,
                              const egd::preprocess::ChannelStats& stats,
                              const egd::preprocess::WindowConfig& wcfg) {
  ScopedInstances out;
  for (const auto& trial : m.trials)
    for (size_t gi = 0; gi < trial.gesture_instances.size(); ++gi) {
      const auto& inst = trial.gesture_instances[gi];
      if (!inst.modeled() || inst.error_label < 0) continue;
      if (!scope.contains(trial.task, inst.gesture_id)) continue;
      egd::eval::InstanceSample s;
      s.trial_id = trial.trial_id;
      s.gesture_index = static_cast<int>(gi + 1);
      s.task = trial.task;
      s.gesture_id = inst.gesture_id;
      s.label = inst.error_label;
      s.windows = egd::preprocess::instance_windows(trial, gi, stats, wcfg);
      if (s.windows.empty()) continue;
      if (inst.error_label == 0)
        for (const auto& w : s.windows) out.normal_windows.push_back(w.data);
      out.instances.push_back(std::move(s));
    }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"executional error detection for surgical kinematics"};
  app.require_subcommand(1);

  // shared flag storage
  std::string data_dir, labels_path, out_path, model, config_json, setup_str, task_str;
  std::string gesture_str, trial_id, summary_path, ref_data_dir, ref_labels_path;
  std::string dump_windows_path;
  std::optional<uint64_t> seed_flag;
  int jobs = 1;
  double rate = 1.0;
  long ref_cap = -1;

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
  egd::dataio::SyntheticConfig synth_cfg = egd::dataio::default_synthetic_config();
  std::optional<int> synth_trials;
  synth->add_option("--out", out_path, "output dataset root")->required();
  synth->add_option("--seed", seed_flag, "generator seed (default: EGD_SEED or 7)");
  synth->add_option("--trials", synth_trials,
                    "trials per task (multiple of --repetitions)");
  synth->add_option("--subjects", synth_cfg.subjects, "subjects per task");
  synth->add_option("--repetitions", synth_cfg.repetitions, "repetitions per subject");
  synth->add_option("--error-rate", synth_cfg.error_rate, "per-instance error rate");
  synth->add_option("--separability", synth_cfg.separability,
                    "error magnitude scale (calibrated default)");
  synth->add_option("--noise", synth_cfg.channel_noise, "channel noise sigma");
  synth->add_option("--jitter", synth_cfg.phase_jitter, "per-instance phase jitter (rad)");

  // ---- train ----
  auto* train = app.add_subcommand("train", "train one model and write a checkpoint");
  train->add_option("--data", data_dir, "dataset root")->required();
  train->add_option("--labels", labels_path, "labels CSV")->required();
  train->add_option("--out", out_path, "checkpoint path")->required();
  train->add_option("--setup", setup_str, "gsts|gst|gts|gtt")->required();
  train->add_option("--model", model, "cnn|lstm|siamese-cnn|siamese-lstm")->required();
  train->add_option("--task", task_str, "task scope (Suturing|Needle_Passing)");
  train->add_option("--gesture", gesture_str, "gesture scope (G1..G9)");
  train->add_option("--seed", seed_flag, "training seed");
  train->add_option("--config", config_json, "JSON hyperparameter overrides");

  // ---- evaluate ----
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on a dataset");
  evaluate->add_option("--ckpt", out_path, "checkpoint path")->required();
  evaluate->add_option("--data", data_dir, "dataset root")->required();
  evaluate->add_option("--labels", labels_path, "labels CSV")->required();
  evaluate->add_option("--ref-data", ref_data_dir,
                       "reference dataset root (Siamese; default --data)");
  evaluate->add_option("--ref-labels", ref_labels_path, "reference labels CSV");
  evaluate->add_option("--ref-cap", ref_cap, "cap on vote references (-1 unlimited)");
  evaluate->add_option("--seed", seed_flag, "seed for reference subsampling");
  evaluate->add_option("--metrics-out", summary_path, "metrics CSV path");
  evaluate->add_option("--dump-windows", dump_windows_path, "debug window CSV path");

  // ---- loso ----
  auto* loso = app.add_subcommand("loso", "LOSO cross-validation experiment");
  bool tune = false, predictions = false;
  loso->add_option("--data", data_dir, "dataset root")->required();
  loso->add_option("--labels", labels_path, "labels CSV")->required();
  loso->add_option("--setup", setup_str, "gsts|gst|gts|gtt")->required();
  loso->add_option("--model", model, "cnn|lstm|siamese-cnn|siamese-lstm")->required();
  loso->add_option("--out", out_path, "output directory (metrics.csv, ...)");
  loso->add_option("--seed", seed_flag, "experiment seed");
  loso->add_option("--config", config_json, "JSON hyperparameter overrides");
  loso->add_option("--jobs", jobs, "parallel fold/scope workers");
  loso->add_flag("--tune", tune, "nested hyperparameter tuning per fold");
  loso->add_flag("--predictions", predictions, "also write predictions.csv");

  // ---- kld ----
  auto* kld = app.add_subcommand("kld", "KL divergence between normal gesture classes");
  int bins = 50;
  kld->add_option("--data", data_dir, "dataset root")->required();
  kld->add_option("--labels", labels_path, "labels CSV")->required();
  kld->add_option("--bins", bins, "histogram bins");
  kld->add_option("--out", out_path, "matrix CSV path");

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "per-window inference latency");
  int reps = 20;
  bench->add_option("--ckpt", out_path, "checkpoint path")->required();
  bench->add_option("--data", data_dir, "dataset root")->required();
  bench->add_option("--labels", labels_path, "labels CSV")->required();
  bench->add_option("--reps", reps, "measurement repetitions per window");
  bench->add_option("--ref-cap", ref_cap, "cap on vote references (-1 unlimited)");
  bench->add_option("--seed", seed_flag, "seed for reference subsampling");
  bench->add_option("--out", summary_path, "latency CSV path");

  // ---- monitor ----
  auto* monitor = app.add_subcommand("monitor", "streaming replay error monitor");
  std::vector<std::string> ckpt_paths;
  monitor->add_option("--ckpt", ckpt_paths, "checkpoint path (repeatable)")->required();
  monitor->add_option("--data", data_dir, "dataset root")->required();
  monitor->add_option("--labels", labels_path, "labels CSV")->required();
  monitor->add_option("--trial", trial_id, "trial id to replay")->required();
  monitor->add_option("--rate", rate, "replay rate (1.0 real-time, 0 = fast)");
  monitor->add_option("--out", out_path, "detection events JSONL (default stdout)");
  monitor->add_option("--summary", summary_path, "summary CSV path");
  monitor->add_option("--ref-cap", ref_cap, "cap on vote references (-1 unlimited)");
  monitor->add_option("--seed", seed_flag, "seed for reference subsampling");

  // ---- gradcheck ----
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  int gc_instances = 20;
  gradcheck->add_option("--instances", gc_instances, "random instances per case");
  gradcheck->add_option("--seed", seed_flag, "seed");
  gradcheck->add_option("--out", out_path, "report CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const uint64_t seed = resolve_seed(seed_flag);

    if (*synth) {
      const uint64_t synth_seed =
          seed_flag || std::getenv("EGD_SEED") ? seed : egd::dataio::kDefaultSyntheticSeed;
      if (synth_trials) {
        if (*synth_trials % synth_cfg.repetitions != 0)
          throw ValidationError("--trials must be a multiple of --repetitions");
        synth_cfg.subjects = *synth_trials / synth_cfg.repetitions;
      }
      log_run("synth", synth_seed, "out=" + out_path);
      const auto manifest =
          egd::dataio::generate_synthetic(synth_cfg, synth_seed, out_path);
      std::cerr << "wrote " << manifest.trials.size() << " trials under " << out_path
                << "\n";
      return 0;
    }

    if (*train) {
      const auto setup = egd::eval::parse_setup(setup_str);
      if (!setup) throw ValidationError("unknown setup '" + setup_str + "'");
      const bool needs_task = *setup == egd::eval::TrainingSetup::GSTS ||
                              *setup == egd::eval::TrainingSetup::GstarTS;
      const bool needs_gesture = *setup == egd::eval::TrainingSetup::GSTS ||
                                 *setup == egd::eval::TrainingSetup::GSTstar;
      if (needs_task && task_str.empty())
        throw ValidationError("setup " + setup_str + " requires --task");
      if (needs_gesture && gesture_str.empty())
        throw ValidationError("setup " + setup_str + " requires --gesture");
      if (!needs_task && !task_str.empty())
        throw ValidationError("setup " + setup_str + " does not take --task");
      if (!needs_gesture && !gesture_str.empty())
        throw ValidationError("setup " + setup_str + " does not take --gesture");

      egd::eval::Scope scope;
      if (!task_str.empty()) {
        const auto t = egd::dataio::parse_task(task_str);
        if (!t) throw ValidationError("unknown task '" + task_str + "'");
        scope.task = *t;
      }
      if (!gesture_str.empty()) {
        if (gesture_str.size() < 2 || gesture_str[0] != 'G')
          throw ValidationError("gesture must look like G3");
        scope.gesture_id = std::stoi(gesture_str.substr(1));
        if (!egd::dataio::is_modeled_gesture(*scope.gesture_id))
          throw ValidationError(gesture_str + " is not a modeled gesture");
      }

      auto cfg = resolve_model_config(model, config_json, seed);
      log_run("train", seed, "config=" + egd::models::config_to_json(cfg));

      std::vector<std::string> warnings;
      const auto manifest = egd::dataio::assemble_dataset(data_dir, labels_path, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

      egd::preprocess::WindowConfig wcfg;
      egd::preprocess::StatsAccumulator acc;
      for (const auto& trial : manifest.trials)
        for (const auto& inst : trial.gesture_instances) {
          if (!inst.modeled() || inst.error_label < 0) continue;
          if (!scope.contains(trial.task, inst.gesture_id)) continue;
          acc.add(egd::preprocess::downsample(
              egd::preprocess::instance_matrix(trial, inst), wcfg.downsample_factor));
        }
      const auto stats = acc.finalize("train " + setup_str + " " + scope.key());

      const auto scoped = collect_scope(manifest, scope, stats, wcfg);
      egd::Batch windows;
      std::vector<double> labels;
      std::vector<int> normal_idx, err_idx;
      for (const auto& inst : scoped.instances)
        for (const auto& w : inst.windows) {
          windows.push_back(w.data);
          labels.push_back(w.label);
          (w.label == 1 ? err_idx : normal_idx)
              .push_back(static_cast<int>(windows.size()) - 1);
        }
      if (windows.empty()) throw ValidationError("no training windows in scope");

      auto net = egd::models::Network::build(cfg);
      net.init_params();
      egd::models::TrainCurve curve;
      if (net.siamese()) {
        const auto pairs = egd::models::make_training_pairs(normal_idx, err_idx, seed);
        curve = egd::models::train_network_pairs(net, windows, pairs);
      } else {
        curve = egd::models::train_network(net, windows, labels);
      }
      if (!curve.epoch_loss.empty())
        std::cerr << "loss: first=" << curve.epoch_loss.front()
                  << " last=" << curve.epoch_loss.back() << "\n";

      egd::models::CheckpointMeta meta;
      meta.config = cfg;
      meta.stats = stats;
      meta.setup = setup_str;
      meta.scope_task = scope.task ? egd::dataio::task_name(*scope.task) : "";
      meta.scope_gesture =
          scope.gesture_id ? "G" + std::to_string(*scope.gesture_id) : "";
      meta.train_steps = net.train_steps;
      egd::models::save_checkpoint(net, meta, out_path);
      std::cerr << "checkpoint written to " << out_path << "\n";
      return 0;
    }

    if (*evaluate) {
      log_run("evaluate", seed, "ckpt=" + out_path);
      auto ckpt = egd::models::load_checkpoint(out_path);
      const auto manifest = egd::dataio::assemble_dataset(data_dir, labels_path);
      const auto scope = scope_from_meta(ckpt.meta);
      egd::preprocess::WindowConfig wcfg;
      wcfg.window_length = ckpt.meta.config.input_length;

      const auto scoped = collect_scope(manifest, scope, ckpt.meta.stats, wcfg);
      if (!dump_windows_path.empty()) {
        std::vector<egd::preprocess::FeatureWindow> all;
        for (const auto& inst : scoped.instances)
          for (const auto& w : inst.windows) all.push_back(w);
        egd::preprocess::write_windows_csv(dump_windows_path, all);
      }

      egd::Batch ref_embeddings;
      if (ckpt.net.siamese()) {
        egd::Batch refs;
        if (!ref_data_dir.empty()) {
          const auto ref_manifest = egd::dataio::assemble_dataset(
              ref_data_dir, ref_labels_path.empty() ? labels_path : ref_labels_path);
          refs = collect_scope(ref_manifest, scope, ckpt.meta.stats, wcfg).normal_windows;
        } else {
          refs = scoped.normal_windows;
        }
        const long cap = ref_cap != -1 ? ref_cap : ckpt.meta.config.ref_cap;
        const auto keep = egd::models::cap_reference_indices(refs.size(), cap,
                                                             egd::hash_mix(seed, 0x2EF));
        egd::Batch capped;
        for (int i : keep) capped.push_back(refs[i]);
        if (capped.empty()) throw ValidationError("empty Siamese reference set");
        ref_embeddings = ckpt.net.encode(capped);
      }

      egd::eval::MetricsReport report;
      report.setup = ckpt.meta.setup;
      report.model = egd::models::architecture_name(ckpt.meta.config.arch);
      report.seed = seed;
      egd::eval::FoldScopeResult cell;
      cell.scope = scope;
      cell.fold = 0;
      cell.n_test_instances = static_cast<int>(scoped.instances.size());
      for (const auto& inst : scoped.instances) {
        int votes = 0;
        for (const auto& w : inst.windows) {
          const auto r = ckpt.net.siamese()
                             ? egd::models::siamese_vote(ckpt.net, w.data, ref_embeddings)
                             : egd::models::predict_window(ckpt.net, w.data);
          if (r.erroneous) ++votes;
        }
        const bool erroneous =
            egd::models::majority_erroneous(votes, static_cast<int>(inst.windows.size()));
        auto& c = cell.per_gesture[inst.gesture_id];
        if (inst.label == 1 && erroneous) ++c.tp;
        else if (inst.label == 0 && erroneous) ++c.fp;
        else if (inst.label == 1 && !erroneous) ++c.fn;
        else ++c.tn;
      }
      report.cells.push_back(std::move(cell));

      const std::string csv = report.to_csv();
      if (!summary_path.empty())
        write_file(summary_path, csv);
      else
        std::cout << csv;
      std::cerr << "micro F1: " << report.pooled_micro_f1() << "\n";
      return 0;
    }

    if (*loso) {
      const auto setup = egd::eval::parse_setup(setup_str);
      if (!setup) throw ValidationError("unknown setup '" + setup_str + "'");
      auto cfg = resolve_model_config(model, config_json, seed);
      log_run("loso", seed,
              "setup=" + setup_str + " config=" + egd::models::config_to_json(cfg));

      const auto manifest = egd::dataio::assemble_dataset(data_dir, labels_path);
      egd::eval::LosoOptions opts;
      opts.jobs = jobs;
      opts.collect_predictions = predictions;

      egd::eval::MetricsReport report;
      if (tune) {
        // proper nested CV: tune on each fold's training repetitions
        const auto folds = egd::dataio::split_loso_folds(manifest);
        for (const auto& fold : folds) {
          std::vector<int> train_reps;
          for (int r = 1; r <= 5; ++r)
            if (r != fold.held_out_repetition) train_reps.push_back(r);
          const auto best = egd::eval::nested_tune(manifest, train_reps, *setup, cfg,
                                                   egd::eval::TuningGrid{}, seed, opts);
          std::cerr << "fold " << fold.held_out_repetition
                    << " tuned: " << egd::models::config_to_json(best) << "\n";
          egd::eval::LosoOptions fold_opts = opts;
          fold_opts.only_repetition = fold.held_out_repetition;
          auto fold_report = egd::eval::run_loso(manifest, *setup, best, seed, fold_opts);
          for (auto& c : fold_report.cells) report.cells.push_back(std::move(c));
          for (auto& w : fold_report.warnings) report.warnings.push_back(std::move(w));
          report.setup = fold_report.setup;
          report.model = fold_report.model;
          report.seed = seed;
        }
      } else {
        report = egd::eval::run_loso(manifest, *setup, cfg, seed, opts);
      }

      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
      double fm = 0, fs = 0;
      report.fold_micro_f1(&fm, &fs);
      std::cerr << "micro F1 (pooled): " << report.pooled_micro_f1()
                << "  per-fold mean: " << fm << " +- " << fs << "\n";

      if (!out_path.empty()) {
        write_file(std::filesystem::path(out_path) / "metrics.csv", report.to_csv());
        if (predictions)
          write_file(std::filesystem::path(out_path) / "predictions.csv",
                     report.predictions_csv());
        nlohmann::ordered_json run;
        run["tool_version"] = kToolVersion;
        run["seed"] = seed;
        run["setup"] = setup_str;
        run["model"] = model;
        run["config"] = nlohmann::ordered_json::parse(egd::models::config_to_json(cfg));
        run["tuned"] = tune;
        write_file(std::filesystem::path(out_path) / "run.json", run.dump(2) + "\n");
        std::cerr << "metrics written to " << out_path << "\n";
      } else {
        std::cout << report.to_csv();
      }
      return 0;
    }

    if (*kld) {
      log_run("kld", seed, "");
      const auto manifest = egd::dataio::assemble_dataset(data_dir, labels_path);
      const auto matrix = egd::eval::kld_matrix(manifest, bins);
      for (const auto& e : matrix.excluded) std::cerr << "excluded: " << e << "\n";
      if (!out_path.empty())
        write_file(out_path, matrix.to_csv());
      else
        std::cout << matrix.to_csv();
      return 0;
    }

    if (*bench) {
      log_run("bench", seed, "ckpt=" + out_path);
      auto ckpt = egd::models::load_checkpoint(out_path);
      const auto manifest = egd::dataio::assemble_dataset(data_dir, labels_path);
      const auto scope = scope_from_meta(ckpt.meta);
      egd::preprocess::WindowConfig wcfg;
      const auto scoped = collect_scope(manifest, scope, ckpt.meta.stats, wcfg);

      egd::Batch windows;
      for (const auto& inst : scoped.instances)
        for (const auto& w : inst.windows) windows.push_back(w.data);

      const long cap = ref_cap != -1 ? ref_cap : ckpt.meta.config.ref_cap;
      const auto keep = egd::models::cap_reference_indices(
          scoped.normal_windows.size(), cap, egd::hash_mix(seed, 0x2EF));
      egd::Batch refs;
      for (int i : keep) refs.push_back(scoped.normal_windows[i]);

      const auto rep = egd::eval::latency_bench(ckpt.net, windows, refs, reps);
      const std::string csv =
          egd::eval::LatencyReport::csv_header() + "\n" + rep.to_csv_row() + "\n";
      if (!summary_path.empty())
        write_file(summary_path, csv);
      else
        std::cout << csv;
      return 0;
    }

    if (*monitor) {
      log_run("monitor", seed, "trial=" + trial_id + " rate=" + std::to_string(rate));
      const auto manifest = egd::dataio::assemble_dataset(data_dir, labels_path);
      const egd::dataio::TrialRecord* trial = nullptr;
      for (const auto& t : manifest.trials)
        if (t.trial_id == trial_id) trial = &t;
      if (!trial) throw ValidationError("trial '" + trial_id + "' not in dataset");

      egd::preprocess::WindowConfig wcfg;
      std::vector<egd::monitor::DetectorEntry> detectors;
      for (const auto& p : ckpt_paths)
        detectors.push_back(egd::monitor::make_detector(egd::models::load_checkpoint(p),
                                                        manifest, trial_id, wcfg, ref_cap,
                                                        seed));

      std::ofstream events_file;
      std::ostream* events_out = &std::cout;
      if (!out_path.empty()) {
        events_file.open(out_path, std::ios::trunc);
        if (!events_file) throw ValidationError("cannot write " + out_path);
        events_out = &events_file;
      }

      egd::monitor::MonitorOptions opts;
      opts.rate = rate;
      opts.window = wcfg;
      const auto summary = egd::monitor::run_monitor(
          *trial, detectors, opts, [&](const egd::monitor::DetectionEvent& ev) {
            nlohmann::ordered_json j;
            j["frame"] = ev.emit_frame;
            j["gesture"] = "G" + std::to_string(ev.gesture_id);
            j["gesture_index"] = ev.gesture_index;
            j["offset"] = ev.offset;
            j["monitored"] = ev.monitored;
            j["verdict"] = !ev.monitored ? "unmonitored"
                                         : (ev.erroneous ? "erroneous" : "normal");
            j["score"] = ev.score;
            j["latency_ms"] = ev.latency_ms;
            *events_out << j.dump() << "\n";
          });

      const std::string csv = summary.to_csv(trial_id);
      if (!summary_path.empty())
        write_file(summary_path, csv);
      else
        std::cerr << csv;
      return summary.realtime_violation ? 2 : 0;
    }

    if (*gradcheck) {
      log_run("gradcheck", seed, "instances=" + std::to_string(gc_instances));
      const auto cases = egd::models::gradient_check_suite(gc_instances, seed);
      const std::string report = egd::models::gradcheck_report(cases);
      if (!out_path.empty())
        write_file(out_path, report);
      else
        std::cout << report;
      bool ok = true;
      for (const auto& c : cases) ok = ok && c.pass();
      std::cerr << (ok ? "gradcheck: PASS" : "gradcheck: FAIL") << "\n";
      return ok ? 0 : 2;
    }
  } catch (const egd::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
