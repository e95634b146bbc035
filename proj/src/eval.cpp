#include "egd/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>

#include "egd/rng.hpp"
#include "egd/synthetic.hpp"

namespace egd::eval {

using dataio::DatasetManifest;
using dataio::TaskClass;
using preprocess::FeatureWindow;

std::string setup_name(TrainingSetup s) {
  switch (s) {
    case TrainingSetup::GSTS: return "gsts";
    case TrainingSetup::GSTstar: return "gst";
    case TrainingSetup::GstarTS: return "gts";
    case TrainingSetup::GstarTstar: return "gtt";
  }
  return "?";
}

std::optional<TrainingSetup> parse_setup(const std::string& name) {
  if (name == "gsts") return TrainingSetup::GSTS;
  if (name == "gst") return TrainingSetup::GSTstar;
  if (name == "gts") return TrainingSetup::GstarTS;
  if (name == "gtt") return TrainingSetup::GstarTstar;
  return std::nullopt;
}

std::string Scope::key() const {
  std::string t = task ? dataio::task_name(*task) : "*";
  std::string g = gesture_id ? "G" + std::to_string(*gesture_id) : "*";
  return t + "/" + g;
}

std::vector<Scope> setup_scopes(TrainingSetup setup, const DatasetManifest& m) {
  std::set<TaskClass> tasks;
  std::set<int> gestures;
  for (const auto& t : m.trials)
    for (const auto& gi : t.gesture_instances)
      if (gi.modeled()) {
        tasks.insert(t.task);
        gestures.insert(gi.gesture_id);
      }

  std::vector<Scope> scopes;
  switch (setup) {
    case TrainingSetup::GSTS:
      for (TaskClass t : tasks)
        for (int g : gestures) scopes.push_back({t, g});
      break;
    case TrainingSetup::GSTstar:
      for (int g : gestures) scopes.push_back({std::nullopt, g});
      break;
    case TrainingSetup::GstarTS:
      for (TaskClass t : tasks) scopes.push_back({t, std::nullopt});
      break;
    case TrainingSetup::GstarTstar:
      scopes.push_back({std::nullopt, std::nullopt});
      break;
  }
  return scopes;
}

double f1_score(const ConfusionCounts& c, bool* degenerate) {
  const long denom = 2 * c.tp + c.fp + c.fn;
  if (degenerate) *degenerate = denom == 0;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double micro_f1(const std::vector<ConfusionCounts>& counts, bool* degenerate) {
  ConfusionCounts pooled;
  for (const auto& c : counts) pooled += c;
  return f1_score(pooled, degenerate);
}

// ---- fold data assembly ----

namespace {

struct InstanceRef {
  int trial_index;
  size_t instance_index;
};

std::vector<InstanceRef> scope_instances(const DatasetManifest& m,
                                         const std::vector<int>& trial_indices,
                                         const Scope& scope) {
  std::vector<InstanceRef> refs;
  for (int ti : trial_indices) {
    const auto& trial = m.trials[ti];
    for (size_t gi = 0; gi < trial.gesture_instances.size(); ++gi) {
      const auto& inst = trial.gesture_instances[gi];
      if (!inst.modeled()) continue;
      if (!scope.contains(trial.task, inst.gesture_id)) continue;
      if (inst.error_label < 0) continue;
      refs.push_back({ti, gi});
    }
  }
  return refs;
}

ScopedFoldData build_scoped_fold(const DatasetManifest& m, const Scope& scope, int fold,
                                 const std::vector<int>& train_trials,
                                 const std::vector<int>& test_trials,
                                 const preprocess::WindowConfig& wcfg,
                                 std::vector<std::string>* warnings) {
  ScopedFoldData data;
  data.scope = scope;
  data.fold = fold;

  const auto train_refs = scope_instances(m, train_trials, scope);
  const auto test_refs = scope_instances(m, test_trials, scope);

  preprocess::StatsAccumulator acc;
  for (const auto& r : train_refs) {
    const auto& trial = m.trials[r.trial_index];
    acc.add(preprocess::downsample(
        preprocess::instance_matrix(trial, trial.gesture_instances[r.instance_index]),
        wcfg.downsample_factor));
  }
  if (acc.count() == 0) return data;  // caller skips on an empty training set
  data.stats = acc.finalize("train fold " + std::to_string(fold) + " " + scope.key());

  preprocess::WindowingReport report;
  for (const auto& r : train_refs) {
    const auto& trial = m.trials[r.trial_index];
    const auto& inst = trial.gesture_instances[r.instance_index];
    auto ws = preprocess::instance_windows(trial, r.instance_index, data.stats, wcfg,
                                           &report);
    if (ws.empty()) continue;
    ++data.train_instances;
    if (inst.error_label == 1) ++data.train_erroneous_instances;
    for (auto& w : ws) data.train_windows.push_back(std::move(w));
  }

  for (const auto& r : test_refs) {
    const auto& trial = m.trials[r.trial_index];
    const auto& inst = trial.gesture_instances[r.instance_index];
    InstanceSample s;
    s.trial_id = trial.trial_id;
    s.gesture_index = static_cast<int>(r.instance_index + 1);
    s.task = trial.task;
    s.gesture_id = inst.gesture_id;
    s.label = inst.error_label;
    s.windows =
        preprocess::instance_windows(trial, r.instance_index, data.stats, wcfg, &report);
    if (s.windows.empty()) continue;  // below minimum length, recorded in report
    data.test_instances.push_back(std::move(s));
  }
  if (warnings)
    for (const auto& skip : report.skipped) warnings->push_back("windowing skip: " + skip);
  return data;
}

}  // namespace

// ---- network runner ----

ModelRunner make_network_runner(const models::ModelConfig& config) {
  return [config](const ScopedFoldData& data, uint64_t seed) {
    models::ModelConfig cfg = config;
    cfg.seed = seed;
    models::Network net = models::Network::build(cfg);
    net.init_params();

    Batch windows;
    std::vector<double> labels;
    std::vector<int> normal_idx, err_idx;
    for (size_t i = 0; i < data.train_windows.size(); ++i) {
      windows.push_back(data.train_windows[i].data);
      labels.push_back(data.train_windows[i].label);
      (data.train_windows[i].label == 1 ? err_idx : normal_idx)
          .push_back(static_cast<int>(i));
    }

    Batch ref_embeddings;
    if (net.siamese()) {
      const auto pairs = models::make_training_pairs(normal_idx, err_idx, seed);
      models::train_network_pairs(net, windows, pairs);

      Batch refs;
      const auto keep = models::cap_reference_indices(normal_idx.size(), cfg.ref_cap,
                                                      hash_mix(seed, 0x2EFULL));
      for (int i : keep) refs.push_back(windows[normal_idx[i]]);
      ref_embeddings = net.encode(refs);
    } else {
      models::train_network(net, windows, labels);
    }

    std::vector<InstancePrediction> preds;
    preds.reserve(data.test_instances.size());
    for (const auto& inst : data.test_instances) {
      InstancePrediction p;
      const auto t0 = std::chrono::steady_clock::now();
      int votes = 0;
      if (net.siamese()) {
        for (const auto& w : inst.windows) {
          const auto r = models::siamese_vote(net, w.data, ref_embeddings);
          p.window_scores.push_back(r.score);
          p.window_verdicts.push_back(r.erroneous);
          if (r.erroneous) ++votes;
        }
      } else {
        Batch xs;
        for (const auto& w : inst.windows) xs.push_back(w.data);
        const auto scores = net.predict(xs);
        for (double s : scores) {
          p.window_scores.push_back(s);
          p.window_verdicts.push_back(s >= 0.5);
          if (s >= 0.5) ++votes;
        }
      }
      p.erroneous =
          models::majority_erroneous(votes, static_cast<int>(inst.windows.size()));
      p.infer_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      preds.push_back(std::move(p));
    }
    return preds;
  };
}

// ---- LOSO harness ----

MetricsReport run_loso(const DatasetManifest& manifest, TrainingSetup setup,
                       const ModelRunner& runner, uint64_t seed, const LosoOptions& opts) {
  MetricsReport report;
  report.setup = setup_name(setup);
  report.seed = seed;

  const auto folds = dataio::split_loso_folds(manifest);
  const auto scopes = setup_scopes(setup, manifest);
  if (scopes.empty())
    throw ValidationError("loso: no modeled gesture instances in dataset");

  struct Unit {
    int fold_idx;
    int scope_idx;
  };
  std::vector<Unit> units;
  for (int f = 0; f < static_cast<int>(folds.size()); ++f) {
    if (opts.only_repetition && folds[f].held_out_repetition != *opts.only_repetition)
      continue;
    for (int s = 0; s < static_cast<int>(scopes.size()); ++s) units.push_back({f, s});
  }

  std::vector<FoldScopeResult> results(units.size());
  std::vector<std::vector<std::string>> unit_warnings(units.size());
  std::vector<char> unit_used(units.size(), 0);

  const int jobs = std::max(1, opts.jobs);
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs) if (jobs > 1)
  for (size_t u = 0; u < units.size(); ++u) {
    const auto& fold = folds[units[u].fold_idx];
    const Scope& scope = scopes[units[u].scope_idx];
    auto& warn = unit_warnings[u];

    ScopedFoldData data =
        build_scoped_fold(manifest, scope, fold.held_out_repetition, fold.train_trials,
                          fold.test_trials, opts.window, &warn);

    int train_norm = 0, train_err = 0;
    for (const auto& w : data.train_windows) (w.label == 1 ? train_err : train_norm)++;
    if (train_err == 0 || train_norm == 0) {
      warn.push_back("scope " + scope.key() + " fold " +
                     std::to_string(fold.held_out_repetition) +
                     " skipped: training windows all one class (" +
                     std::to_string(train_norm) + " normal, " + std::to_string(train_err) +
                     " erroneous)");
      continue;
    }
    if (data.test_instances.empty()) {
      warn.push_back("scope " + scope.key() + " fold " +
                     std::to_string(fold.held_out_repetition) +
                     " skipped: no test instances in scope");
      continue;
    }

    const uint64_t unit_seed =
        hash_mix(seed, static_cast<uint64_t>(fold.held_out_repetition),
                 static_cast<uint64_t>(units[u].scope_idx));
    const auto preds = runner(data, unit_seed);
    if (preds.size() != data.test_instances.size())
      throw ShapeError("runner returned wrong prediction count");

    FoldScopeResult& cell = results[u];
    cell.scope = scope;
    cell.fold = fold.held_out_repetition;
    cell.n_train_windows = static_cast<int>(data.train_windows.size());
    cell.error_pct_train =
        data.train_instances > 0
            ? 100.0 * data.train_erroneous_instances / data.train_instances
            : 0.0;
    cell.n_test_instances = static_cast<int>(data.test_instances.size());

    double total_sec = 0.0;
    long total_windows = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
      const auto& inst = data.test_instances[i];
      const auto& p = preds[i];
      auto& counts = cell.per_gesture[inst.gesture_id];
      if (inst.label == 1 && p.erroneous) ++counts.tp;
      else if (inst.label == 0 && p.erroneous) ++counts.fp;
      else if (inst.label == 1 && !p.erroneous) ++counts.fn;
      else ++counts.tn;
      total_sec += p.infer_seconds;
      total_windows += static_cast<long>(p.window_scores.size());

      if (opts.collect_predictions) {
        for (size_t wi = 0; wi < inst.windows.size(); ++wi) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.9g", p.window_scores[wi]);
          cell.prediction_rows.push_back(
              std::to_string(cell.fold) + "," + dataio::task_name(inst.task) + "," +
              inst.trial_id + ",G" + std::to_string(inst.gesture_id) + "," +
              std::to_string(inst.gesture_index) + "," +
              std::to_string(inst.windows[wi].source.offset) + "," + buf + "," +
              (p.window_verdicts[wi] ? "1" : "0") + "," + (p.erroneous ? "1" : "0") + "," +
              std::to_string(inst.label));
        }
      }
    }
    cell.mean_infer_ms = total_windows > 0 ? 1000.0 * total_sec / total_windows : 0.0;
    unit_used[u] = 1;
  }

  for (size_t u = 0; u < units.size(); ++u) {
    for (auto& w : unit_warnings[u]) report.warnings.push_back(std::move(w));
    if (unit_used[u]) report.cells.push_back(std::move(results[u]));
  }
  return report;
}

MetricsReport run_loso(const DatasetManifest& manifest, TrainingSetup setup,
                       const models::ModelConfig& config, uint64_t seed,
                       const LosoOptions& opts) {
  MetricsReport r = run_loso(manifest, setup, make_network_runner(config), seed, opts);
  r.model = architecture_name(config.arch);
  return r;
}

std::map<int, ConfusionCounts> MetricsReport::pooled_per_gesture() const {
  std::map<int, ConfusionCounts> pooled;
  for (const auto& cell : cells)
    for (const auto& [g, c] : cell.per_gesture) pooled[g] += c;
  return pooled;
}

double MetricsReport::pooled_micro_f1() const {
  ConfusionCounts pooled;
  for (const auto& cell : cells)
    for (const auto& [g, c] : cell.per_gesture) pooled += c;
  return f1_score(pooled);
}

void MetricsReport::fold_micro_f1(double* mean, double* stddev) const {
  std::map<int, ConfusionCounts> per_fold;
  for (const auto& cell : cells)
    for (const auto& [g, c] : cell.per_gesture) per_fold[cell.fold] += c;
  std::vector<double> f1s;
  for (const auto& [fold, c] : per_fold) f1s.push_back(f1_score(c));
  if (f1s.empty()) {
    *mean = 0.0;
    *stddev = 0.0;
    return;
  }
  double s = 0.0;
  for (double v : f1s) s += v;
  *mean = s / f1s.size();
  double sq = 0.0;
  for (double v : f1s) sq += (v - *mean) * (v - *mean);
  *stddev = f1s.size() > 1 ? std::sqrt(sq / (f1s.size() - 1)) : 0.0;
}

namespace {
std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace

std::string MetricsReport::to_csv() const {
  std::string csv =
      "row_type,setup,model,seed,task,gesture,fold,n_train_windows,train_error_pct,"
      "n_test_instances,tp,fp,fn,tn,f1,f1_mean_folds,f1_std_folds,degenerate\n";

  auto row = [&](const std::string& type, const std::string& task, const std::string& g,
                 const std::string& fold, const std::string& ntr, const std::string& pct,
                 const std::string& nte, const ConfusionCounts& c, double f1_val,
                 const std::string& f1m, const std::string& f1s, bool degenerate) {
    csv += type + "," + setup + "," + model + "," + std::to_string(seed) + "," + task +
           "," + g + "," + fold + "," + ntr + "," + pct + "," + nte + "," +
           std::to_string(c.tp) + "," + std::to_string(c.fp) + "," + std::to_string(c.fn) +
           "," + std::to_string(c.tn) + "," + fmt6(f1_val) + "," + f1m + "," + f1s + "," +
           (degenerate ? "1" : "0") + "\n";
  };

  for (const auto& cell : cells) {
    ConfusionCounts sum;
    for (const auto& [g, c] : cell.per_gesture) sum += c;
    bool degen = false;
    const double f1 = f1_score(sum, &degen);
    row("cell", cell.scope.task ? dataio::task_name(*cell.scope.task) : "*",
        cell.scope.gesture_id ? "G" + std::to_string(*cell.scope.gesture_id) : "*",
        std::to_string(cell.fold), std::to_string(cell.n_train_windows),
        fmt6(cell.error_pct_train), std::to_string(cell.n_test_instances), sum, f1, "",
        "", degen);
  }

  // per-gesture summaries pooled over folds and scopes
  for (const auto& [g, pooled] : pooled_per_gesture()) {
    std::vector<double> fold_f1;
    std::map<int, ConfusionCounts> by_fold;
    for (const auto& cell : cells) {
      auto it = cell.per_gesture.find(g);
      if (it != cell.per_gesture.end()) by_fold[cell.fold] += it->second;
    }
    for (const auto& [f, c] : by_fold) fold_f1.push_back(f1_score(c));
    double m = 0.0, sd = 0.0;
    for (double v : fold_f1) m += v;
    m = fold_f1.empty() ? 0.0 : m / fold_f1.size();
    for (double v : fold_f1) sd += (v - m) * (v - m);
    sd = fold_f1.size() > 1 ? std::sqrt(sd / (fold_f1.size() - 1)) : 0.0;
    bool degen = false;
    const double f1 = f1_score(pooled, &degen);
    row("gesture", "*", "G" + std::to_string(g), "*", "", "", "", pooled, f1, fmt6(m),
        fmt6(sd), degen);
  }

  ConfusionCounts pooled;
  for (const auto& cell : cells)
    for (const auto& [g, c] : cell.per_gesture) pooled += c;
  double fm = 0.0, fs = 0.0;
  fold_micro_f1(&fm, &fs);
  bool degen = false;
  const double micro = f1_score(pooled, &degen);
  row("micro", "*", "*", "*", "", "", "", pooled, micro, fmt6(fm), fmt6(fs), degen);
  return csv;
}

std::string MetricsReport::predictions_csv() const {
  std::string csv =
      "setup,model,seed,fold,task,trial,gesture,gesture_index,window_offset,"
      "window_score,window_verdict,instance_verdict,label\n";
  for (const auto& cell : cells)
    for (const auto& r : cell.prediction_rows)
      csv += setup + "," + model + "," + std::to_string(seed) + "," + r + "\n";
  return csv;
}

// ---- nested tuning ----

models::ModelConfig nested_tune(const DatasetManifest& manifest,
                                const std::vector<int>& train_repetitions,
                                TrainingSetup setup, const models::ModelConfig& base,
                                const TuningGrid& grid, uint64_t seed,
                                const LosoOptions& opts) {
  if (grid.lrs.empty() || grid.batch_sizes.empty() || grid.epochs.empty())
    throw ValidationError("nested tune: empty grid");
  if (train_repetitions.size() < 2)
    throw ValidationError("nested tune: need at least 2 training repetitions");

  const auto scopes = setup_scopes(setup, manifest);

  struct Candidate {
    double lr;
    int batch;
    int epochs;
  };
  std::vector<Candidate> candidates;
  for (double lr : grid.lrs)
    for (int b : grid.batch_sizes)
      for (int e : grid.epochs) candidates.push_back({lr, b, e});

  double best_score = -2.0;
  Candidate best = candidates.front();

  for (size_t ci = 0; ci < candidates.size(); ++ci) {
    models::ModelConfig cfg = base;
    cfg.lr = candidates[ci].lr;
    cfg.batch_size = candidates[ci].batch;
    cfg.epochs = candidates[ci].epochs;
    const auto runner = make_network_runner(cfg);

    ConfusionCounts pooled;
    bool diverged = false;
    for (size_t vi = 0; vi < train_repetitions.size() && !diverged; ++vi) {
      const int val_rep = train_repetitions[vi];
      std::vector<int> inner_train, inner_val;
      for (size_t t = 0; t < manifest.trials.size(); ++t) {
        const int rep = manifest.trials[t].repetition_index;
        if (std::find(train_repetitions.begin(), train_repetitions.end(), rep) ==
            train_repetitions.end())
          continue;
        (rep == val_rep ? inner_val : inner_train).push_back(static_cast<int>(t));
      }

      for (size_t si = 0; si < scopes.size() && !diverged; ++si) {
        ScopedFoldData data = build_scoped_fold(manifest, scopes[si], val_rep, inner_train,
                                                inner_val, opts.window, nullptr);
        int train_norm = 0, train_err = 0;
        for (const auto& w : data.train_windows) (w.label == 1 ? train_err : train_norm)++;
        if (train_err == 0 || train_norm == 0 || data.test_instances.empty()) continue;
        try {
          const auto preds =
              runner(data, hash_mix(seed, ci, static_cast<uint64_t>(val_rep), si));
          for (size_t i = 0; i < preds.size(); ++i) {
            const int label = data.test_instances[i].label;
            const bool e = preds[i].erroneous;
            if (label == 1 && e) ++pooled.tp;
            else if (label == 0 && e) ++pooled.fp;
            else if (label == 1 && !e) ++pooled.fn;
            else ++pooled.tn;
          }
        } catch (const TrainingDiverged&) {
          diverged = true;
        }
      }
    }

    const double score = diverged ? -1.0 : f1_score(pooled);
    if (score > best_score) {  // strict: ties keep earlier grid order
      best_score = score;
      best = candidates[ci];
    }
  }

  models::ModelConfig out = base;
  out.lr = best.lr;
  out.batch_size = best.batch;
  out.epochs = best.epochs;
  return out;
}

// ---- KL divergence ----

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  double d = 0.0;
  for (size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) d += p[i] * std::log(p[i] / q[i]);
  return d;
}

KldMatrix kld_matrix(const dataio::DatasetManifest& manifest, int bins, int min_samples) {
  if (bins < 2) throw ValidationError("kld: need at least 2 bins");
  constexpr double kSmooth = 1e-10;

  // raw (pre-normalization, pre-downsampling) channel values of normal gestures
  std::map<std::pair<TaskClass, int>, std::vector<std::vector<double>>> samples;
  for (const auto& trial : manifest.trials)
    for (const auto& gi : trial.gesture_instances) {
      if (!gi.in_library() || gi.error_label != 0) continue;
      const Tensor m = preprocess::instance_matrix(trial, gi);
      auto& chans = samples[{trial.task, gi.gesture_id}];
      chans.resize(preprocess::kNumChannels);
      for (int c = 0; c < preprocess::kNumChannels; ++c)
        for (int t = 0; t < m.cols(); ++t) chans[c].push_back(m(c, t));
    }

  KldMatrix out;
  for (auto& [cls, chans] : samples) {
    if (static_cast<int>(chans[0].size()) < min_samples) {
      out.excluded.push_back(dataio::task_name(cls.first) + "/G" +
                             std::to_string(cls.second) + ": only " +
                             std::to_string(chans[0].size()) + " samples");
      continue;
    }
    out.classes.push_back(cls);
  }

  const int n = static_cast<int>(out.classes.size());
  out.values = Tensor::mat(std::max(n, 1), std::max(n, 1));

  auto histogram = [&](const std::vector<double>& xs, double lo, double hi) {
    std::vector<double> h(bins, 0.0);
    const double width = hi - lo;
    for (double x : xs) {
      int b = width > 0.0 ? static_cast<int>((x - lo) / width * bins) : 0;
      b = std::clamp(b, 0, bins - 1);
      h[b] += 1.0;
    }
    const double total = static_cast<double>(xs.size()) + kSmooth * bins;
    for (double& v : h) v = (v + kSmooth) / total;
    return h;
  };

  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const auto& a = samples[out.classes[i]];
      const auto& b = samples[out.classes[j]];
      double sum = 0.0;
      for (int c = 0; c < preprocess::kNumChannels; ++c) {
        double lo = a[c][0], hi = a[c][0];
        for (double x : a[c]) lo = std::min(lo, x), hi = std::max(hi, x);
        for (double x : b[c]) lo = std::min(lo, x), hi = std::max(hi, x);
        const auto p = histogram(a[c], lo, hi);
        const auto q = histogram(b[c], lo, hi);
        sum += 0.5 * (kl_divergence(p, q) + kl_divergence(q, p));
      }
      const double v = sum / preprocess::kNumChannels;
      out.values(i, j) = v;
      out.values(j, i) = v;
    }
  return out;
}

std::string KldMatrix::to_csv() const {
  std::string csv = "task_a,gesture_a,task_b,gesture_b,symmetric_kld_nats\n";
  char buf[32];
  for (size_t i = 0; i < classes.size(); ++i)
    for (size_t j = 0; j < classes.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.6f",
                    values(static_cast<int>(i), static_cast<int>(j)));
      csv += dataio::task_name(classes[i].first) + ",G" +
             std::to_string(classes[i].second) + "," +
             dataio::task_name(classes[j].first) + ",G" +
             std::to_string(classes[j].second) + "," + buf + "\n";
    }
  return csv;
}

// ---- latency ----

std::string LatencyReport::csv_header() {
  return "model,scope,reference_count,windows,repetitions,mean_ms,p95_ms,min_ms,max_ms";
}

std::string LatencyReport::to_csv_row() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%s,%d,%d,%d,%.4f,%.4f,%.4f,%.4f", model.c_str(),
                scope.c_str(), reference_count, windows, repetitions, mean_ms, p95_ms,
                min_ms, max_ms);
  return buf;
}

LatencyReport latency_bench(models::Network& net, const Batch& windows,
                            const Batch& reference_windows, int repetitions) {
  LatencyReport rep;
  rep.model = models::architecture_name(net.config.arch);
  rep.windows = static_cast<int>(windows.size());
  rep.repetitions = repetitions;
  rep.reference_count = static_cast<int>(reference_windows.size());
  if (windows.empty() || repetitions <= 0) return rep;

  Batch ref_embeddings;
  if (net.siamese()) {
    if (reference_windows.empty())
      throw ValidationError("latency bench: Siamese network needs reference windows");
    ref_embeddings = net.encode(reference_windows);
  }

  std::vector<double> ms;
  ms.reserve(static_cast<size_t>(repetitions) * windows.size());
  constexpr int kWarmup = 10;
  int iteration = 0;
  for (int r = 0; r < repetitions; ++r)
    for (const Tensor& w : windows) {
      const auto t0 = std::chrono::steady_clock::now();
      if (net.siamese())
        models::siamese_vote(net, w, ref_embeddings);
      else
        net.predict({w});
      const double t =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
              .count();
      if (iteration++ >= kWarmup) ms.push_back(t);
    }
  if (ms.empty()) return rep;

  std::sort(ms.begin(), ms.end());
  double sum = 0.0;
  for (double v : ms) sum += v;
  rep.mean_ms = sum / ms.size();
  rep.min_ms = ms.front();
  rep.max_ms = ms.back();
  const size_t p95_idx =
      std::min(ms.size() - 1, static_cast<size_t>(std::ceil(0.95 * ms.size())) - 1);
  rep.p95_ms = ms[p95_idx];
  return rep;
}

}  // namespace egd::eval
