#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "egd/dataio.hpp"
#include "egd/models.hpp"
#include "egd/preprocess.hpp"

namespace egd::eval {

enum class TrainingSetup { GSTS, GSTstar, GstarTS, GstarTstar };

std::string setup_name(TrainingSetup s);  // "gsts" | "gst" | "gts" | "gtt"
std::optional<TrainingSetup> parse_setup(const std::string& name);

// Scope a model is trained for: GSTS binds (task, gesture), GST* binds
// gesture, G*TS binds task, G*T* binds nothing.
struct Scope {
  std::optional<dataio::TaskClass> task;
  std::optional<int> gesture_id;

  bool contains(dataio::TaskClass t, int g) const {
    return (!task || *task == t) && (!gesture_id || *gesture_id == g);
  }
  std::string key() const;
};

// scopes with at least one modeled-gesture instance in the manifest
std::vector<Scope> setup_scopes(TrainingSetup setup, const dataio::DatasetManifest& m);

struct ConfusionCounts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  long total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

// erroneous is the positive class; all-zero denominator -> 0 with a flag
double f1_score(const ConfusionCounts& c, bool* degenerate = nullptr);
double micro_f1(const std::vector<ConfusionCounts>& counts, bool* degenerate = nullptr);

// one gesture instance prepared for scoring
struct InstanceSample {
  std::string trial_id;
  int gesture_index = 0;
  dataio::TaskClass task = dataio::TaskClass::Suturing;
  int gesture_id = 0;
  int label = 0;
  std::vector<preprocess::FeatureWindow> windows;
};

struct InstancePrediction {
  bool erroneous = false;
  std::vector<double> window_scores;
  std::vector<bool> window_verdicts;
  double infer_seconds = 0.0;
};

// everything a model sees for one (scope, fold)
struct ScopedFoldData {
  Scope scope;
  int fold = 0;  // held-out repetition
  preprocess::ChannelStats stats;
  std::vector<preprocess::FeatureWindow> train_windows;
  std::vector<InstanceSample> test_instances;
  int train_instances = 0;
  int train_erroneous_instances = 0;
};

// A runner trains whatever it wants on the fold data and predicts every test
// instance. Stub runners make the harness testable without training.
using ModelRunner =
    std::function<std::vector<InstancePrediction>(const ScopedFoldData&, uint64_t seed)>;

ModelRunner make_network_runner(const models::ModelConfig& config);

struct FoldScopeResult {
  Scope scope;
  int fold = 0;
  std::map<int, ConfusionCounts> per_gesture;  // gesture id -> counts
  double error_pct_train = 0.0;
  int n_train_windows = 0;
  int n_test_instances = 0;
  double mean_infer_ms = 0.0;
  std::vector<std::string> prediction_rows;  // per-window CSV rows
};

struct MetricsReport {
  std::string setup;
  std::string model;
  uint64_t seed = 0;
  std::vector<FoldScopeResult> cells;
  std::vector<std::string> warnings;

  std::map<int, ConfusionCounts> pooled_per_gesture() const;
  double pooled_micro_f1() const;
  // mean and sample spread of per-fold micro F1
  void fold_micro_f1(double* mean, double* stddev) const;

  std::string to_csv() const;              // one row per scope per fold + summaries
  std::string predictions_csv() const;     // per-window and per-instance rows
};

struct LosoOptions {
  preprocess::WindowConfig window;
  int jobs = 1;
  bool collect_predictions = false;
  std::optional<int> only_repetition;  // restrict to one outer fold
};

MetricsReport run_loso(const dataio::DatasetManifest& manifest, TrainingSetup setup,
                       const ModelRunner& runner, uint64_t seed,
                       const LosoOptions& opts = {});

// convenience: network-backed LOSO
MetricsReport run_loso(const dataio::DatasetManifest& manifest, TrainingSetup setup,
                       const models::ModelConfig& config, uint64_t seed,
                       const LosoOptions& opts = {});

// ---- nested hyperparameter tuning ----

struct TuningGrid {
  std::vector<double> lrs = {1e-2, 1e-3, 1e-4};
  std::vector<int> batch_sizes = {16, 32};
  std::vector<int> epochs = {50, 100};
};

// grid search over the inner LOSO folds of the given training repetitions;
// deterministic tie-break by grid order (lr-major, then batch, then epochs)
models::ModelConfig nested_tune(const dataio::DatasetManifest& manifest,
                                const std::vector<int>& train_repetitions,
                                TrainingSetup setup, const models::ModelConfig& base,
                                const TuningGrid& grid, uint64_t seed,
                                const LosoOptions& opts = {});

// ---- KL divergence between normal-gesture distributions ----

struct KldMatrix {
  std::vector<std::pair<dataio::TaskClass, int>> classes;
  Tensor values;  // symmetric, nats
  std::vector<std::string> excluded;  // classes with too few samples

  std::string to_csv() const;
};

// histogram estimator: shared min-max range, additive smoothing, symmetrised
// 0.5*[D(P||Q) + D(Q||P)], averaged over the 26 raw channels
KldMatrix kld_matrix(const dataio::DatasetManifest& manifest, int bins = 50,
                     int min_samples = 30);

// two pre-normalized histograms -> D(P||Q) in nats
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

// ---- latency ----

struct LatencyReport {
  std::string model;
  std::string scope;
  int reference_count = 0;
  int windows = 0;
  int repetitions = 0;
  double mean_ms = 0.0, p95_ms = 0.0, min_ms = 0.0, max_ms = 0.0;

  std::string to_csv_row() const;
  static std::string csv_header();
};

// wall-clock per-window inference (vote included for Siamese); first 10
// iterations discarded as warmup
LatencyReport latency_bench(models::Network& net, const Batch& windows,
                            const Batch& reference_windows, int repetitions);

}  // namespace egd::eval
