#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "egd/layers.hpp"
#include "egd/preprocess.hpp"

namespace egd::models {

enum class Architecture { CNN, LSTM, SiameseCNN, SiameseLSTM };

bool is_siamese(Architecture a);
bool is_lstm_family(Architecture a);
std::string architecture_name(Architecture a);  // "cnn", "siamese-lstm", ...
std::optional<Architecture> parse_architecture(const std::string& name);

struct ModelConfig {
  Architecture arch = Architecture::CNN;
  int input_channels = preprocess::kNumChannels;
  int input_length = 30;

  // conv encoder
  int conv1_filters = 64;
  int conv2_filters = 32;
  int conv_kernel = 3;
  int pool_size = 2;
  double dropout = 0.2;

  // lstm encoder
  int lstm_hidden = 32;
  int lstm_layers = 3;

  std::array<int, 3> fc = {128, 64, 32};

  double lr = 1e-3;
  int batch_size = 32;
  int epochs = 100;
  uint64_t seed = 0;
  long ref_cap = -1;  // Siamese vote reference cap; -1 = unlimited

  void validate() const;

  // Siamese epochs default lower: one pair-epoch covers the full
  // normal x erroneous cross-pair set, many times the single-net epoch size
  static ModelConfig defaults_for(Architecture arch);
};

// apply a JSON object of overrides ({"lr":0.01,"epochs":50,...}); unknown
// keys are a ValidationError
void apply_config_overrides(ModelConfig& cfg, const std::string& json_text);
std::string config_to_json(const ModelConfig& cfg);

// Twin-encoder pair with the paper's label semantics: 0 = both normal,
// 1 = exactly one erroneous. Indices address a window array owned elsewhere.
struct SiamesePair {
  int a = 0, b = 0;
  int label = 0;
};

// All normal x erroneous cross pairs (label 1) plus an equal count of
// normal/normal pairs sampled uniformly with replacement from distinct
// unordered normal pairs (label 0). Throws ValidationError if fewer than
// two normal or one erroneous window is available.
std::vector<SiamesePair> make_training_pairs(const std::vector<int>& normal_indices,
                                             const std::vector<int>& erroneous_indices,
                                             uint64_t seed);

class Network {
 public:
  static Network build(const ModelConfig& cfg);

  ModelConfig config;
  uint64_t train_steps = 0;

  bool siamese() const { return is_siamese(config.arch); }
  int encoder_output_size() const { return encoder_out_; }

  std::vector<ndgrad::Param*> trainable_params();
  std::vector<ndgrad::Param*> state_tensors();  // trainable + buffers, declared order
  void zero_grads();
  void init_params();        // seeded from config.seed
  void snap_params_to_f32();  // round every state tensor through float32

  // single networks: batch of 26x30 windows -> probabilities
  std::vector<double> forward(const Batch& windows, const ndgrad::PassCtx& ctx);
  void backward(const std::vector<double>& dprob);

  // Siamese: both sides are stacked into one encoder batch, so the pass is
  // symmetric in (a, b) by construction
  std::vector<double> forward_pairs(const Batch& a, const Batch& b,
                                    const ndgrad::PassCtx& ctx);
  void backward_pairs(const std::vector<double>& dprob);

  // eval-mode helpers
  std::vector<double> predict(const Batch& windows);
  Batch encode(const Batch& windows);                     // Siamese encoder output
  std::vector<double> head_on_diffs(const Batch& diffs);  // |e_a - e_b| -> prob
  void mark_batchnorm_ready();

  // nonsmooth decisions of the last forward (gradcheck kink detection)
  uint64_t activation_signature() const;

  std::vector<std::unique_ptr<ndgrad::Layer>> body;  // full stack, or encoder
  std::vector<std::unique_ptr<ndgrad::Layer>> head;  // Siamese similarity head

 private:
  int encoder_out_ = 0;
  std::vector<Batch> acts_;       // body activations
  std::vector<Batch> head_acts_;  // head activations
  Batch diff_sign_;               // sign(e_a - e_b) cache
  int pair_count_ = 0;

  void body_forward(const Batch& in, const ndgrad::PassCtx& ctx);
  Batch body_backward(const Batch& dout);
  void head_forward(const Batch& in, const ndgrad::PassCtx& ctx);
  Batch head_backward(const Batch& dout);
};

struct TrainCurve {
  std::vector<double> epoch_loss;  // mean BCE per epoch
};

// mini-batch training, seeded shuffling, Adam; snaps parameters to float32
// on completion so checkpoint round-trips are bit-exact
TrainCurve train_network(Network& net, const Batch& windows,
                         const std::vector<double>& labels);
TrainCurve train_network_pairs(Network& net, const Batch& windows,
                               const std::vector<SiamesePair>& pairs);

struct DetectionResult {
  double score = 0.0;  // probability (single) or vote fraction (Siamese)
  bool erroneous = false;
  int votes_erroneous = 0;
  int votes_total = 0;
};

// ties count as erroneous
inline bool majority_erroneous(int erroneous_votes, int total) {
  return 2 * erroneous_votes >= total;
}

DetectionResult predict_window(Network& net, const Tensor& window);

// majority vote of per-reference indicators (pair output >= 0.5 means the
// window differs from that normal reference)
DetectionResult siamese_vote(Network& net, const Tensor& window,
                             const Batch& reference_embeddings);

// seeded subsample used to honor ModelConfig::ref_cap
std::vector<int> cap_reference_indices(size_t available, long cap, uint64_t seed);

// ---- checkpoints ----

struct CheckpointMeta {
  ModelConfig config;
  preprocess::ChannelStats stats;
  std::string setup;          // "gsts" | "gst" | "gts" | "gtt"
  std::string scope_task;     // "" when pooled
  std::string scope_gesture;  // "" when pooled
  uint64_t train_steps = 0;
};

inline constexpr char kCheckpointMagic[4] = {'E', 'G', 'D', '1'};
inline constexpr uint32_t kCheckpointVersion = 1;
inline constexpr const char* kToolVersion = "egd 1.0.0";

void save_checkpoint(Network& net, const CheckpointMeta& meta,
                     const std::filesystem::path& path);

struct LoadedCheckpoint {
  Network net;
  CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace egd::models
