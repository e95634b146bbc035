#include "egd/models.hpp"

#include <cmath>

#include "json.hpp"

namespace egd::models {

using ndgrad::Mode;
using ndgrad::Param;
using ndgrad::PassCtx;

bool is_siamese(Architecture a) {
  return a == Architecture::SiameseCNN || a == Architecture::SiameseLSTM;
}

bool is_lstm_family(Architecture a) {
  return a == Architecture::LSTM || a == Architecture::SiameseLSTM;
}

std::string architecture_name(Architecture a) {
  switch (a) {
    case Architecture::CNN: return "cnn";
    case Architecture::LSTM: return "lstm";
    case Architecture::SiameseCNN: return "siamese-cnn";
    case Architecture::SiameseLSTM: return "siamese-lstm";
  }
  return "?";
}

std::optional<Architecture> parse_architecture(const std::string& name) {
  if (name == "cnn") return Architecture::CNN;
  if (name == "lstm") return Architecture::LSTM;
  if (name == "siamese-cnn") return Architecture::SiameseCNN;
  if (name == "siamese-lstm") return Architecture::SiameseLSTM;
  return std::nullopt;
}

ModelConfig ModelConfig::defaults_for(Architecture arch) {
  ModelConfig c;
  c.arch = arch;
  if (is_siamese(arch)) c.epochs = 25;
  return c;
}

void ModelConfig::validate() const {
  auto positive = [](long v, const char* what) {
    if (v <= 0) throw ValidationError(std::string("config: ") + what + " must be positive");
  };
  positive(input_channels, "input_channels");
  positive(input_length, "input_length");
  positive(conv1_filters, "conv1_filters");
  positive(conv2_filters, "conv2_filters");
  positive(conv_kernel, "conv_kernel");
  positive(pool_size, "pool_size");
  positive(lstm_hidden, "lstm_hidden");
  positive(lstm_layers, "lstm_layers");
  for (int f : fc) positive(f, "fc width");
  if (!(lr > 0.0)) throw ValidationError("config: lr must be positive");
  positive(batch_size, "batch_size");
  if (epochs < 0) throw ValidationError("config: epochs must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ValidationError("config: dropout must be in [0,1)");
}

namespace {

nlohmann::ordered_json config_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["architecture"] = architecture_name(c.arch);
  j["input_channels"] = c.input_channels;
  j["input_length"] = c.input_length;
  j["conv1_filters"] = c.conv1_filters;
  j["conv2_filters"] = c.conv2_filters;
  j["conv_kernel"] = c.conv_kernel;
  j["pool_size"] = c.pool_size;
  j["dropout"] = c.dropout;
  j["lstm_hidden"] = c.lstm_hidden;
  j["lstm_layers"] = c.lstm_layers;
  j["fc"] = c.fc;
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["ref_cap"] = c.ref_cap;
  return j;
}

void config_from_json(ModelConfig& c, const nlohmann::json& j, bool allow_arch) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "architecture") {
      if (!allow_arch) throw ValidationError("config: architecture cannot be overridden");
      auto a = parse_architecture(it->get<std::string>());
      if (!a) throw ValidationError("config: unknown architecture " + it->get<std::string>());
      c.arch = *a;
    } else if (k == "input_channels") c.input_channels = it->get<int>();
    else if (k == "input_length") c.input_length = it->get<int>();
    else if (k == "conv1_filters") c.conv1_filters = it->get<int>();
    else if (k == "conv2_filters") c.conv2_filters = it->get<int>();
    else if (k == "conv_kernel") c.conv_kernel = it->get<int>();
    else if (k == "pool_size") c.pool_size = it->get<int>();
    else if (k == "dropout") c.dropout = it->get<double>();
    else if (k == "lstm_hidden") c.lstm_hidden = it->get<int>();
    else if (k == "lstm_layers") c.lstm_layers = it->get<int>();
    else if (k == "fc") {
      auto v = it->get<std::vector<int>>();
      if (v.size() != 3) throw ValidationError("config: fc must have 3 widths");
      c.fc = {v[0], v[1], v[2]};
    } else if (k == "lr") c.lr = it->get<double>();
    else if (k == "batch_size") c.batch_size = it->get<int>();
    else if (k == "epochs") c.epochs = it->get<int>();
    else if (k == "seed") c.seed = it->get<uint64_t>();
    else if (k == "ref_cap") c.ref_cap = it->get<long>();
    else throw ValidationError("config: unknown key '" + k + "'");
  }
}

}  // namespace

void apply_config_overrides(ModelConfig& cfg, const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: bad JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config: overrides must be a JSON object");
  config_from_json(cfg, j, false);
  cfg.validate();
}

std::string config_to_json(const ModelConfig& cfg) { return config_json(cfg).dump(); }

std::vector<SiamesePair> make_training_pairs(const std::vector<int>& normal_indices,
                                             const std::vector<int>& erroneous_indices,
                                             uint64_t seed) {
  if (normal_indices.size() < 2)
    throw ValidationError("siamese pairs: need at least 2 normal windows, have " +
                          std::to_string(normal_indices.size()));
  if (erroneous_indices.empty())
    throw ValidationError("siamese pairs: need at least 1 erroneous window, have 0");

  std::vector<SiamesePair> pairs;
  pairs.reserve(2 * normal_indices.size() * erroneous_indices.size());
  for (int n : normal_indices)
    for (int e : erroneous_indices) pairs.push_back({n, e, 1});

  const size_t n_pos = pairs.size();
  const uint64_t n = normal_indices.size();
  const uint64_t distinct = n * (n - 1) / 2;
  Rng rng(hash_mix(seed, 0x9A125ULL));
  for (size_t t = 0; t < n_pos; ++t) {
    uint64_t k = rng.uniform_index(distinct);
    // unrank k into an unordered pair (i, j), i < j
    uint64_t i = 0, row = n - 1;
    while (k >= row) {
      k -= row;
      --row;
      ++i;
    }
    const uint64_t j = i + 1 + k;
    pairs.push_back({normal_indices[i], normal_indices[j], 0});
  }
  return pairs;
}

// ---- Network ----

Network Network::build(const ModelConfig& cfg) {
  cfg.validate();
  Network net;
  net.config = cfg;

  using namespace ndgrad;
  uint64_t drop_tag = 0;
  ndgrad::Shape shape{cfg.input_channels, cfg.input_length};

  const bool lstm = is_lstm_family(cfg.arch);
  const bool siamese = is_siamese(cfg.arch);

  auto add = [&](std::vector<std::unique_ptr<Layer>>& stack, std::unique_ptr<Layer> l) {
    shape = l->out_shape(shape);
    stack.push_back(std::move(l));
  };

  if (!lstm) {
    add(net.body, std::make_unique<Conv1d>("conv1", cfg.input_channels, cfg.conv1_filters,
                                           cfg.conv_kernel));
    add(net.body, std::make_unique<MaxPool1d>(cfg.pool_size));
    add(net.body, std::make_unique<Dropout>(cfg.dropout, drop_tag++));
    add(net.body, std::make_unique<BatchNorm1d>("bn1", cfg.conv1_filters));
    add(net.body, std::make_unique<Conv1d>("conv2", cfg.conv1_filters, cfg.conv2_filters,
                                           cfg.conv_kernel));
    add(net.body, std::make_unique<MaxPool1d>(cfg.pool_size));
    add(net.body, std::make_unique<Dropout>(cfg.dropout, drop_tag++));
    add(net.body, std::make_unique<BatchNorm1d>("bn2", cfg.conv2_filters));
    add(net.body, std::make_unique<Flatten>());
  } else {
    add(net.body, std::make_unique<Transpose>());
    int d = cfg.input_channels;
    for (int l = 0; l < cfg.lstm_layers; ++l) {
      add(net.body, std::make_unique<Lstm>("lstm" + std::to_string(l + 1), d, cfg.lstm_hidden));
      d = cfg.lstm_hidden;
    }
    add(net.body, std::make_unique<Flatten>());
  }
  net.encoder_out_ = shape[0];

  // four fully connected layers; dropout between them only in the single LSTM
  auto& fc_stack = siamese ? net.head : net.body;
  const std::string prefix = siamese ? "head.fc" : "fc";
  const bool fc_dropout = (cfg.arch == Architecture::LSTM);
  int prev = shape[0];
  for (int i = 0; i < 3; ++i) {
    add(fc_stack, std::make_unique<Dense>(prefix + std::to_string(i + 1), prev, cfg.fc[i]));
    add(fc_stack, std::make_unique<ReLU>());
    if (fc_dropout) add(fc_stack, std::make_unique<Dropout>(cfg.dropout, drop_tag++));
    prev = cfg.fc[i];
  }
  add(fc_stack, std::make_unique<Dense>(siamese ? "head.out" : "out", prev, 1));
  add(fc_stack, std::make_unique<Sigmoid>());

  if (shape[0] != 1 || shape[1] != 0) throw ShapeError("network: output is not scalar");
  return net;
}

std::vector<Param*> Network::trainable_params() {
  std::vector<Param*> ps;
  for (auto& l : body) l->collect(ps);
  for (auto& l : head) l->collect(ps);
  std::erase_if(ps, [](Param* p) { return !p->trainable; });
  return ps;
}

std::vector<Param*> Network::state_tensors() {
  std::vector<Param*> ps;
  for (auto& l : body) l->collect(ps);
  for (auto& l : head) l->collect(ps);
  return ps;
}

void Network::zero_grads() {
  for (Param* p : state_tensors()) p->grad.fill(0.0);
}

void Network::init_params() {
  Rng rng(hash_mix(config.seed, 0x1217ULL));
  for (auto& l : body) l->init(rng);
  for (auto& l : head) l->init(rng);
}

void Network::snap_params_to_f32() {
  for (Param* p : state_tensors())
    for (double& v : p->value.v) v = static_cast<double>(static_cast<float>(v));
}

void Network::mark_batchnorm_ready() {
  for (auto& l : body)
    if (auto* bn = dynamic_cast<ndgrad::BatchNorm1d*>(l.get())) bn->mark_initialized();
}

uint64_t Network::activation_signature() const {
  uint64_t sig = 0x516;
  for (const auto& l : body) sig = hash_mix(sig, l->nonsmooth_signature());
  for (const auto& l : head) sig = hash_mix(sig, l->nonsmooth_signature());
  for (const auto& s : diff_sign_) {
    uint64_t bits = 0;
    size_t n = 0;
    for (double v : s.v) {
      bits = (bits << 2) | (v > 0.0 ? 1u : (v < 0.0 ? 2u : 0u));
      if (++n % 32 == 0) {
        sig = hash_mix(sig, bits);
        bits = 0;
      }
    }
    sig = hash_mix(sig, bits);
  }
  return sig;
}

void Network::body_forward(const Batch& in, const PassCtx& ctx) {
  acts_.assign(body.size() + 1, Batch{});
  acts_[0] = in;
  for (size_t i = 0; i < body.size(); ++i) {
    body[i]->forward(acts_[i], acts_[i + 1], ctx);
    check_finite(acts_[i + 1], "network forward");
  }
}

Batch Network::body_backward(const Batch& dout) {
  Batch d = dout;
  for (size_t i = body.size(); i-- > 0;) {
    Batch din;
    body[i]->backward(d, din);
    d = std::move(din);
  }
  return d;
}

void Network::head_forward(const Batch& in, const PassCtx& ctx) {
  head_acts_.assign(head.size() + 1, Batch{});
  head_acts_[0] = in;
  for (size_t i = 0; i < head.size(); ++i) {
    head[i]->forward(head_acts_[i], head_acts_[i + 1], ctx);
    check_finite(head_acts_[i + 1], "head forward");
  }
}

Batch Network::head_backward(const Batch& dout) {
  Batch d = dout;
  for (size_t i = head.size(); i-- > 0;) {
    Batch din;
    head[i]->backward(d, din);
    d = std::move(din);
  }
  return d;
}

std::vector<double> Network::forward(const Batch& windows, const PassCtx& ctx) {
  if (siamese()) throw ValidationError("single-input forward on a Siamese network");
  body_forward(windows, ctx);
  std::vector<double> probs(windows.size());
  for (size_t i = 0; i < windows.size(); ++i) probs[i] = acts_.back()[i][0];
  return probs;
}

void Network::backward(const std::vector<double>& dprob) {
  Batch d(dprob.size());
  for (size_t i = 0; i < dprob.size(); ++i) {
    d[i] = Tensor::vec(1);
    d[i][0] = dprob[i];
  }
  body_backward(d);
}

std::vector<double> Network::forward_pairs(const Batch& a, const Batch& b,
                                           const PassCtx& ctx) {
  if (!siamese()) throw ValidationError("pair forward on a single-input network");
  if (a.size() != b.size()) throw ShapeError("pair forward: side sizes differ");
  pair_count_ = static_cast<int>(a.size());

  Batch stacked;
  stacked.reserve(a.size() + b.size());
  for (const Tensor& t : a) stacked.push_back(t);
  for (const Tensor& t : b) stacked.push_back(t);
  body_forward(stacked, ctx);

  const Batch& emb = acts_.back();
  Batch diffs(pair_count_);
  diff_sign_.assign(pair_count_, Tensor{});
  for (int i = 0; i < pair_count_; ++i) {
    const Tensor& ea = emb[i];
    const Tensor& eb = emb[pair_count_ + i];
    Tensor d = Tensor::vec(static_cast<int>(ea.size()));
    Tensor s = d;
    for (size_t j = 0; j < ea.size(); ++j) {
      const double x = ea[j] - eb[j];
      d[j] = std::abs(x);
      s[j] = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    }
    diffs[i] = std::move(d);
    diff_sign_[i] = std::move(s);
  }
  head_forward(diffs, ctx);

  std::vector<double> probs(pair_count_);
  for (int i = 0; i < pair_count_; ++i) probs[i] = head_acts_.back()[i][0];
  return probs;
}

void Network::backward_pairs(const std::vector<double>& dprob) {
  Batch d(dprob.size());
  for (size_t i = 0; i < dprob.size(); ++i) {
    d[i] = Tensor::vec(1);
    d[i][0] = dprob[i];
  }
  Batch ddiff = head_backward(d);

  Batch dstacked(2 * pair_count_);
  for (int i = 0; i < pair_count_; ++i) {
    Tensor da = ddiff[i];
    Tensor db = ddiff[i];
    for (size_t j = 0; j < da.size(); ++j) {
      da[j] = ddiff[i][j] * diff_sign_[i][j];
      db[j] = -da[j];
    }
    dstacked[i] = std::move(da);
    dstacked[pair_count_ + i] = std::move(db);
  }
  body_backward(dstacked);
}

std::vector<double> Network::predict(const Batch& windows) {
  return forward(windows, PassCtx{Mode::Eval, config.seed, 0});
}

Batch Network::encode(const Batch& windows) {
  if (!siamese()) throw ValidationError("encode on a single-input network");
  body_forward(windows, PassCtx{Mode::Eval, config.seed, 0});
  return acts_.back();
}

std::vector<double> Network::head_on_diffs(const Batch& diffs) {
  head_forward(diffs, PassCtx{Mode::Eval, config.seed, 0});
  std::vector<double> probs(diffs.size());
  for (size_t i = 0; i < diffs.size(); ++i) probs[i] = head_acts_.back()[i][0];
  return probs;
}

// ---- training ----

namespace {

struct LossTracker {
  double sum = 0.0;
  long n = 0;
  void add(double batch_mean, size_t batch_n) {
    sum += batch_mean * static_cast<double>(batch_n);
    n += static_cast<long>(batch_n);
  }
  double epoch_mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
};

}  // namespace

TrainCurve train_network(Network& net, const Batch& windows,
                         const std::vector<double>& labels) {
  if (windows.empty()) throw ValidationError("train: empty training set");
  if (windows.size() != labels.size()) throw ShapeError("train: window/label count");
  const ModelConfig& cfg = net.config;

  std::vector<Param*> params = net.trainable_params();
  ndgrad::AdamState adam;
  adam.lr = cfg.lr;
  adam.init(params);

  TrainCurve curve;
  std::vector<size_t> order(windows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(hash_mix(cfg.seed, 0x5F0EULL, static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    LossTracker tracker;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      Batch xs;
      std::vector<double> ys;
      xs.reserve(end - start);
      for (size_t i = start; i < end; ++i) {
        xs.push_back(windows[order[i]]);
        ys.push_back(labels[order[i]]);
      }
      try {
        const auto probs = net.forward(xs, PassCtx{Mode::Train, cfg.seed, step});
        const double loss = kernels::bce_loss(probs, ys);
        if (!std::isfinite(loss)) throw TrainingDiverged(epoch);
        tracker.add(loss, ys.size());
        net.zero_grads();
        net.backward(kernels::bce_grad(probs, ys));
        ndgrad::adam_step(params, adam);
      } catch (const TrainingDiverged&) {
        throw;
      } catch (const NumericError&) {
        throw TrainingDiverged(epoch);
      }
      ++step;
      ++net.train_steps;
    }
    curve.epoch_loss.push_back(tracker.epoch_mean());
  }
  net.snap_params_to_f32();
  return curve;
}

TrainCurve train_network_pairs(Network& net, const Batch& windows,
                               const std::vector<SiamesePair>& pairs) {
  if (pairs.empty()) throw ValidationError("train: empty pair set");
  const ModelConfig& cfg = net.config;

  std::vector<Param*> params = net.trainable_params();
  ndgrad::AdamState adam;
  adam.lr = cfg.lr;
  adam.init(params);

  TrainCurve curve;
  std::vector<size_t> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(hash_mix(cfg.seed, 0x5F0EULL, static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    LossTracker tracker;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      Batch a, b;
      std::vector<double> ys;
      for (size_t i = start; i < end; ++i) {
        const SiamesePair& pr = pairs[order[i]];
        a.push_back(windows[pr.a]);
        b.push_back(windows[pr.b]);
        ys.push_back(pr.label);
      }
      try {
        const auto probs = net.forward_pairs(a, b, PassCtx{Mode::Train, cfg.seed, step});
        const double loss = kernels::bce_loss(probs, ys);
        if (!std::isfinite(loss)) throw TrainingDiverged(epoch);
        tracker.add(loss, ys.size());
        net.zero_grads();
        net.backward_pairs(kernels::bce_grad(probs, ys));
        ndgrad::adam_step(params, adam);
      } catch (const TrainingDiverged&) {
        throw;
      } catch (const NumericError&) {
        throw TrainingDiverged(epoch);
      }
      ++step;
      ++net.train_steps;
    }
    curve.epoch_loss.push_back(tracker.epoch_mean());
  }
  net.snap_params_to_f32();
  return curve;
}

// ---- inference ----

DetectionResult predict_window(Network& net, const Tensor& window) {
  const auto probs = net.predict({window});
  DetectionResult r;
  r.score = probs[0];
  r.erroneous = probs[0] >= 0.5;
  return r;
}

DetectionResult siamese_vote(Network& net, const Tensor& window,
                             const Batch& reference_embeddings) {
  if (reference_embeddings.empty())
    throw ValidationError("siamese vote: empty reference set");
  const Batch we = net.encode({window});
  const Tensor& ew = we[0];

  Batch diffs(reference_embeddings.size());
  for (size_t r = 0; r < reference_embeddings.size(); ++r) {
    Tensor d = Tensor::vec(static_cast<int>(ew.size()));
    for (size_t j = 0; j < ew.size(); ++j)
      d[j] = std::abs(ew[j] - reference_embeddings[r][j]);
    diffs[r] = std::move(d);
  }
  const auto probs = net.head_on_diffs(diffs);

  DetectionResult res;
  res.votes_total = static_cast<int>(probs.size());
  for (double p : probs)
    if (p >= 0.5) ++res.votes_erroneous;
  res.score = static_cast<double>(res.votes_erroneous) / res.votes_total;
  res.erroneous = majority_erroneous(res.votes_erroneous, res.votes_total);
  return res;
}

std::vector<int> cap_reference_indices(size_t available, long cap, uint64_t seed) {
  std::vector<int> idx(available);
  for (size_t i = 0; i < available; ++i) idx[i] = static_cast<int>(i);
  if (cap < 0 || static_cast<size_t>(cap) >= available) return idx;
  Rng rng(hash_mix(seed, 0xCA9ULL));
  rng.shuffle(idx);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace egd::models
