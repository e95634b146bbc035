#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "egd/models.hpp"
#include "support/oracles.hpp"

using namespace egd;
using namespace egd::models;

namespace {

Batch rand_windows(Rng& rng, int n, int channels = 26, int length = 30) {
  Batch b(n);
  for (Tensor& t : b) {
    t = Tensor::mat(channels, length);
    for (double& v : t.v) v = rng.uniform(-1.0, 1.0);
  }
  return b;
}

// windows whose labels are linearly separable by a strong mean shift
void toy_dataset(Rng& rng, int n, Batch& xs, std::vector<double>& ys) {
  xs = rand_windows(rng, n);
  ys.resize(n);
  for (int i = 0; i < n; ++i) {
    ys[i] = i % 2;
    if (i % 2 == 1)
      for (double& v : xs[i].v) v += 3.0;
  }
}

ModelConfig tiny_config(Architecture arch) {
  ModelConfig c;
  c.arch = arch;
  c.conv1_filters = 8;
  c.conv2_filters = 6;
  c.lstm_hidden = 8;
  c.fc = {16, 8, 4};
  c.epochs = 30;
  c.batch_size = 8;
  c.seed = 5;
  return c;
}

void zero_output_layer(Network& net) {
  for (ndgrad::Param* p : net.state_tensors())
    if (p->name == "out.w" || p->name == "out.b" || p->name == "head.out.w" ||
        p->name == "head.out.b")
      p->value.fill(0.0);
}

}  // namespace

TEST_CASE("default CNN shape algebra: 26x30 -> 192 flat") {
  ModelConfig c;
  c.arch = Architecture::SiameseCNN;
  auto net = Network::build(c);
  CHECK(net.encoder_output_size() == 192);  // 32 filters x 6 samples
}

TEST_CASE("probability range contract over random inputs") {
  auto net = Network::build(tiny_config(Architecture::LSTM));
  net.init_params();
  Rng rng(31);
  Batch xs = rand_windows(rng, 1000);
  const auto probs = net.predict(xs);
  for (double p : probs) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("zeroed output layer predicts exactly 0.5") {
  auto net = Network::build(tiny_config(Architecture::LSTM));
  net.init_params();
  zero_output_layer(net);
  Rng rng(32);
  for (double p : net.predict(rand_windows(rng, 8))) CHECK(p == 0.5);

  auto siam = Network::build(tiny_config(Architecture::SiameseLSTM));
  siam.init_params();
  zero_output_layer(siam);
  Batch a = rand_windows(rng, 3), b = rand_windows(rng, 3);
  for (double p : siam.forward_pairs(a, b, {ndgrad::Mode::Eval, 0, 0})) CHECK(p == 0.5);
}

TEST_CASE("siamese symmetry and self-pair constancy") {
  for (Architecture arch : {Architecture::SiameseCNN, Architecture::SiameseLSTM}) {
    auto net = Network::build(tiny_config(arch));
    net.init_params();
    Rng rng(33);
    // batch norm (cnn encoder) needs one training update before eval
    Batch a = rand_windows(rng, 4), b = rand_windows(rng, 4);
    std::vector<double> ys = {0, 1, 0, 1};
    const auto p0 = net.forward_pairs(a, b, {ndgrad::Mode::Train, 5, 0});
    net.zero_grads();
    net.backward_pairs(kernels::bce_grad(p0, ys));

    const auto ab = net.forward_pairs(a, b, {ndgrad::Mode::Eval, 0, 0});
    const auto ba = net.forward_pairs(b, a, {ndgrad::Mode::Eval, 0, 0});
    for (size_t i = 0; i < ab.size(); ++i) CHECK(ab[i] == ba[i]);

    // any self-pair collapses to the same constant
    const auto self_a = net.forward_pairs(a, a, {ndgrad::Mode::Eval, 0, 0});
    const auto self_b = net.forward_pairs(b, b, {ndgrad::Mode::Eval, 0, 0});
    for (size_t i = 1; i < self_a.size(); ++i) CHECK(self_a[i] == self_a[0]);
    CHECK(self_b[0] == self_a[0]);
  }
}

TEST_CASE("training pair construction") {
  const std::vector<int> normals = {0, 1, 2}, errs = {3, 4};
  auto pairs = make_training_pairs(normals, errs, 9);
  REQUIRE(pairs.size() == 12);  // 6 cross + 6 normal/normal
  int label1 = 0;
  for (size_t i = 0; i < 6; ++i) {
    CHECK(pairs[i].label == 1);
    ++label1;
  }
  for (size_t i = 6; i < 12; ++i) {
    CHECK(pairs[i].label == 0);
    CHECK(pairs[i].a != pairs[i].b);  // distinct unordered normal pairs
    for (int e : errs) {
      CHECK(pairs[i].a != e);
      CHECK(pairs[i].b != e);
    }
  }
  CHECK(label1 == 6);

  auto again = make_training_pairs(normals, errs, 9);
  for (size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].a == again[i].a);
    CHECK(pairs[i].b == again[i].b);
  }

  CHECK_THROWS_AS(make_training_pairs(normals, {}, 9), ValidationError);
  CHECK_THROWS_AS(make_training_pairs({0}, errs, 9), ValidationError);
}

TEST_CASE("training drives loss down on a separable toy set") {
  Rng rng(41);
  Batch xs;
  std::vector<double> ys;
  toy_dataset(rng, 24, xs, ys);

  auto cfg = tiny_config(Architecture::CNN);
  cfg.epochs = 50;
  cfg.lr = 5e-3;
  auto net = Network::build(cfg);
  net.init_params();
  const auto curve = train_network(net, xs, ys);
  REQUIRE(curve.epoch_loss.size() == 50);
  CHECK(curve.epoch_loss.back() < 0.1);
  CHECK(curve.epoch_loss.back() < curve.epoch_loss.front());
}

TEST_CASE("zero-epoch training returns the initialized network") {
  Rng rng(42);
  Batch xs;
  std::vector<double> ys;
  toy_dataset(rng, 8, xs, ys);
  auto cfg = tiny_config(Architecture::LSTM);
  cfg.epochs = 0;
  auto net = Network::build(cfg);
  net.init_params();
  const auto before = net.state_tensors()[0]->value.v;
  const auto curve = train_network(net, xs, ys);
  CHECK(curve.epoch_loss.empty());
  // parameters only snapped to float32, no updates
  for (size_t i = 0; i < before.size(); ++i)
    CHECK(static_cast<float>(before[i]) ==
          static_cast<float>(net.state_tensors()[0]->value[i]));
}

TEST_CASE("training determinism: identical seed, config, data") {
  Rng rng(43);
  Batch xs;
  std::vector<double> ys;
  toy_dataset(rng, 16, xs, ys);
  auto cfg = tiny_config(Architecture::CNN);
  cfg.epochs = 5;

  auto run = [&]() {
    auto net = Network::build(cfg);
    net.init_params();
    train_network(net, xs, ys);
    std::vector<double> flat;
    for (ndgrad::Param* p : net.state_tensors())
      flat.insert(flat.end(), p->value.v.begin(), p->value.v.end());
    return flat;
  };
  CHECK(run() == run());
}

TEST_CASE("a non-finite forward pass raises TrainingDiverged with the epoch") {
  Rng rng(44);
  Batch xs;
  std::vector<double> ys;
  toy_dataset(rng, 16, xs, ys);
  xs[3][7] = std::numeric_limits<double>::quiet_NaN();
  auto cfg = tiny_config(Architecture::CNN);
  cfg.epochs = 3;
  auto net = Network::build(cfg);
  net.init_params();
  try {
    train_network(net, xs, ys);
    FAIL("expected TrainingDiverged");
  } catch (const TrainingDiverged& e) {
    CHECK(e.epoch == 0);
    CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
  }
}

TEST_CASE("majority vote matches exhaustive enumeration up to 10 references") {
  for (int n = 1; n <= 10; ++n) {
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      std::vector<bool> indicators(n);
      int votes = 0;
      for (int i = 0; i < n; ++i) {
        indicators[i] = (mask >> i) & 1;
        if (indicators[i]) ++votes;
      }
      CHECK(majority_erroneous(votes, n) == testsupport::brute_force_vote(indicators));
    }
  }
  CHECK(majority_erroneous(2, 3));        // [1,1,0] -> erroneous
  CHECK_FALSE(majority_erroneous(0, 4));  // [0,0,0,0] -> normal
  CHECK(majority_erroneous(2, 4));        // tie -> erroneous
}

TEST_CASE("siamese vote against reference embeddings") {
  auto net = Network::build(tiny_config(Architecture::SiameseCNN));
  net.init_params();
  Rng rng(45);
  Batch a = rand_windows(rng, 4), b = rand_windows(rng, 4);
  std::vector<double> ys = {0, 1, 0, 1};
  const auto p0 = net.forward_pairs(a, b, {ndgrad::Mode::Train, 5, 0});
  net.zero_grads();
  net.backward_pairs(kernels::bce_grad(p0, ys));

  const Batch refs = rand_windows(rng, 7);
  const Batch emb = net.encode(refs);
  const Tensor window = rand_windows(rng, 1)[0];
  const auto r = siamese_vote(net, window, emb);
  CHECK(r.votes_total == 7);
  CHECK(r.score == doctest::Approx(static_cast<double>(r.votes_erroneous) / 7));
  CHECK(r.erroneous == majority_erroneous(r.votes_erroneous, 7));

  CHECK_THROWS_AS(siamese_vote(net, window, {}), ValidationError);
}

TEST_CASE("reference cap subsampling is deterministic") {
  auto all = cap_reference_indices(10, -1, 1);
  CHECK(all.size() == 10);
  auto capped = cap_reference_indices(100, 10, 1);
  CHECK(capped.size() == 10);
  CHECK(capped == cap_reference_indices(100, 10, 1));
  CHECK(capped != cap_reference_indices(100, 10, 2));
}

TEST_CASE("checkpoint round-trip: bytes, predictions, error classes") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "egd_test_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Rng rng(46);
  Batch xs;
  std::vector<double> ys;
  toy_dataset(rng, 12, xs, ys);
  auto cfg = tiny_config(Architecture::CNN);
  cfg.epochs = 2;
  auto net = Network::build(cfg);
  net.init_params();
  train_network(net, xs, ys);

  CheckpointMeta meta;
  meta.config = cfg;
  meta.stats.mean.assign(26, 0.125);
  meta.stats.stddev.assign(26, 1.0);
  meta.stats.provenance = "test";
  meta.setup = "gst";
  meta.scope_gesture = "G3";
  meta.train_steps = net.train_steps;

  const fs::path p1 = dir / "a.ckpt";
  save_checkpoint(net, meta, p1);

  auto loaded = load_checkpoint(p1);
  CHECK(loaded.meta.scope_gesture == "G3");
  CHECK(loaded.meta.setup == "gst");
  CHECK(loaded.meta.stats.mean[0] == 0.125);

  // save -> load -> save produces byte-identical files
  const fs::path p2 = dir / "b.ckpt";
  save_checkpoint(loaded.net, loaded.meta, p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string c1((std::istreambuf_iterator<char>(f1)), {});
  const std::string c2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(c1 == c2);

  // load-then-predict equals pre-save predictions bit for bit
  Rng rng2(47);
  Batch test = rand_windows(rng2, 6);
  const auto before = net.predict(test);
  const auto after = loaded.net.predict(test);
  for (size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);

  // corrupted magic
  std::string corrupted = c1;
  corrupted[0] = 'X';
  const fs::path pb = dir / "bad_magic.ckpt";
  std::ofstream(pb, std::ios::binary) << corrupted;
  CHECK_THROWS_AS(load_checkpoint(pb), CheckpointMagicError);

  // truncated payload
  const fs::path pt = dir / "trunc.ckpt";
  std::ofstream(pt, std::ios::binary) << c1.substr(0, c1.size() - 64);
  CHECK_THROWS_AS(load_checkpoint(pt), CheckpointTruncatedError);

  // manifest/shape mismatch: tamper with a declared shape in the metadata
  std::string tampered = c1;
  const auto pos = tampered.find("\"shape\":[8,26,3]");
  REQUIRE(pos != std::string::npos);
  tampered.replace(pos, 16, "\"shape\":[9,26,3]");
  // keep metadata length consistent: same byte count
  const fs::path pm = dir / "mismatch.ckpt";
  std::ofstream(pm, std::ios::binary) << tampered;
  CHECK_THROWS_AS(load_checkpoint(pm), CheckpointManifestError);
}

TEST_CASE("config overrides: unknown keys rejected") {
  ModelConfig cfg;
  apply_config_overrides(cfg, R"({"lr": 0.01, "epochs": 7})");
  CHECK(cfg.lr == 0.01);
  CHECK(cfg.epochs == 7);
  CHECK_THROWS_AS(apply_config_overrides(cfg, R"({"learning_rate": 1})"), ValidationError);
  CHECK_THROWS_AS(apply_config_overrides(cfg, "not json"), ValidationError);
  CHECK_THROWS_AS(apply_config_overrides(cfg, R"({"dropout": 1.5})"), ValidationError);
}
