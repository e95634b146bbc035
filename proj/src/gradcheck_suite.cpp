#include "egd/gradcheck_suite.hpp"

#include <cmath>
#include <cstdio>
#include <memory>

#include "egd/models.hpp"

namespace egd::models {

using ndgrad::GradCheckResult;
using ndgrad::Layer;
using ndgrad::Mode;
using ndgrad::Param;
using ndgrad::PassCtx;

namespace {

Batch random_batch(Rng& rng, int items, int rows, int cols, double scale = 1.0) {
  Batch b(items);
  for (Tensor& t : b) {
    t = cols > 0 ? Tensor::mat(rows, cols) : Tensor::vec(rows);
    for (double& v : t.v) v = rng.uniform(-scale, scale);
  }
  return b;
}

// Check one layer: loss = sum over the batch of <out, r> with a fixed random
// projection r; verifies parameter and input gradients.
double check_layer(Layer& layer, Batch input, const PassCtx& ctx, Rng& rng, double h,
                   double atol = 0.0) {
  Batch out;
  layer.forward(input, out, ctx);

  Batch proj(out.size());
  for (size_t i = 0; i < out.size(); ++i) {
    proj[i] = out[i];
    for (double& v : proj[i].v) v = rng.uniform(-1.0, 1.0);
  }

  Batch din;
  std::vector<Param*> params;
  layer.collect(params);
  for (Param* p : params) p->grad.fill(0.0);
  layer.backward(proj, din);

  // adopt the inputs as parameters so their gradients are verified too
  std::vector<std::unique_ptr<Param>> input_params;
  for (size_t i = 0; i < input.size(); ++i) {
    auto ip = std::make_unique<Param>("input" + std::to_string(i), input[i]);
    ip->grad = din[i];
    input_params.push_back(std::move(ip));
  }
  std::vector<Param*> all = params;
  for (auto& ip : input_params) all.push_back(ip.get());

  const auto loss_fn = [&]() {
    Batch x(input_params.size());
    for (size_t i = 0; i < x.size(); ++i) x[i] = input_params[i]->value;
    Batch y;
    layer.forward(x, y, ctx);
    double s = 0.0;
    for (size_t i = 0; i < y.size(); ++i)
      for (size_t j = 0; j < y[i].size(); ++j) s += y[i][j] * proj[i][j];
    return s;
  };
  return ndgrad::grad_check(all, loss_fn, h,
                            [&] { return layer.nonsmooth_signature(); }, atol)
      .max_rel_err;
}

double check_network(Network& net, Rng& rng, const PassCtx& ctx, double h, int items) {
  // a larger batch and input scale keep the batch-norm variance healthy, which
  // keeps the local curvature (and so the finite-difference truncation) small
  Batch xs =
      random_batch(rng, items, net.config.input_channels, net.config.input_length, 2.0);
  std::vector<double> ys(items);
  for (double& y : ys) y = rng.uniform() < 0.5 ? 0.0 : 1.0;

  Batch xs_b;
  if (net.siamese())
    xs_b =
        random_batch(rng, items, net.config.input_channels, net.config.input_length, 2.0);

  const auto loss_fn = [&]() {
    const auto p = net.siamese() ? net.forward_pairs(xs, xs_b, ctx) : net.forward(xs, ctx);
    return kernels::bce_loss(p, ys);
  };

  const auto p = net.siamese() ? net.forward_pairs(xs, xs_b, ctx) : net.forward(xs, ctx);
  const auto d = kernels::bce_grad(p, ys);
  net.zero_grads();
  if (net.siamese())
    net.backward_pairs(d);
  else
    net.backward(d);

  // atol: central differences at h cannot resolve below truncation noise
  return ndgrad::grad_check(net.trainable_params(), loss_fn, h,
                            [&] { return net.activation_signature(); }, 1e-5)
      .max_rel_err;
}

ModelConfig small_config(Architecture arch, uint64_t seed) {
  ModelConfig c;
  c.arch = arch;
  c.input_channels = 6;
  c.input_length = 12;
  c.conv1_filters = 5;
  c.conv2_filters = 4;
  c.conv_kernel = 3;
  c.pool_size = 2;
  c.dropout = 0.2;
  c.lstm_hidden = 4;
  c.lstm_layers = 3;
  c.fc = {8, 6, 4};
  c.seed = seed;
  return c;
}

}  // namespace

std::vector<GradCheckCase> gradient_check_suite(int instances, uint64_t seed, double h) {
  std::vector<GradCheckCase> cases;
  auto run = [&](const std::string& name, auto&& one_instance) {
    GradCheckCase c;
    c.name = name;
    for (int i = 0; i < instances; ++i) {
      Rng rng(hash_mix(seed, std::hash<std::string>{}(name), static_cast<uint64_t>(i)));
      c.max_rel_err = std::max(c.max_rel_err, one_instance(rng));
      ++c.checked;
    }
    cases.push_back(c);
  };

  const PassCtx train_ctx{Mode::Train, 11, 5};

  run("conv1d", [&](Rng& rng) {
    ndgrad::Conv1d layer("conv", 3, 4, 3);
    layer.init(rng);
    return check_layer(layer, random_batch(rng, 2, 3, 10), train_ctx, rng, h);
  });
  run("maxpool1d", [&](Rng& rng) {
    ndgrad::MaxPool1d layer(2);
    return check_layer(layer, random_batch(rng, 2, 3, 9), train_ctx, rng, h);
  });
  run("batchnorm1d", [&](Rng& rng) {
    ndgrad::BatchNorm1d layer("bn", 4);
    return check_layer(layer, random_batch(rng, 4, 4, 9, 1.5), train_ctx, rng, h, 1e-6);
  });
  run("dropout", [&](Rng& rng) {
    ndgrad::Dropout layer(0.3, 7);
    return check_layer(layer, random_batch(rng, 2, 4, 6), train_ctx, rng, h);
  });
  run("dense", [&](Rng& rng) {
    ndgrad::Dense layer("fc", 7, 5);
    layer.init(rng);
    return check_layer(layer, random_batch(rng, 3, 7, 0), train_ctx, rng, h);
  });
  run("relu", [&](Rng& rng) {
    ndgrad::ReLU layer;
    return check_layer(layer, random_batch(rng, 2, 9, 0), train_ctx, rng, h);
  });
  run("sigmoid", [&](Rng& rng) {
    ndgrad::Sigmoid layer;
    return check_layer(layer, random_batch(rng, 2, 9, 0), train_ctx, rng, h);
  });
  run("lstm_layer", [&](Rng& rng) {
    ndgrad::Lstm layer("lstm", 4, 4);  // 3-step sequence, 4 units
    layer.init(rng);
    return check_layer(layer, random_batch(rng, 2, 3, 4), train_ctx, rng, h);
  });
  run("bce_loss", [&](Rng& rng) {
    const int n = 5;
    std::vector<std::unique_ptr<Param>> ps;
    std::vector<double> ys(n);
    Param p("p", Tensor::vec(n));
    for (int i = 0; i < n; ++i) {
      p.value[i] = rng.uniform(0.1, 0.9);  // keep 1/p^2 curvature modest
      ys[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    std::vector<double> pv(p.value.v.begin(), p.value.v.end());
    const auto g = kernels::bce_grad(pv, ys);
    for (int i = 0; i < n; ++i) p.grad[i] = g[i];
    const auto loss_fn = [&]() {
      std::vector<double> cur(p.value.v.begin(), p.value.v.end());
      return kernels::bce_loss(cur, ys);
    };
    return ndgrad::grad_check({&p}, loss_fn, h).max_rel_err;
  });

  for (Architecture arch : {Architecture::CNN, Architecture::LSTM,
                            Architecture::SiameseCNN, Architecture::SiameseLSTM}) {
    run(architecture_name(arch), [&](Rng& rng) {
      Network net = Network::build(small_config(arch, rng.next_u64()));
      net.init_params();
      const int items = is_lstm_family(arch) ? 4 : 8;  // no batch norm in the lstm path
      return check_network(net, rng, train_ctx, h, items);
    });
  }

  return cases;
}

std::string gradcheck_report(const std::vector<GradCheckCase>& cases, double tol) {
  std::string out = "case,max_rel_err,elements,status\n";
  char buf[160];
  for (const auto& c : cases) {
    std::snprintf(buf, sizeof buf, "%s,%.3e,%zu,%s\n", c.name.c_str(), c.max_rel_err,
                  c.checked, c.pass(tol) ? "pass" : "FAIL");
    out += buf;
  }
  return out;
}

}  // namespace egd::models
