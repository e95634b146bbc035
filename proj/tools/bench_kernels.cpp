// Kernel benchmark: times the OpenMP backend against the serial reference
// for every batched op plus a full training step per architecture.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>

#include "CLI11.hpp"
#include "egd/kernels.hpp"
#include "egd/models.hpp"
#include "egd/rng.hpp"

using namespace egd;

namespace {

Batch random_batch(Rng& rng, int items, int rows, int cols) {
  Batch b(items);
  for (Tensor& t : b) {
    t = cols > 0 ? Tensor::mat(rows, cols) : Tensor::vec(rows);
    for (double& v : t.v) v = rng.uniform(-1.0, 1.0);
  }
  return b;
}

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warmup
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
             .count() /
         reps;
}

double max_rel_diff(const Batch& a, const Batch& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < a[i].size(); ++j)
      worst = std::max(worst, ndgrad::rel_err(a[i][j], b[i][j]));
  return worst;
}

void report(const char* name, double serial_ms, double parallel_ms, double diff) {
  std::printf("%-22s %10.3f %10.3f %8.2fx   %.2e\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms, diff);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel benchmark"};
  int reps = 50;
  int batch = 32;
  app.add_option("--reps", reps, "timing repetitions");
  app.add_option("--batch", batch, "batch size");
  CLI11_PARSE(app, argc, argv);

  Rng rng(42);
  std::printf("threads: %d, batch: %d, reps: %d\n", omp_get_max_threads(), batch, reps);
  std::printf("%-22s %10s %10s %9s   %s\n", "kernel", "serial ms", "omp ms", "speedup",
              "max rel diff");

  {  // conv1d forward/backward at production shape
    const Batch x = random_batch(rng, batch, 26, 30);
    Tensor w = Tensor::cube(64, 26, 3), b = Tensor::vec(64);
    for (double& v : w.v) v = rng.uniform(-0.2, 0.2);
    Batch ys, yp;
    const double ts = time_ms([&] { kernels::serial::conv1d_forward(x, w, b, ys); }, reps);
    const double tp = time_ms([&] { kernels::conv1d_forward(x, w, b, yp); }, reps);
    report("conv1d fwd", ts, tp, max_rel_diff(ys, yp));

    const Batch dy = random_batch(rng, batch, 64, 28);
    Batch dxs, dxp;
    Tensor dws = Tensor::cube(64, 26, 3), dbs = Tensor::vec(64);
    Tensor dwp = dws, dbp = dbs;
    const double bs = time_ms(
        [&] {
          dws.fill(0.0);
          dbs.fill(0.0);
          kernels::serial::conv1d_backward(x, w, dy, dxs, dws, dbs);
        },
        reps);
    const double bp = time_ms(
        [&] {
          dwp.fill(0.0);
          dbp.fill(0.0);
          kernels::conv1d_backward(x, w, dy, dxp, dwp, dbp);
        },
        reps);
    report("conv1d bwd", bs, bp, max_rel_diff(dxs, dxp));
  }

  {  // dense at head shape
    const Batch x = random_batch(rng, batch, 192, 0);
    Tensor w = Tensor::mat(128, 192), b = Tensor::vec(128);
    for (double& v : w.v) v = rng.uniform(-0.1, 0.1);
    Batch ys, yp;
    const double ts = time_ms([&] { kernels::serial::dense_forward(x, w, b, ys); }, reps);
    const double tp = time_ms([&] { kernels::dense_forward(x, w, b, yp); }, reps);
    report("dense fwd", ts, tp, max_rel_diff(ys, yp));
  }

  {  // lstm layer at production shape
    const Batch x = random_batch(rng, batch, 30, 26);
    Tensor wx = Tensor::mat(256, 26), wh = Tensor::mat(256, 64), b = Tensor::vec(256);
    for (double& v : wx.v) v = rng.uniform(-0.1, 0.1);
    for (double& v : wh.v) v = rng.uniform(-0.1, 0.1);
    kernels::LstmCache cs, cp;
    Batch hs, hp;
    const double ts =
        time_ms([&] { kernels::serial::lstm_forward(x, wx, wh, b, cs, hs); }, reps);
    const double tp = time_ms([&] { kernels::lstm_forward(x, wx, wh, b, cp, hp); }, reps);
    report("lstm fwd", ts, tp, max_rel_diff(hs, hp));

    const Batch dh = random_batch(rng, batch, 30, 64);
    Batch dxs, dxp;
    Tensor dwxs = Tensor::mat(256, 26), dwhs = Tensor::mat(256, 64), dbs = Tensor::vec(256);
    Tensor dwxp = dwxs, dwhp = dwhs, dbp = dbs;
    const double bs = time_ms(
        [&] {
          dwxs.fill(0.0);
          dwhs.fill(0.0);
          dbs.fill(0.0);
          kernels::serial::lstm_backward(cs, wx, wh, dh, dxs, dwxs, dwhs, dbs);
        },
        reps);
    const double bp = time_ms(
        [&] {
          dwxp.fill(0.0);
          dwhp.fill(0.0);
          dbp.fill(0.0);
          kernels::lstm_backward(cp, wx, wh, dh, dxp, dwxp, dwhp, dbp);
        },
        reps);
    report("lstm bwd", bs, bp, max_rel_diff(dxs, dxp));
  }

  // end-to-end training steps (OpenMP path only; serial reference has no
  // full training loop)
  for (const auto arch : {models::Architecture::CNN, models::Architecture::LSTM,
                          models::Architecture::SiameseCNN,
                          models::Architecture::SiameseLSTM}) {
    models::ModelConfig cfg;
    cfg.arch = arch;
    cfg.epochs = 1;
    cfg.batch_size = batch;
    cfg.seed = 1;
    auto net = models::Network::build(cfg);
    net.init_params();
    const int n = batch;
    Batch xs = random_batch(rng, n, 26, 30);
    std::vector<double> ys(n);
    for (double& y : ys) y = rng.uniform() < 0.5 ? 0.0 : 1.0;

    const double ms = time_ms(
        [&] {
          if (net.siamese()) {
            const auto p = net.forward_pairs(xs, xs, {ndgrad::Mode::Train, 1, 1});
            net.zero_grads();
            net.backward_pairs(kernels::bce_grad(p, ys));
          } else {
            const auto p = net.forward(xs, {ndgrad::Mode::Train, 1, 1});
            net.zero_grads();
            net.backward(kernels::bce_grad(p, ys));
          }
        },
        std::max(5, reps / 10));
    std::printf("%-22s %10s %10.3f (fwd+bwd, batch %d)\n",
                models::architecture_name(arch).c_str(), "-", ms, n);
  }
  return 0;
}
