#include <cmath>

#include "doctest.h"
#include "egd/kernels.hpp"
#include "egd/layers.hpp"
#include "egd/rng.hpp"

using namespace egd;
using namespace egd::kernels;

namespace {

Batch rand_batch(Rng& rng, int items, int rows, int cols) {
  Batch b(items);
  for (Tensor& t : b) {
    t = cols > 0 ? Tensor::mat(rows, cols) : Tensor::vec(rows);
    for (double& v : t.v) v = rng.uniform(-1.0, 1.0);
  }
  return b;
}

double max_rel(const Batch& a, const Batch& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].size() == b[i].size());
    for (size_t j = 0; j < a[i].size(); ++j)
      worst = std::max(worst, ndgrad::rel_err(a[i][j], b[i][j]));
  }
  return worst;
}

double max_rel(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (size_t j = 0; j < a.size(); ++j)
    worst = std::max(worst, ndgrad::rel_err(a[j], b[j]));
  return worst;
}

}  // namespace

TEST_CASE("conv1d hand-computed taps") {
  Batch x(1);
  x[0] = Tensor::mat(1, 4);
  x[0].v = {1, 2, 3, 4};
  Tensor w = Tensor::cube(1, 1, 3);
  w.v = {1, 0, -1};
  Tensor b = Tensor::vec(1);
  Batch y;
  conv1d_forward(x, w, b, y);
  CHECK(y[0].cols() == 2);
  CHECK(y[0](0, 0) == doctest::Approx(-2.0));
  CHECK(y[0](0, 1) == doctest::Approx(-2.0));
}

TEST_CASE("conv1d kernel size 1 with unit weight is identity") {
  Rng rng(5);
  Batch x = rand_batch(rng, 2, 3, 7);
  Tensor w = Tensor::cube(3, 3, 1);
  for (int i = 0; i < 3; ++i) w(i, i, 0) = 1.0;
  Tensor b = Tensor::vec(3);
  Batch y;
  conv1d_forward(x, w, b, y);
  CHECK(max_rel(x, y) == 0.0);
}

TEST_CASE("conv1d rejects input shorter than kernel") {
  Batch x(1);
  x[0] = Tensor::mat(1, 2);
  Tensor w = Tensor::cube(1, 1, 3), b = Tensor::vec(1);
  Batch y;
  CHECK_THROWS_AS(conv1d_forward(x, w, b, y), ShapeError);
}

TEST_CASE("maxpool picks window maxima, ties to the earliest index") {
  Batch x(1);
  x[0] = Tensor::mat(1, 4);
  x[0].v = {1, 3, 2, 5};
  Batch y;
  std::vector<std::vector<int>> argmax;
  maxpool1d_forward(x, 2, y, argmax);
  CHECK(y[0].v == std::vector<double>{3, 5});

  x[0].v = {7, 7, 7, 7};
  maxpool1d_forward(x, 2, y, argmax);
  CHECK(argmax[0][0] == 0);
  CHECK(argmax[0][1] == 2);
}

TEST_CASE("dense identity and bias-only cases") {
  Batch x(1);
  x[0] = Tensor::vec(3);
  x[0].v = {1.5, -2.0, 0.25};
  Tensor w = Tensor::mat(3, 3), b = Tensor::vec(3);
  for (int i = 0; i < 3; ++i) w(i, i) = 1.0;
  Batch y;
  dense_forward(x, w, b, y);
  CHECK(y[0].v == x[0].v);

  x[0].fill(0.0);
  b.v = {4, 5, 6};
  dense_forward(x, w, b, y);
  CHECK(y[0].v == b.v);
}

TEST_CASE("activations") {
  Batch x(1);
  x[0] = Tensor::vec(3);
  x[0].v = {-1.0, 2.0, 0.0};
  Batch y;
  relu_forward(x, y);
  CHECK(y[0].v == std::vector<double>{0.0, 2.0, 0.0});

  sigmoid_forward(x, y);
  CHECK(y[0][2] == doctest::Approx(0.5).epsilon(1e-12));
  x[0].v = {-100.0, 100.0, 0.0};
  sigmoid_forward(x, y);
  CHECK(y[0][0] == 1e-7);  // clamped
  CHECK(y[0][1] == 1.0 - 1e-7);
}

TEST_CASE("lstm with all-zero parameters forces zero hidden states") {
  Batch x(1);
  x[0] = Tensor::mat(4, 3);  // T=4, D=3
  Rng rng(2);
  for (double& v : x[0].v) v = rng.uniform(-1, 1);
  Tensor wx = Tensor::mat(8, 3), wh = Tensor::mat(8, 2), b = Tensor::vec(8);
  LstmCache cache;
  Batch h;
  lstm_forward(x, wx, wh, b, cache, h);
  for (double v : h[0].v) CHECK(v == 0.0);
  // gates sit at sigmoid(0) = 0.5, candidate at tanh(0) = 0
  CHECK(cache.i[0](0, 0) == doctest::Approx(0.5));
  CHECK(cache.g[0](0, 0) == doctest::Approx(0.0));
}

TEST_CASE("lstm length-1 sequence equals a single cell evaluation") {
  Rng rng(3);
  const int D = 3, H = 2;
  Batch x = rand_batch(rng, 1, 1, D);
  Tensor wx = Tensor::mat(4 * H, D), wh = Tensor::mat(4 * H, H), b = Tensor::vec(4 * H);
  for (double& v : wx.v) v = rng.uniform(-0.5, 0.5);
  for (double& v : wh.v) v = rng.uniform(-0.5, 0.5);
  for (double& v : b.v) v = rng.uniform(-0.5, 0.5);
  LstmCache cache;
  Batch h;
  lstm_forward(x, wx, wh, b, cache, h);

  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  for (int q = 0; q < H; ++q) {
    double zi = b[q], zf = b[H + q], zg = b[2 * H + q], zo = b[3 * H + q];
    for (int d = 0; d < D; ++d) {
      zi += wx(q, d) * x[0](0, d);
      zf += wx(H + q, d) * x[0](0, d);
      zg += wx(2 * H + q, d) * x[0](0, d);
      zo += wx(3 * H + q, d) * x[0](0, d);
    }
    const double c = sig(zi) * std::tanh(zg);
    const double expected = sig(zo) * std::tanh(c);
    CHECK(h[0](0, q) == doctest::Approx(expected).epsilon(1e-12));
    (void)zf;  // forget gate multiplies a zero initial cell state
  }
}

TEST_CASE("bce loss reference values") {
  CHECK(bce_loss({0.5}, {1.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss({1.0 - 1e-7}, {1.0}) == doctest::Approx(1e-7).epsilon(1e-2));
  CHECK(bce_loss({0.9}, {1.0}) == doctest::Approx(0.105361).epsilon(1e-5));
}

TEST_CASE("parallel backend matches the serial reference") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const int items = 1 + static_cast<int>(rng.uniform_index(6));
    const int c_in = 2 + static_cast<int>(rng.uniform_index(5));
    const int c_out = 1 + static_cast<int>(rng.uniform_index(6));
    const int L = 8 + static_cast<int>(rng.uniform_index(20));
    const int k = 2 + static_cast<int>(rng.uniform_index(3));

    Batch x = rand_batch(rng, items, c_in, L);
    Tensor w = Tensor::cube(c_out, c_in, k), b = Tensor::vec(c_out);
    for (double& v : w.v) v = rng.uniform(-1, 1);
    for (double& v : b.v) v = rng.uniform(-1, 1);

    Batch ys, yp;
    serial::conv1d_forward(x, w, b, ys);
    conv1d_forward(x, w, b, yp);
    CHECK(max_rel(ys, yp) < 1e-12);

    Batch dy = rand_batch(rng, items, c_out, L - k + 1);
    Batch dxs, dxp;
    Tensor dws = Tensor::cube(c_out, c_in, k), dbs = Tensor::vec(c_out);
    Tensor dwp = dws, dbp = dbs;
    serial::conv1d_backward(x, w, dy, dxs, dws, dbs);
    conv1d_backward(x, w, dy, dxp, dwp, dbp);
    CHECK(max_rel(dxs, dxp) < 1e-12);
    CHECK(max_rel(dws, dwp) < 1e-12);
    CHECK(max_rel(dbs, dbp) < 1e-12);
  }
}

TEST_CASE("parallel dense and lstm match the serial reference") {
  Rng rng(13);
  const int items = 4, n = 9, m = 6;
  Batch x = rand_batch(rng, items, n, 0);
  Tensor w = Tensor::mat(m, n), b = Tensor::vec(m);
  for (double& v : w.v) v = rng.uniform(-1, 1);
  Batch ys, yp;
  serial::dense_forward(x, w, b, ys);
  dense_forward(x, w, b, yp);
  CHECK(max_rel(ys, yp) < 1e-12);

  Batch dy = rand_batch(rng, items, m, 0);
  Batch dxs, dxp;
  Tensor dws = Tensor::mat(m, n), dbs = Tensor::vec(m);
  Tensor dwp = dws, dbp = dbs;
  serial::dense_backward(x, w, dy, dxs, dws, dbs);
  dense_backward(x, w, dy, dxp, dwp, dbp);
  CHECK(max_rel(dxs, dxp) < 1e-12);
  CHECK(max_rel(dws, dwp) < 1e-12);

  const int T = 6, D = 5, H = 4;
  Batch xs = rand_batch(rng, items, T, D);
  Tensor wx = Tensor::mat(4 * H, D), wh = Tensor::mat(4 * H, H), lb = Tensor::vec(4 * H);
  for (double& v : wx.v) v = rng.uniform(-0.6, 0.6);
  for (double& v : wh.v) v = rng.uniform(-0.6, 0.6);
  LstmCache cs, cp;
  Batch hs, hp;
  serial::lstm_forward(xs, wx, wh, lb, cs, hs);
  lstm_forward(xs, wx, wh, lb, cp, hp);
  CHECK(max_rel(hs, hp) < 1e-12);

  Batch dh = rand_batch(rng, items, T, H);
  Batch dxls, dxlp;
  Tensor dwxs = Tensor::mat(4 * H, D), dwhs = Tensor::mat(4 * H, H), dlbs = Tensor::vec(4 * H);
  Tensor dwxp = dwxs, dwhp = dwhs, dlbp = dlbs;
  serial::lstm_backward(cs, wx, wh, dh, dxls, dwxs, dwhs, dlbs);
  lstm_backward(cp, wx, wh, dh, dxlp, dwxp, dwhp, dlbp);
  CHECK(max_rel(dxls, dxlp) < 1e-12);
  CHECK(max_rel(dwxs, dwxp) < 1e-12);
  CHECK(max_rel(dwhs, dwhp) < 1e-12);
}

TEST_CASE("kernels are bit-deterministic across repeated calls") {
  Rng rng(17);
  Batch x = rand_batch(rng, 3, 4, 12);
  Tensor w = Tensor::cube(5, 4, 3), b = Tensor::vec(5);
  for (double& v : w.v) v = rng.uniform(-1, 1);
  Batch y1, y2;
  conv1d_forward(x, w, b, y1);
  conv1d_forward(x, w, b, y2);
  for (size_t i = 0; i < y1.size(); ++i) CHECK(y1[i].v == y2[i].v);
}
