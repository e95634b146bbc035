#include <cmath>

#include "egd/kernels.hpp"

// Naive textbook implementations. No OpenMP, no pointer arithmetic; these
// exist as the reference the parallel backend is tested and benchmarked
// against.
namespace egd::kernels::serial {

namespace {
double sig(double z) {
  const double s = 1.0 / (1.0 + std::exp(-z));
  return s < 1e-7 ? 1e-7 : (s > 1.0 - 1e-7 ? 1.0 - 1e-7 : s);
}
}  // namespace

void conv1d_forward(const Batch& x, const Tensor& w, const Tensor& b, Batch& y) {
  const int c_out = w.dims[0], c_in = w.dims[1], k = w.dims[2];
  const int L = x[0].cols();
  const int lo = L - k + 1;
  y.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    y[i] = Tensor::mat(c_out, lo);
    for (int co = 0; co < c_out; ++co)
      for (int t = 0; t < lo; ++t) {
        double acc = b[co];
        for (int ci = 0; ci < c_in; ++ci)
          for (int kk = 0; kk < k; ++kk) acc += w(co, ci, kk) * x[i](ci, t + kk);
        y[i](co, t) = acc;
      }
  }
}

void conv1d_backward(const Batch& x, const Tensor& w, const Batch& dy, Batch& dx,
                     Tensor& dw, Tensor& db) {
  const int c_out = w.dims[0], c_in = w.dims[1], k = w.dims[2];
  const int L = x[0].cols();
  const int lo = L - k + 1;
  dx.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    dx[i] = Tensor::mat(c_in, L);
    for (int co = 0; co < c_out; ++co)
      for (int t = 0; t < lo; ++t) {
        db[co] += dy[i](co, t);
        for (int ci = 0; ci < c_in; ++ci)
          for (int kk = 0; kk < k; ++kk) {
            dw(co, ci, kk) += dy[i](co, t) * x[i](ci, t + kk);
            dx[i](ci, t + kk) += w(co, ci, kk) * dy[i](co, t);
          }
      }
  }
}

void dense_forward(const Batch& x, const Tensor& w, const Tensor& b, Batch& y) {
  const int m = w.rows(), n = w.cols();
  y.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    y[i] = Tensor::vec(m);
    for (int r = 0; r < m; ++r) {
      double acc = b[r];
      for (int j = 0; j < n; ++j) acc += w(r, j) * x[i][j];
      y[i][r] = acc;
    }
  }
}

void dense_backward(const Batch& x, const Tensor& w, const Batch& dy, Batch& dx,
                    Tensor& dw, Tensor& db) {
  const int m = w.rows(), n = w.cols();
  dx.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    dx[i] = Tensor::vec(n);
    for (int r = 0; r < m; ++r) {
      db[r] += dy[i][r];
      for (int j = 0; j < n; ++j) {
        dw(r, j) += dy[i][r] * x[i][j];
        dx[i][j] += w(r, j) * dy[i][r];
      }
    }
  }
}

void lstm_forward(const Batch& x, const Tensor& wx, const Tensor& wh, const Tensor& b,
                  LstmCache& cache, Batch& h) {
  const int T = x[0].rows(), D = x[0].cols();
  const int H = wh.cols();
  const size_t items = x.size();
  h.resize(items);
  cache.i.resize(items);
  cache.f.resize(items);
  cache.g.resize(items);
  cache.o.resize(items);
  cache.c.resize(items);
  cache.tanh_c.resize(items);
  cache.h_prev_seq.resize(items);
  cache.x.assign(items, nullptr);
  for (size_t i = 0; i < items; ++i) {
    h[i] = Tensor::mat(T, H);
    for (Tensor* t : {&cache.i[i], &cache.f[i], &cache.g[i], &cache.o[i], &cache.c[i],
                      &cache.tanh_c[i], &cache.h_prev_seq[i]})
      *t = Tensor::mat(T, H);
    cache.x[i] = &x[i];

    std::vector<double> hp(H, 0.0), cp(H, 0.0);
    for (int t = 0; t < T; ++t) {
      for (int q = 0; q < H; ++q) cache.h_prev_seq[i](t, q) = hp[q];
      std::vector<double> z(4 * H);
      for (int r = 0; r < 4 * H; ++r) {
        double acc = b[r];
        for (int d = 0; d < D; ++d) acc += wx(r, d) * x[i](t, d);
        for (int q = 0; q < H; ++q) acc += wh(r, q) * hp[q];
        z[r] = acc;
      }
      for (int q = 0; q < H; ++q) {
        const double iv = sig(z[q]);
        const double fv = sig(z[H + q]);
        const double gv = std::tanh(z[2 * H + q]);
        const double ov = sig(z[3 * H + q]);
        const double cv = fv * cp[q] + iv * gv;
        cache.i[i](t, q) = iv;
        cache.f[i](t, q) = fv;
        cache.g[i](t, q) = gv;
        cache.o[i](t, q) = ov;
        cache.c[i](t, q) = cv;
        cache.tanh_c[i](t, q) = std::tanh(cv);
        h[i](t, q) = ov * std::tanh(cv);
        cp[q] = cv;
        hp[q] = h[i](t, q);
      }
    }
  }
}

void lstm_backward(const LstmCache& cache, const Tensor& wx, const Tensor& wh,
                   const Batch& dh, Batch& dx, Tensor& dwx, Tensor& dwh, Tensor& db) {
  const size_t items = dh.size();
  const int T = dh[0].rows(), H = dh[0].cols();
  const int D = wx.cols();
  dx.resize(items);
  for (size_t i = 0; i < items; ++i) {
    dx[i] = Tensor::mat(T, D);
    std::vector<double> dh_rec(H, 0.0), dc(H, 0.0), dz(4 * H);
    for (int t = T - 1; t >= 0; --t) {
      for (int q = 0; q < H; ++q) {
        const double dht = dh[i](t, q) + dh_rec[q];
        const double iv = cache.i[i](t, q), fv = cache.f[i](t, q);
        const double gv = cache.g[i](t, q), ov = cache.o[i](t, q);
        const double tc = cache.tanh_c[i](t, q);
        const double cprev = t > 0 ? cache.c[i](t - 1, q) : 0.0;
        double dct = dc[q] + dht * ov * (1.0 - tc * tc);
        dz[q] = dct * gv * iv * (1.0 - iv);
        dz[H + q] = dct * cprev * fv * (1.0 - fv);
        dz[2 * H + q] = dct * iv * (1.0 - gv * gv);
        dz[3 * H + q] = dht * tc * ov * (1.0 - ov);
        dc[q] = dct * fv;
      }
      for (int r = 0; r < 4 * H; ++r) {
        db[r] += dz[r];
        for (int d = 0; d < D; ++d) {
          dwx(r, d) += dz[r] * (*cache.x[i])(t, d);
          dx[i](t, d) += wx(r, d) * dz[r];
        }
        for (int q = 0; q < H; ++q) dwh(r, q) += dz[r] * cache.h_prev_seq[i](t, q);
      }
      for (int q = 0; q < H; ++q) {
        double acc = 0.0;
        for (int r = 0; r < 4 * H; ++r) acc += wh(r, q) * dz[r];
        dh_rec[q] = acc;
      }
    }
  }
}

void batchnorm_stats(const Batch& x, Tensor& mean, Tensor& var) {
  const int C = x[0].rows(), L = x[0].cols();
  const double n = static_cast<double>(x.size()) * L;
  for (int c = 0; c < C; ++c) {
    double s = 0.0;
    for (const Tensor& xi : x)
      for (int t = 0; t < L; ++t) s += xi(c, t);
    mean[c] = s / n;
    double sq = 0.0;
    for (const Tensor& xi : x)
      for (int t = 0; t < L; ++t) sq += (xi(c, t) - mean[c]) * (xi(c, t) - mean[c]);
    var[c] = sq / n;
  }
}

void maxpool1d_forward(const Batch& x, int size, Batch& y,
                       std::vector<std::vector<int>>& argmax) {
  const int C = x[0].rows(), L = x[0].cols();
  const int lp = L / size;
  y.resize(x.size());
  argmax.assign(x.size(), {});
  for (size_t i = 0; i < x.size(); ++i) {
    y[i] = Tensor::mat(C, lp);
    argmax[i].assign(static_cast<size_t>(C) * lp, 0);
    for (int c = 0; c < C; ++c)
      for (int j = 0; j < lp; ++j) {
        int best = j * size;
        for (int s = 1; s < size; ++s)
          if (x[i](c, j * size + s) > x[i](c, best)) best = j * size + s;
        y[i](c, j) = x[i](c, best);
        argmax[i][static_cast<size_t>(c) * lp + j] = best;
      }
  }
}

}  // namespace egd::kernels::serial
