#include "egd/kernels.hpp"

#include <cmath>

namespace egd::kernels {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw ShapeError(msg);
}

inline double sigmoid_clamped(double z) {
  const double s = 1.0 / (1.0 + std::exp(-z));
  if (s < 1e-7) return 1e-7;
  if (s > 1.0 - 1e-7) return 1.0 - 1e-7;
  return s;
}

}  // namespace

void conv1d_forward(const Batch& x, const Tensor& w, const Tensor& b, Batch& y) {
  const int items = static_cast<int>(x.size());
  require(items > 0, "conv1d: empty batch");
  const int c_out = w.dims[0], c_in = w.dims[1], k = w.dims[2];
  const int L = x[0].cols();
  require(x[0].rows() == c_in, "conv1d: input channel mismatch");
  require(L >= k, "conv1d: input shorter than kernel");
  const int lo = L - k + 1;

  y.resize(items);
  for (int i = 0; i < items; ++i) y[i] = Tensor::mat(c_out, lo);

#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i) {
    const Tensor& xi = x[i];
    Tensor& yi = y[i];
    for (int co = 0; co < c_out; ++co) {
      double* yrow = yi.data() + static_cast<size_t>(co) * lo;
      for (int t = 0; t < lo; ++t) yrow[t] = b[co];
      for (int ci = 0; ci < c_in; ++ci) {
        const double* xrow = xi.data() + static_cast<size_t>(ci) * L;
        const double* wrow = w.data() + (static_cast<size_t>(co) * c_in + ci) * k;
        for (int kk = 0; kk < k; ++kk) {
          const double wv = wrow[kk];
          for (int t = 0; t < lo; ++t) yrow[t] += wv * xrow[t + kk];
        }
      }
    }
  }
}

void conv1d_backward(const Batch& x, const Tensor& w, const Batch& dy, Batch& dx,
                     Tensor& dw, Tensor& db) {
  const int items = static_cast<int>(x.size());
  const int c_out = w.dims[0], c_in = w.dims[1], k = w.dims[2];
  const int L = x[0].cols();
  const int lo = L - k + 1;
  require(static_cast<int>(dy.size()) == items, "conv1d backward: batch mismatch");
  require(dy[0].rows() == c_out && dy[0].cols() == lo, "conv1d backward: dy shape");

  dx.resize(items);
  for (int i = 0; i < items; ++i) dx[i] = Tensor::mat(c_in, L);

#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i) {
    const Tensor& dyi = dy[i];
    Tensor& dxi = dx[i];
    for (int co = 0; co < c_out; ++co) {
      const double* dyrow = dyi.data() + static_cast<size_t>(co) * lo;
      for (int ci = 0; ci < c_in; ++ci) {
        double* dxrow = dxi.data() + static_cast<size_t>(ci) * L;
        const double* wrow = w.data() + (static_cast<size_t>(co) * c_in + ci) * k;
        for (int kk = 0; kk < k; ++kk) {
          const double wv = wrow[kk];
          for (int t = 0; t < lo; ++t) dxrow[t + kk] += wv * dyrow[t];
        }
      }
    }
  }

  // parameter gradients: one thread owns a full output-channel slice
#pragma omp parallel for schedule(static) if (c_out > 1)
  for (int co = 0; co < c_out; ++co) {
    double acc_b = 0.0;
    for (int i = 0; i < items; ++i) {
      const double* dyrow = dy[i].data() + static_cast<size_t>(co) * lo;
      for (int t = 0; t < lo; ++t) acc_b += dyrow[t];
    }
    db[co] += acc_b;
    for (int ci = 0; ci < c_in; ++ci) {
      for (int kk = 0; kk < k; ++kk) {
        double acc = 0.0;
        for (int i = 0; i < items; ++i) {
          const double* dyrow = dy[i].data() + static_cast<size_t>(co) * lo;
          const double* xrow = x[i].data() + static_cast<size_t>(ci) * L;
          for (int t = 0; t < lo; ++t) acc += dyrow[t] * xrow[t + kk];
        }
        dw(co, ci, kk) += acc;
      }
    }
  }
}

void maxpool1d_forward(const Batch& x, int size, Batch& y,
                       std::vector<std::vector<int>>& argmax) {
  const int items = static_cast<int>(x.size());
  const int C = x[0].rows(), L = x[0].cols();
  require(L >= size, "maxpool1d: input shorter than pool size");
  const int lp = L / size;

  y.resize(items);
  argmax.assign(items, {});
  for (int i = 0; i < items; ++i) {
    y[i] = Tensor::mat(C, lp);
    argmax[i].assign(static_cast<size_t>(C) * lp, 0);
  }

#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i) {
    const Tensor& xi = x[i];
    for (int c = 0; c < C; ++c) {
      const double* xrow = xi.data() + static_cast<size_t>(c) * L;
      for (int j = 0; j < lp; ++j) {
        int best = j * size;
        double bv = xrow[best];
        for (int s = 1; s < size; ++s) {
          if (xrow[j * size + s] > bv) {  // strict: ties keep earliest index
            bv = xrow[j * size + s];
            best = j * size + s;
          }
        }
        y[i](c, j) = bv;
        argmax[i][static_cast<size_t>(c) * lp + j] = best;
      }
    }
  }
}

void maxpool1d_backward(const Batch& dy, const std::vector<std::vector<int>>& argmax,
                        int in_cols, Batch& dx) {
  const int items = static_cast<int>(dy.size());
  const int C = dy[0].rows(), lp = dy[0].cols();
  dx.resize(items);
  for (int i = 0; i < items; ++i) dx[i] = Tensor::mat(C, in_cols);

#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i) {
    for (int c = 0; c < C; ++c)
      for (int j = 0; j < lp; ++j)
        dx[i](c, argmax[i][static_cast<size_t>(c) * lp + j]) += dy[i](c, j);
  }
}

void dense_forward(const Batch& x, const Tensor& w, const Tensor& b, Batch& y) {
  const int items = static_cast<int>(x.size());
  const int m = w.rows(), n = w.cols();
  require(static_cast<int>(x[0].size()) == n, "dense: input size mismatch");

  y.resize(items);
  for (int i = 0; i < items; ++i) y[i] = Tensor::vec(m);

#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i) {
    const double* xv = x[i].data();
    double* yv = y[i].data();
    for (int r = 0; r < m; ++r) {
      const double* wrow = w.data() + static_cast<size_t>(r) * n;
      double acc = b[r];
#pragma omp simd reduction(+ : acc)
      for (int j = 0; j < n; ++j) acc += wrow[j] * xv[j];
      yv[r] = acc;
    }
  }
}

void dense_backward(const Batch& x, const Tensor& w, const Batch& dy, Batch& dx,
                    Tensor& dw, Tensor& db) {
  const int items = static_cast<int>(x.size());
  const int m = w.rows(), n = w.cols();

  dx.resize(items);
  for (int i = 0; i < items; ++i) dx[i] = Tensor::vec(n);

#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i) {
    const double* dyv = dy[i].data();
    double* dxv = dx[i].data();
    for (int r = 0; r < m; ++r) {
      const double* wrow = w.data() + static_cast<size_t>(r) * n;
      const double g = dyv[r];
#pragma omp simd
      for (int j = 0; j < n; ++j) dxv[j] += wrow[j] * g;
    }
  }

#pragma omp parallel for schedule(static) if (m > 1)
  for (int r = 0; r < m; ++r) {
    double* dwrow = dw.data() + static_cast<size_t>(r) * n;
    double acc_b = 0.0;
    for (int i = 0; i < items; ++i) {
      const double g = dy[i][r];
      acc_b += g;
      const double* xv = x[i].data();
#pragma omp simd
      for (int j = 0; j < n; ++j) dwrow[j] += g * xv[j];
    }
    db[r] += acc_b;
  }
}

void batchnorm_stats(const Batch& x, Tensor& mean, Tensor& var) {
  const int items = static_cast<int>(x.size());
  const int C = x[0].rows(), L = x[0].cols();
  const double n = static_cast<double>(items) * L;

#pragma omp parallel for schedule(static) if (C > 1)
  for (int c = 0; c < C; ++c) {
    double s = 0.0;
    for (int i = 0; i < items; ++i) {
      const double* row = x[i].data() + static_cast<size_t>(c) * L;
      for (int t = 0; t < L; ++t) s += row[t];
    }
    const double mu = s / n;
    double sq = 0.0;
    for (int i = 0; i < items; ++i) {
      const double* row = x[i].data() + static_cast<size_t>(c) * L;
      for (int t = 0; t < L; ++t) sq += (row[t] - mu) * (row[t] - mu);
    }
    mean[c] = mu;
    var[c] = sq / n;
  }
}

void batchnorm_forward(const Batch& x, const Tensor& gamma, const Tensor& beta,
                       const Tensor& mean, const Tensor& var, double eps, Batch& y) {
  const int items = static_cast<int>(x.size());
  const int C = x[0].rows(), L = x[0].cols();
  y.resize(items);
  for (int i = 0; i < items; ++i) y[i] = Tensor::mat(C, L);

#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i) {
    for (int c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(var[c] + eps);
      const double g = gamma[c], bb = beta[c], mu = mean[c];
      const double* xrow = x[i].data() + static_cast<size_t>(c) * L;
      double* yrow = y[i].data() + static_cast<size_t>(c) * L;
#pragma omp simd
      for (int t = 0; t < L; ++t) yrow[t] = g * (xrow[t] - mu) * inv + bb;
    }
  }
}

void batchnorm_backward(const Batch& x, const Batch& dy, const Tensor& gamma,
                        const Tensor& mean, const Tensor& var, double eps, Batch& dx,
                        Tensor& dgamma, Tensor& dbeta) {
  const int items = static_cast<int>(x.size());
  const int C = x[0].rows(), L = x[0].cols();
  const double n = static_cast<double>(items) * L;

  Tensor sum_dy = Tensor::vec(C), sum_dy_xhat = Tensor::vec(C);

#pragma omp parallel for schedule(static) if (C > 1)
  for (int c = 0; c < C; ++c) {
    const double inv = 1.0 / std::sqrt(var[c] + eps);
    const double mu = mean[c];
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < items; ++i) {
      const double* xrow = x[i].data() + static_cast<size_t>(c) * L;
      const double* dyrow = dy[i].data() + static_cast<size_t>(c) * L;
      for (int t = 0; t < L; ++t) {
        s1 += dyrow[t];
        s2 += dyrow[t] * (xrow[t] - mu) * inv;
      }
    }
    sum_dy[c] = s1;
    sum_dy_xhat[c] = s2;
    dbeta[c] += s1;
    dgamma[c] += s2;
  }

  dx.resize(items);
  for (int i = 0; i < items; ++i) dx[i] = Tensor::mat(C, L);

#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i) {
    for (int c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(var[c] + eps);
      const double mu = mean[c];
      const double g = gamma[c];
      const double* xrow = x[i].data() + static_cast<size_t>(c) * L;
      const double* dyrow = dy[i].data() + static_cast<size_t>(c) * L;
      double* dxrow = dx[i].data() + static_cast<size_t>(c) * L;
#pragma omp simd
      for (int t = 0; t < L; ++t) {
        const double xhat = (xrow[t] - mu) * inv;
        dxrow[t] = g * inv * (dyrow[t] - sum_dy[c] / n - xhat * sum_dy_xhat[c] / n);
      }
    }
  }
}

void relu_forward(const Batch& x, Batch& y) {
  const int items = static_cast<int>(x.size());
  y.resize(items);
  for (int i = 0; i < items; ++i) y[i] = x[i];
#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i)
    for (double& v : y[i].v) v = v > 0.0 ? v : 0.0;
}

void relu_backward(const Batch& x, const Batch& dy, Batch& dx) {
  const int items = static_cast<int>(x.size());
  dx.resize(items);
  for (int i = 0; i < items; ++i) dx[i] = dy[i];
#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i)
    for (size_t j = 0; j < dx[i].size(); ++j)
      if (x[i][j] <= 0.0) dx[i][j] = 0.0;
}

void sigmoid_forward(const Batch& x, Batch& y) {
  const int items = static_cast<int>(x.size());
  y.resize(items);
  for (int i = 0; i < items; ++i) y[i] = x[i];
#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i)
    for (double& v : y[i].v) v = sigmoid_clamped(v);
}

void sigmoid_backward(const Batch& y, const Batch& dy, Batch& dx) {
  const int items = static_cast<int>(y.size());
  dx.resize(items);
  for (int i = 0; i < items; ++i) dx[i] = dy[i];
#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i)
    for (size_t j = 0; j < dx[i].size(); ++j) dx[i][j] *= y[i][j] * (1.0 - y[i][j]);
}

void lstm_forward(const Batch& x, const Tensor& wx, const Tensor& wh, const Tensor& b,
                  LstmCache& cache, Batch& h) {
  const int items = static_cast<int>(x.size());
  require(items > 0, "lstm: empty batch");
  const int T = x[0].rows(), D = x[0].cols();
  require(T > 0, "lstm: empty sequence");
  const int H = wh.cols();
  require(wx.rows() == 4 * H && wx.cols() == D, "lstm: wx shape");

  h.resize(items);
  cache.i.resize(items);
  cache.f.resize(items);
  cache.g.resize(items);
  cache.o.resize(items);
  cache.c.resize(items);
  cache.tanh_c.resize(items);
  cache.h_prev_seq.resize(items);
  cache.x.assign(items, nullptr);
  for (int i = 0; i < items; ++i) {
    h[i] = Tensor::mat(T, H);
    cache.i[i] = Tensor::mat(T, H);
    cache.f[i] = Tensor::mat(T, H);
    cache.g[i] = Tensor::mat(T, H);
    cache.o[i] = Tensor::mat(T, H);
    cache.c[i] = Tensor::mat(T, H);
    cache.tanh_c[i] = Tensor::mat(T, H);
    cache.h_prev_seq[i] = Tensor::mat(T, H);
    cache.x[i] = &x[i];
  }

#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i) {
    std::vector<double> gates(static_cast<size_t>(4) * H);
    std::vector<double> hp(static_cast<size_t>(H), 0.0);
    std::vector<double> cp(static_cast<size_t>(H), 0.0);
    for (int t = 0; t < T; ++t) {
      const double* xt = x[i].data() + static_cast<size_t>(t) * D;
      for (int r = 0; r < 4 * H; ++r) {
        const double* wxr = wx.data() + static_cast<size_t>(r) * D;
        const double* whr = wh.data() + static_cast<size_t>(r) * H;
        double acc = b[r];
#pragma omp simd reduction(+ : acc)
        for (int d = 0; d < D; ++d) acc += wxr[d] * xt[d];
#pragma omp simd reduction(+ : acc)
        for (int q = 0; q < H; ++q) acc += whr[q] * hp[q];
        gates[r] = acc;
      }
      for (int q = 0; q < H; ++q) {
        const double iv = sigmoid_clamped(gates[q]);
        const double fv = sigmoid_clamped(gates[H + q]);
        const double gv = std::tanh(gates[2 * H + q]);
        const double ov = sigmoid_clamped(gates[3 * H + q]);
        const double cv = fv * cp[q] + iv * gv;
        const double tc = std::tanh(cv);
        cache.i[i](t, q) = iv;
        cache.f[i](t, q) = fv;
        cache.g[i](t, q) = gv;
        cache.o[i](t, q) = ov;
        cache.c[i](t, q) = cv;
        cache.tanh_c[i](t, q) = tc;
        cache.h_prev_seq[i](t, q) = hp[q];
        const double hv = ov * tc;
        h[i](t, q) = hv;
        cp[q] = cv;
        hp[q] = hv;
      }
    }
  }
}

void lstm_backward(const LstmCache& cache, const Tensor& wx, const Tensor& wh,
                   const Batch& dh, Batch& dx, Tensor& dwx, Tensor& dwh, Tensor& db) {
  const int items = static_cast<int>(dh.size());
  const int T = dh[0].rows(), H = dh[0].cols();
  const int D = wx.cols();

  dx.resize(items);
  std::vector<Tensor> dgates(items);  // T x 4H, pre-activation gate grads
  for (int i = 0; i < items; ++i) {
    dx[i] = Tensor::mat(T, D);
    dgates[i] = Tensor::mat(T, 4 * H);
  }

#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i) {
    std::vector<double> dh_rec(static_cast<size_t>(H), 0.0);
    std::vector<double> dc(static_cast<size_t>(H), 0.0);
    for (int t = T - 1; t >= 0; --t) {
      double* dz = dgates[i].data() + static_cast<size_t>(t) * 4 * H;
      for (int q = 0; q < H; ++q) {
        const double dh_t = dh[i](t, q) + dh_rec[q];
        const double iv = cache.i[i](t, q), fv = cache.f[i](t, q);
        const double gv = cache.g[i](t, q), ov = cache.o[i](t, q);
        const double tc = cache.tanh_c[i](t, q);
        const double c_prev = t > 0 ? cache.c[i](t - 1, q) : 0.0;
        const double do_ = dh_t * tc;
        double dc_t = dc[q] + dh_t * ov * (1.0 - tc * tc);
        const double di = dc_t * gv;
        const double dg = dc_t * iv;
        const double df = dc_t * c_prev;
        dc[q] = dc_t * fv;
        dz[q] = di * iv * (1.0 - iv);
        dz[H + q] = df * fv * (1.0 - fv);
        dz[2 * H + q] = dg * (1.0 - gv * gv);
        dz[3 * H + q] = do_ * ov * (1.0 - ov);
      }
      double* dxt = dx[i].data() + static_cast<size_t>(t) * D;
      for (int d = 0; d < D; ++d) {
        double acc = 0.0;
        for (int r = 0; r < 4 * H; ++r) acc += wx(r, d) * dz[r];
        dxt[d] = acc;
      }
      for (int q = 0; q < H; ++q) {
        double acc = 0.0;
        for (int r = 0; r < 4 * H; ++r) acc += wh(r, q) * dz[r];
        dh_rec[q] = acc;
      }
    }
  }

  // parameter gradients: one thread owns a gate row, sums items/timesteps in order
#pragma omp parallel for schedule(static)
  for (int r = 0; r < 4 * H; ++r) {
    double* dwxr = dwx.data() + static_cast<size_t>(r) * D;
    double* dwhr = dwh.data() + static_cast<size_t>(r) * H;
    double acc_b = 0.0;
    for (int i = 0; i < items; ++i) {
      for (int t = 0; t < T; ++t) {
        const double g = dgates[i](t, r);
        acc_b += g;
        const double* xt = cache.x[i]->data() + static_cast<size_t>(t) * D;
        const double* hp = cache.h_prev_seq[i].data() + static_cast<size_t>(t) * H;
#pragma omp simd
        for (int d = 0; d < D; ++d) dwxr[d] += g * xt[d];
#pragma omp simd
        for (int q = 0; q < H; ++q) dwhr[q] += g * hp[q];
      }
    }
    db[r] += acc_b;
  }
}

double bce_loss(const std::vector<double>& p, const std::vector<double>& y) {
  double s = 0.0;
  for (size_t i = 0; i < p.size(); ++i)
    s += -(y[i] * std::log(p[i]) + (1.0 - y[i]) * std::log(1.0 - p[i]));
  return s / static_cast<double>(p.size());
}

std::vector<double> bce_grad(const std::vector<double>& p, const std::vector<double>& y) {
  const double inv_n = 1.0 / static_cast<double>(p.size());
  std::vector<double> d(p.size());
  for (size_t i = 0; i < p.size(); ++i)
    d[i] = (-y[i] / p[i] + (1.0 - y[i]) / (1.0 - p[i])) * inv_n;
  return d;
}

}  // namespace egd::kernels
