#include "egd/layers.hpp"

#include <cmath>

#include "egd/errors.hpp"

namespace egd::ndgrad {

// ---- Conv1d ----

Conv1d::Conv1d(std::string name, int c_in, int c_out, int k)
    : c_in_(c_in),
      c_out_(c_out),
      k_(k),
      w_(name + ".w", Tensor::cube(c_out, c_in, k)),
      b_(name + ".b", Tensor::vec(c_out)) {}

void Conv1d::init(Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(c_in_) * k_);
  for (double& v : w_.value.v) v = rng.uniform(-s, s);
  for (double& v : b_.value.v) v = rng.uniform(-s, s);
}

void Conv1d::forward(const Batch& in, Batch& out, const PassCtx&) {
  in_cache_ = in;
  kernels::conv1d_forward(in, w_.value, b_.value, out);
}

void Conv1d::backward(const Batch& dout, Batch& din) {
  kernels::conv1d_backward(in_cache_, w_.value, dout, din, w_.grad, b_.grad);
}

void Conv1d::collect(std::vector<Param*>& ps) {
  ps.push_back(&w_);
  ps.push_back(&b_);
}

Shape Conv1d::out_shape(Shape in) const {
  if (in[0] != c_in_) throw ShapeError(w_.name + ": channel mismatch");
  if (in[1] < k_) throw ShapeError(w_.name + ": input shorter than kernel");
  return {c_out_, in[1] - k_ + 1};
}

// ---- MaxPool1d ----

void MaxPool1d::forward(const Batch& in, Batch& out, const PassCtx&) {
  in_cols_ = in[0].cols();
  kernels::maxpool1d_forward(in, size_, out, argmax_);
}

void MaxPool1d::backward(const Batch& dout, Batch& din) {
  kernels::maxpool1d_backward(dout, argmax_, in_cols_, din);
}

Shape MaxPool1d::out_shape(Shape in) const {
  if (in[1] < size_) throw ShapeError("maxpool: input shorter than pool size");
  return {in[0], in[1] / size_};
}

uint64_t MaxPool1d::nonsmooth_signature() const {
  uint64_t sig = 0x9E3779B1;
  for (const auto& item : argmax_)
    for (int a : item) sig = hash_mix(sig, static_cast<uint64_t>(a));
  return sig;
}

// ---- Dropout ----

Dropout::Dropout(double p, uint64_t tag) : p_(p), tag_(tag) {
  if (p < 0.0 || p >= 1.0) throw ValidationError("dropout p must be in [0,1)");
}

void Dropout::forward(const Batch& in, Batch& out, const PassCtx& ctx) {
  out = in;
  if (ctx.mode == Mode::Eval || p_ == 0.0) {
    scale_.clear();
    return;
  }
  const int items = static_cast<int>(in.size());
  scale_.assign(items, {});
  const uint64_t base = hash_mix(ctx.seed, tag_, ctx.step);
  const float keep_scale = static_cast<float>(1.0 / (1.0 - p_));
#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i) {
    const size_t n = in[i].size();
    scale_[i].resize(n);
    for (size_t j = 0; j < n; ++j) {
      const double u = hash_uniform(hash_mix(base, static_cast<uint64_t>(i), j));
      const float sc = u < p_ ? 0.0f : keep_scale;
      scale_[i][j] = sc;
      out[i][j] *= sc;
    }
  }
}

void Dropout::backward(const Batch& dout, Batch& din) {
  din = dout;
  if (scale_.empty()) return;
  const int items = static_cast<int>(dout.size());
#pragma omp parallel for schedule(static) if (items > 1)
  for (int i = 0; i < items; ++i)
    for (size_t j = 0; j < din[i].size(); ++j) din[i][j] *= scale_[i][j];
}

// ---- BatchNorm1d ----

BatchNorm1d::BatchNorm1d(std::string name, int channels)
    : channels_(channels),
      gamma_(name + ".gamma", Tensor::vec(channels)),
      beta_(name + ".beta", Tensor::vec(channels)),
      running_mean_(name + ".running_mean", Tensor::vec(channels), false),
      running_var_(name + ".running_var", Tensor::vec(channels), false) {
  gamma_.value.fill(1.0);
  running_var_.value.fill(1.0);
}

void BatchNorm1d::forward(const Batch& in, Batch& out, const PassCtx& ctx) {
  if (in[0].rows() != channels_) throw ShapeError(gamma_.name + ": channel mismatch");
  if (ctx.mode == Mode::Train) {
    in_cache_ = in;
    mean_ = Tensor::vec(channels_);
    var_ = Tensor::vec(channels_);
    kernels::batchnorm_stats(in, mean_, var_);
    kernels::batchnorm_forward(in, gamma_.value, beta_.value, mean_, var_, kEps, out);
    for (int c = 0; c < channels_; ++c) {
      running_mean_.value[c] = (1.0 - kMomentum) * running_mean_.value[c] + kMomentum * mean_[c];
      running_var_.value[c] = (1.0 - kMomentum) * running_var_.value[c] + kMomentum * var_[c];
    }
    has_stats_ = true;
  } else {
    if (!has_stats_)
      throw ValidationError(gamma_.name + ": eval mode before any training update");
    kernels::batchnorm_forward(in, gamma_.value, beta_.value, running_mean_.value,
                               running_var_.value, kEps, out);
  }
}

void BatchNorm1d::backward(const Batch& dout, Batch& din) {
  kernels::batchnorm_backward(in_cache_, dout, gamma_.value, mean_, var_, kEps, din,
                              gamma_.grad, beta_.grad);
}

void BatchNorm1d::collect(std::vector<Param*>& ps) {
  ps.push_back(&gamma_);
  ps.push_back(&beta_);
  ps.push_back(&running_mean_);
  ps.push_back(&running_var_);
}

// ---- Flatten ----

void Flatten::forward(const Batch& in, Batch& out, const PassCtx&) {
  in_shape_ = {in[0].rows(), in[0].cols()};
  out.resize(in.size());
  for (size_t i = 0; i < in.size(); ++i) {
    out[i] = Tensor::vec(static_cast<int>(in[i].size()));
    out[i].v = in[i].v;  // row-major order preserved
  }
}

void Flatten::backward(const Batch& dout, Batch& din) {
  din.resize(dout.size());
  for (size_t i = 0; i < dout.size(); ++i) {
    din[i] = Tensor::mat(in_shape_[0], in_shape_[1]);
    din[i].v = dout[i].v;
  }
}

// ---- Transpose ----

void Transpose::forward(const Batch& in, Batch& out, const PassCtx&) {
  out.resize(in.size());
  for (size_t i = 0; i < in.size(); ++i) {
    const int r = in[i].rows(), c = in[i].cols();
    out[i] = Tensor::mat(c, r);
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < c; ++b) out[i](b, a) = in[i](a, b);
  }
}

void Transpose::backward(const Batch& dout, Batch& din) {
  din.resize(dout.size());
  for (size_t i = 0; i < dout.size(); ++i) {
    const int r = dout[i].rows(), c = dout[i].cols();
    din[i] = Tensor::mat(c, r);
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < c; ++b) din[i](b, a) = dout[i](a, b);
  }
}

// ---- Dense ----

Dense::Dense(std::string name, int n_in, int n_out)
    : n_in_(n_in),
      n_out_(n_out),
      w_(name + ".w", Tensor::mat(n_out, n_in)),
      b_(name + ".b", Tensor::vec(n_out)) {}

void Dense::init(Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(n_in_));
  for (double& v : w_.value.v) v = rng.uniform(-s, s);
  for (double& v : b_.value.v) v = rng.uniform(-s, s);
}

void Dense::forward(const Batch& in, Batch& out, const PassCtx&) {
  in_cache_ = in;
  kernels::dense_forward(in, w_.value, b_.value, out);
}

void Dense::backward(const Batch& dout, Batch& din) {
  kernels::dense_backward(in_cache_, w_.value, dout, din, w_.grad, b_.grad);
}

void Dense::collect(std::vector<Param*>& ps) {
  ps.push_back(&w_);
  ps.push_back(&b_);
}

Shape Dense::out_shape(Shape in) const {
  if (in[1] != 0 || in[0] != n_in_)
    throw ShapeError(w_.name + ": expects flat input of size " + std::to_string(n_in_));
  return {n_out_, 0};
}

// ---- activations ----

void ReLU::forward(const Batch& in, Batch& out, const PassCtx&) {
  in_cache_ = in;
  kernels::relu_forward(in, out);
}

void ReLU::backward(const Batch& dout, Batch& din) {
  kernels::relu_backward(in_cache_, dout, din);
}

uint64_t ReLU::nonsmooth_signature() const {
  uint64_t sig = 0xA511E9;
  for (const auto& item : in_cache_) {
    uint64_t bits = 0;
    size_t n = 0;
    for (double v : item.v) {
      bits = (bits << 1) | (v > 0.0 ? 1u : 0u);
      if (++n % 64 == 0) {
        sig = hash_mix(sig, bits);
        bits = 0;
      }
    }
    sig = hash_mix(sig, bits);
  }
  return sig;
}

void Sigmoid::forward(const Batch& in, Batch& out, const PassCtx&) {
  kernels::sigmoid_forward(in, out);
  out_cache_ = out;
}

void Sigmoid::backward(const Batch& dout, Batch& din) {
  kernels::sigmoid_backward(out_cache_, dout, din);
}

uint64_t Sigmoid::nonsmooth_signature() const {
  uint64_t sig = 0x51C;
  for (const auto& item : out_cache_)
    for (double v : item.v)
      if (v <= 1e-7 || v >= 1.0 - 1e-7) sig = hash_mix(sig, 1);
  return sig;
}

// ---- Lstm ----

Lstm::Lstm(std::string name, int d_in, int hidden)
    : d_in_(d_in),
      hidden_(hidden),
      wx_(name + ".wx", Tensor::mat(4 * hidden, d_in)),
      wh_(name + ".wh", Tensor::mat(4 * hidden, hidden)),
      b_(name + ".b", Tensor::vec(4 * hidden)) {}

void Lstm::init(Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(hidden_));
  for (double& v : wx_.value.v) v = rng.uniform(-s, s);
  for (double& v : wh_.value.v) v = rng.uniform(-s, s);
  for (double& v : b_.value.v) v = rng.uniform(-s, s);
  for (int q = 0; q < hidden_; ++q) b_.value[hidden_ + q] += 1.0;  // forget gate
}

void Lstm::forward(const Batch& in, Batch& out, const PassCtx&) {
  if (in.empty() || in[0].rows() == 0) throw ValidationError("lstm: empty sequence");
  in_cache_ = in;
  kernels::lstm_forward(in_cache_, wx_.value, wh_.value, b_.value, cache_, out);
}

void Lstm::backward(const Batch& dout, Batch& din) {
  kernels::lstm_backward(cache_, wx_.value, wh_.value, dout, din, wx_.grad, wh_.grad,
                         b_.grad);
}

void Lstm::collect(std::vector<Param*>& ps) {
  ps.push_back(&wx_);
  ps.push_back(&wh_);
  ps.push_back(&b_);
}

Shape Lstm::out_shape(Shape in) const {
  if (in[1] != d_in_) throw ShapeError(wx_.name + ": input dim mismatch");
  return {in[0], hidden_};
}

// ---- Adam ----

void AdamState::init(const std::vector<Param*>& params) {
  t = 0;
  m.clear();
  v.clear();
  for (const Param* p : params) {
    Tensor z = p->value;
    z.fill(0.0);
    m.push_back(z);
    v.push_back(z);
  }
}

void adam_step(const std::vector<Param*>& params, AdamState& state) {
  if (state.m.size() != params.size()) throw ShapeError("adam: state/param count mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = *params[pi];
    if (!p.value.same_shape(p.grad)) throw ShapeError("adam: grad shape mismatch");
    Tensor& m = state.m[pi];
    Tensor& v = state.v[pi];
    for (size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      p.value[j] -= state.lr * mh / (std::sqrt(vh) + state.eps);
    }
  }
}

// ---- grad check ----

GradCheckResult grad_check(const std::vector<Param*>& params,
                           const std::function<double()>& loss_fn, double h,
                           const std::function<uint64_t()>& signature_fn, double atol) {
  GradCheckResult res;
  for (Param* p : params) {
    if (!p->trainable) continue;
    for (size_t j = 0; j < p->value.size(); ++j) {
      const double orig = p->value[j];
      p->value[j] = orig + h;
      const double lp = loss_fn();
      const uint64_t sig_p = signature_fn ? signature_fn() : 0;
      p->value[j] = orig - h;
      const double lm = loss_fn();
      const uint64_t sig_m = signature_fn ? signature_fn() : 0;
      p->value[j] = orig;
      if (sig_p != sig_m) {
        ++res.skipped_kinks;
        continue;
      }
      const double numeric = (lp - lm) / (2.0 * h);
      const double e =
          std::abs(p->grad[j] - numeric) <= atol ? 0.0 : rel_err(p->grad[j], numeric);
      ++res.checked;
      if (e > res.max_rel_err) {
        res.max_rel_err = e;
        res.worst_param = p->name;
        res.worst_index = j;
      }
    }
  }
  return res;
}

}  // namespace egd::ndgrad
