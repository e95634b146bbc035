#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "egd/kernels.hpp"
#include "egd/rng.hpp"
#include "egd/tensor.hpp"

namespace egd::ndgrad {

enum class Mode { Train, Eval };

struct PassCtx {
  Mode mode = Mode::Eval;
  uint64_t seed = 0;  // model seed, keys dropout masks
  uint64_t step = 0;  // training step counter
};

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Param(std::string n, Tensor v, bool train = true)
      : name(std::move(n)), value(std::move(v)), trainable(train) {
    grad = value;
    grad.fill(0.0);
  }
};

// shape passed through the layer stack: {rows, cols}; cols == 0 means 1-D
using Shape = std::array<int, 2>;

class Layer {
 public:
  virtual ~Layer() = default;
  virtual void forward(const Batch& in, Batch& out, const PassCtx& ctx) = 0;
  virtual void backward(const Batch& dout, Batch& din) = 0;
  virtual void collect(std::vector<Param*>&) {}
  virtual Shape out_shape(Shape in) const = 0;
  virtual void init(Rng&) {}

  // Hash of the nonsmooth decisions (ReLU masks, pool argmaxes, clamp hits)
  // taken by the last forward pass. Finite differencing is only valid when
  // both probe evaluations share the same signature.
  virtual uint64_t nonsmooth_signature() const { return 0; }
};

class Conv1d : public Layer {
 public:
  Conv1d(std::string name, int c_in, int c_out, int k);
  void forward(const Batch& in, Batch& out, const PassCtx& ctx) override;
  void backward(const Batch& dout, Batch& din) override;
  void collect(std::vector<Param*>& ps) override;
  Shape out_shape(Shape in) const override;
  void init(Rng& rng) override;

 private:
  int c_in_, c_out_, k_;
  Param w_, b_;
  Batch in_cache_;
};

class MaxPool1d : public Layer {
 public:
  explicit MaxPool1d(int size) : size_(size) {}
  void forward(const Batch& in, Batch& out, const PassCtx& ctx) override;
  void backward(const Batch& dout, Batch& din) override;
  Shape out_shape(Shape in) const override;
  uint64_t nonsmooth_signature() const override;

 private:
  int size_;
  int in_cols_ = 0;
  std::vector<std::vector<int>> argmax_;
};

// inverted dropout: kept units scaled by 1/(1-p); identity in eval mode.
// Masks come from a stateless hash of (seed, layer tag, step, element), so
// they are reproducible for any thread count.
class Dropout : public Layer {
 public:
  Dropout(double p, uint64_t tag);
  void forward(const Batch& in, Batch& out, const PassCtx& ctx) override;
  void backward(const Batch& dout, Batch& din) override;
  Shape out_shape(Shape in) const override { return in; }

 private:
  double p_;
  uint64_t tag_;
  std::vector<std::vector<float>> scale_;  // cached keep-scale per element
};

class BatchNorm1d : public Layer {
 public:
  BatchNorm1d(std::string name, int channels);
  void forward(const Batch& in, Batch& out, const PassCtx& ctx) override;
  void backward(const Batch& dout, Batch& din) override;
  void collect(std::vector<Param*>& ps) override;
  Shape out_shape(Shape in) const override { return in; }
  void mark_initialized() { has_stats_ = true; }
  bool initialized() const { return has_stats_; }

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

 private:
  int channels_;
  Param gamma_, beta_, running_mean_, running_var_;
  bool has_stats_ = false;
  Batch in_cache_;
  Tensor mean_, var_;
};

class Flatten : public Layer {
 public:
  void forward(const Batch& in, Batch& out, const PassCtx& ctx) override;
  void backward(const Batch& dout, Batch& din) override;
  Shape out_shape(Shape in) const override { return {in[0] * in[1], 0}; }

 private:
  Shape in_shape_{};
};

class Transpose : public Layer {
 public:
  void forward(const Batch& in, Batch& out, const PassCtx& ctx) override;
  void backward(const Batch& dout, Batch& din) override;
  Shape out_shape(Shape in) const override { return {in[1], in[0]}; }
};

class Dense : public Layer {
 public:
  Dense(std::string name, int n_in, int n_out);
  void forward(const Batch& in, Batch& out, const PassCtx& ctx) override;
  void backward(const Batch& dout, Batch& din) override;
  void collect(std::vector<Param*>& ps) override;
  Shape out_shape(Shape in) const override;
  void init(Rng& rng) override;

 private:
  int n_in_, n_out_;
  Param w_, b_;
  Batch in_cache_;
};

class ReLU : public Layer {
 public:
  void forward(const Batch& in, Batch& out, const PassCtx& ctx) override;
  void backward(const Batch& dout, Batch& din) override;
  Shape out_shape(Shape in) const override { return in; }
  uint64_t nonsmooth_signature() const override;

 private:
  Batch in_cache_;
};

class Sigmoid : public Layer {
 public:
  void forward(const Batch& in, Batch& out, const PassCtx& ctx) override;
  void backward(const Batch& dout, Batch& din) override;
  Shape out_shape(Shape in) const override { return in; }
  uint64_t nonsmooth_signature() const override;

 private:
  Batch out_cache_;
};

// One LSTM layer over a T x D sequence; emits all T hidden states (T x H).
class Lstm : public Layer {
 public:
  Lstm(std::string name, int d_in, int hidden);
  void forward(const Batch& in, Batch& out, const PassCtx& ctx) override;
  void backward(const Batch& dout, Batch& din) override;
  void collect(std::vector<Param*>& ps) override;
  Shape out_shape(Shape in) const override;
  void init(Rng& rng) override;

 private:
  int d_in_, hidden_;
  Param wx_, wh_, b_;
  Batch in_cache_;
  kernels::LstmCache cache_;
};

// ---- optimizer ----

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t t = 0;
  std::vector<Tensor> m, v;

  void init(const std::vector<Param*>& params);
};

void adam_step(const std::vector<Param*>& params, AdamState& state);

// ---- gradient verification ----

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  size_t worst_index = 0;
  size_t checked = 0;
  size_t skipped_kinks = 0;  // elements whose +-h probes crossed a kink
};

// Central differences against analytic grads already stored in the params.
// loss_fn must recompute the forward loss from current param values. When
// signature_fn is given (hash of the nonsmooth decisions of the evaluation
// just made), elements whose two probes land on different linear pieces are
// skipped: the difference quotient does not estimate a derivative there.
// Absolute agreement within atol counts as exact; central differences at
// step h cannot resolve differences below their truncation noise.
GradCheckResult grad_check(const std::vector<Param*>& params,
                           const std::function<double()>& loss_fn, double h = 1e-3,
                           const std::function<uint64_t()>& signature_fn = {},
                           double atol = 0.0);

inline double rel_err(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

}  // namespace egd::ndgrad
