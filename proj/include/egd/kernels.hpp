#pragma once

#include <cstdint>
#include <vector>

#include "egd/tensor.hpp"

// Batched numeric kernels behind the network layers.
//
// egd::kernels is the production backend: loops are OpenMP-parallel over
// independent output slices (batch items, output channels, parameter rows),
// so for a fixed input every element is produced by exactly one thread with
// a fixed serial summation order. Results are bit-identical for any thread
// count.
//
// egd::kernels::serial is an independently written naive backend kept for
// testing and benchmarking against the parallel one.
namespace egd::kernels {

struct LstmCache {
  // per item: gate activations (i,f,g,o), cell states and tanh(cell), all T x H
  std::vector<Tensor> i, f, g, o, c, tanh_c, h_prev_seq;  // h_prev_seq: T x H (h_{t-1})
  std::vector<const Tensor*> x;                           // borrowed inputs, D x T
};

// ---- convolution (valid padding, stride 1, cross-correlation) ----
// x: batch of C_in x L, w: C_out x C_in x k, b: C_out, y: batch of C_out x (L-k+1)
void conv1d_forward(const Batch& x, const Tensor& w, const Tensor& b, Batch& y);
void conv1d_backward(const Batch& x, const Tensor& w, const Batch& dy, Batch& dx,
                     Tensor& dw, Tensor& db);

// ---- max pooling (non-overlapping, trailing remainder dropped) ----
// argmax: per item, C x Lp column indices of the winning input column (ties -> earliest)
void maxpool1d_forward(const Batch& x, int size, Batch& y,
                       std::vector<std::vector<int>>& argmax);
void maxpool1d_backward(const Batch& dy, const std::vector<std::vector<int>>& argmax,
                        int in_cols, Batch& dx);

// ---- dense (affine) ----
// x: batch of n-vectors, w: m x n, b: m, y: batch of m-vectors
void dense_forward(const Batch& x, const Tensor& w, const Tensor& b, Batch& y);
void dense_backward(const Batch& x, const Tensor& w, const Batch& dy, Batch& dx,
                    Tensor& dw, Tensor& db);

// ---- batch normalization over channels (N = items * length per channel) ----
void batchnorm_stats(const Batch& x, Tensor& mean, Tensor& var);
void batchnorm_forward(const Batch& x, const Tensor& gamma, const Tensor& beta,
                       const Tensor& mean, const Tensor& var, double eps, Batch& y);
void batchnorm_backward(const Batch& x, const Batch& dy, const Tensor& gamma,
                        const Tensor& mean, const Tensor& var, double eps, Batch& dx,
                        Tensor& dgamma, Tensor& dbeta);

// ---- elementwise activations ----
void relu_forward(const Batch& x, Batch& y);
void relu_backward(const Batch& x, const Batch& dy, Batch& dx);
// outputs clamped to [1e-7, 1 - 1e-7] so the loss stays finite
void sigmoid_forward(const Batch& x, Batch& y);
void sigmoid_backward(const Batch& y, const Batch& dy, Batch& dx);

// ---- LSTM layer (gate order i,f,g,o; zero initial state) ----
// x: batch of D x T, wx: 4H x D, wh: 4H x H, b: 4H, h: batch of H x T
void lstm_forward(const Batch& x, const Tensor& wx, const Tensor& wh, const Tensor& b,
                  LstmCache& cache, Batch& h);
void lstm_backward(const LstmCache& cache, const Tensor& wx, const Tensor& wh,
                   const Batch& dh, Batch& dx, Tensor& dwx, Tensor& dwh, Tensor& db);

// ---- binary cross entropy, batch mean reduction ----
// p must already be clamped into [1e-7, 1 - 1e-7]
double bce_loss(const std::vector<double>& p, const std::vector<double>& y);
std::vector<double> bce_grad(const std::vector<double>& p, const std::vector<double>& y);

namespace serial {
void conv1d_forward(const Batch& x, const Tensor& w, const Tensor& b, Batch& y);
void conv1d_backward(const Batch& x, const Tensor& w, const Batch& dy, Batch& dx,
                     Tensor& dw, Tensor& db);
void dense_forward(const Batch& x, const Tensor& w, const Tensor& b, Batch& y);
void dense_backward(const Batch& x, const Tensor& w, const Batch& dy, Batch& dx,
                    Tensor& dw, Tensor& db);
void lstm_forward(const Batch& x, const Tensor& wx, const Tensor& wh, const Tensor& b,
                  LstmCache& cache, Batch& h);
void lstm_backward(const LstmCache& cache, const Tensor& wx, const Tensor& wh,
                   const Batch& dh, Batch& dx, Tensor& dwx, Tensor& dwh, Tensor& db);
void batchnorm_stats(const Batch& x, Tensor& mean, Tensor& var);
void maxpool1d_forward(const Batch& x, int size, Batch& y,
                       std::vector<std::vector<int>>& argmax);
}  // namespace serial

}  // namespace egd::kernels
