#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "egd/errors.hpp"

namespace egd {

// Dense row-major buffer with 1 to 3 axes. Matrices are rows x cols;
// 3-axis tensors (conv kernels) are dim0 x dim1 x dim2.
struct Tensor {
  std::array<int, 3> dims{0, 0, 0};
  int nd = 0;
  std::vector<double> v;

  Tensor() = default;

  static Tensor vec(int n) {
    Tensor t;
    t.nd = 1;
    t.dims = {n, 1, 1};
    t.v.assign(static_cast<size_t>(n), 0.0);
    return t;
  }
  static Tensor mat(int r, int c) {
    Tensor t;
    t.nd = 2;
    t.dims = {r, c, 1};
    t.v.assign(static_cast<size_t>(r) * c, 0.0);
    return t;
  }
  static Tensor cube(int a, int b, int c) {
    Tensor t;
    t.nd = 3;
    t.dims = {a, b, c};
    t.v.assign(static_cast<size_t>(a) * b * c, 0.0);
    return t;
  }

  int rows() const { return dims[0]; }
  int cols() const { return dims[1]; }
  size_t size() const { return v.size(); }

  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  double& operator[](size_t i) { return v[i]; }
  double operator[](size_t i) const { return v[i]; }

  double& operator()(int r, int c) { return v[static_cast<size_t>(r) * dims[1] + c]; }
  double operator()(int r, int c) const { return v[static_cast<size_t>(r) * dims[1] + c]; }

  double& operator()(int a, int b, int c) {
    return v[(static_cast<size_t>(a) * dims[1] + b) * dims[2] + c];
  }
  double operator()(int a, int b, int c) const {
    return v[(static_cast<size_t>(a) * dims[1] + b) * dims[2] + c];
  }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }

  bool same_shape(const Tensor& o) const { return nd == o.nd && dims == o.dims; }

  std::string shape_str() const {
    std::string s = "(";
    for (int i = 0; i < nd; ++i) s += std::to_string(dims[i]) + (i + 1 < nd ? "x" : "");
    return s + ")";
  }
};

using Batch = std::vector<Tensor>;

inline void check_finite(const Tensor& t, const char* where) {
  for (double x : t.v) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in ") + where);
  }
}

inline void check_finite(const Batch& b, const char* where) {
  for (const Tensor& t : b) check_finite(t, where);
}

}  // namespace egd
