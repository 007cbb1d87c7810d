#pragma once

#include <cstddef>
#include <vector>

namespace ffsv {

/// Dense 4-D array, (batch, channel, time, freq), row-major. Vectors and
/// matrices use degenerate trailing axes.
struct Tensor {
  int n = 0, c = 0, t = 0, f = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int n_, int c_, int t_, int f_)
      : n(n_), c(c_), t(t_), f(f_),
        v(static_cast<std::size_t>(n_) * c_ * t_ * f_, 0.0) {}

  static Tensor matrix(int rows, int cols) { return Tensor(rows, cols, 1, 1); }

  std::size_t size() const { return v.size(); }
  std::size_t index(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * c + j) * t + k) * f + l;
  }
  double& at(int i, int j, int k = 0, int l = 0) { return v[index(i, j, k, l)]; }
  double at(int i, int j, int k = 0, int l = 0) const { return v[index(i, j, k, l)]; }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && t == o.t && f == o.f;
  }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

}  // namespace ffsv
