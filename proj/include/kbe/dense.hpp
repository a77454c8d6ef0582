// Row-major dense matrix plus the handful of BLAS-1/2 pieces the network needs.
// Sizes here are tiny (d <= 64-ish) and backprop wants raw element access, so a
// full linear-algebra dependency would buy nothing.
#pragma once

#include <cstddef>
#include <vector>

namespace kbe {

using Vec = std::vector<double>;

struct Mat {
  int rows = 0;
  int cols = 0;
  Vec data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
};

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// out = A x + b
inline void affine(const Mat& a, const Vec& x, const Vec& b, Vec& out) {
  out.assign(static_cast<std::size_t>(a.rows), 0.0);
  for (int r = 0; r < a.rows; ++r) {
    const double* row = a.row(r);
    double s = b[static_cast<std::size_t>(r)];
    for (int c = 0; c < a.cols; ++c) s += row[c] * x[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = s;
  }
}

// out += A^T y
inline void add_transpose_times(const Mat& a, const Vec& y, Vec& out) {
  for (int r = 0; r < a.rows; ++r) {
    const double* row = a.row(r);
    double yr = y[static_cast<std::size_t>(r)];
    for (int c = 0; c < a.cols; ++c) out[static_cast<std::size_t>(c)] += row[c] * yr;
  }
}

// A += scale * y x^T
inline void add_outer(Mat& a, const Vec& y, const Vec& x, double scale = 1.0) {
  for (int r = 0; r < a.rows; ++r) {
    double* row = a.row(r);
    double yr = scale * y[static_cast<std::size_t>(r)];
    for (int c = 0; c < a.cols; ++c) row[c] += yr * x[static_cast<std::size_t>(c)];
  }
}

inline void add_scaled(Vec& out, const Vec& x, double scale) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * x[i];
}

}  // namespace kbe
