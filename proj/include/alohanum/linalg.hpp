#ifndef ALOHANUM_LINALG_HPP_
#define ALOHANUM_LINALG_HPP_

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace alohanum {

using Vec = std::vector<double>;

namespace linalg {

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm_inf(const Vec& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline bool all_finite(const Vec& a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

/// Dense square matrix, row major. Sized for the small systems the solvers
/// assemble (a few hundred variables at most).
class Matrix {
 public:
  explicit Matrix(int n) : n_(n), a_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0) {}

  int size() const { return n_; }
  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }

  void add_diagonal(double v) {
    for (int i = 0; i < n_; ++i) (*this)(i, i) += v;
  }

  double trace() const {
    double t = 0.0;
    for (int i = 0; i < n_; ++i) t += (*this)(i, i);
    return t;
  }

 private:
  int n_;
  std::vector<double> a_;
};

// In-place lower Cholesky; false if the matrix is not positive definite.
inline bool cholesky_factor(Matrix& a) {
  const int n = a.size();
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    d = std::sqrt(d);
    a(j, j) = d;
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / d;
    }
  }
  return true;
}

inline Vec cholesky_backsolve(const Matrix& l, const Vec& b) {
  const int n = l.size();
  Vec y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = b[static_cast<std::size_t>(i)];
    for (int k = 0; k < i; ++k) s -= l(i, k) * y[static_cast<std::size_t>(k)];
    y[static_cast<std::size_t>(i)] = s / l(i, i);
  }
  Vec x(static_cast<std::size_t>(n));
  for (int i = n - 1; i >= 0; --i) {
    double s = y[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[static_cast<std::size_t>(k)];
    x[static_cast<std::size_t>(i)] = s / l(i, i);
  }
  return x;
}

/// Solve A x = b for symmetric positive (semi)definite A, regularizing the
/// diagonal as needed. Returns nullopt only if A is irreparably bad (NaNs).
inline std::optional<Vec> solve_spd(const Matrix& a, const Vec& b) {
  const double scale = std::max(1.0, std::abs(a.trace()) / std::max(1, a.size()));
  double ridge = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Matrix f = a;
    if (ridge > 0.0) f.add_diagonal(ridge);
    if (cholesky_factor(f)) {
      Vec x = cholesky_backsolve(f, b);
      if (all_finite(x)) return x;
    }
    ridge = (ridge == 0.0) ? 1e-12 * scale : ridge * 100.0;
  }
  return std::nullopt;
}

}  // namespace linalg
}  // namespace alohanum

#endif  // ALOHANUM_LINALG_HPP_
