#include "crowdlens/matrix.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace crowdlens {

Mat Mat::identity(int n) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::transposed() const {
  Mat t(cols_, rows_);
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Mat Mat::operator*(const Mat& other) const {
  if (cols_ != other.rows_) fail(Errc::DimMismatch, "matrix product shape");
  Mat out(rows_, other.cols_);
  for (int r = 0; r < rows_; ++r) {
    for (int k = 0; k < cols_; ++k) {
      const double v = (*this)(r, k);
      if (v == 0.0) continue;
      const double* src = &other.a_[std::size_t(k) * other.cols_];
      double* dst = &out.a_[std::size_t(r) * other.cols_];
      for (int c = 0; c < other.cols_; ++c) dst[c] += v * src[c];
    }
  }
  return out;
}

Mat Mat::operator+(const Mat& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) fail(Errc::DimMismatch, "matrix sum shape");
  Mat out = *this;
  for (std::size_t i = 0; i < a_.size(); ++i) out.a_[i] += other.a_[i];
  return out;
}

Mat Mat::operator-(const Mat& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) fail(Errc::DimMismatch, "matrix diff shape");
  Mat out = *this;
  for (std::size_t i = 0; i < a_.size(); ++i) out.a_[i] -= other.a_[i];
  return out;
}

Mat Mat::scaled(double s) const {
  Mat out = *this;
  for (double& v : out.a_) v *= s;
  return out;
}

double Mat::trace() const {
  double t = 0;
  for (int i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

double Mat::frobenius_norm() const {
  double s = 0;
  for (double v : a_) s += v * v;
  return std::sqrt(s);
}

Mat Mat::col(int c) const {
  Mat v(rows_, 1);
  for (int r = 0; r < rows_; ++r) v(r, 0) = (*this)(r, c);
  return v;
}

void Mat::set_col(int c, const Mat& v) {
  for (int r = 0; r < rows_; ++r) (*this)(r, c) = v(r, 0);
}

namespace {

void require_symmetric(const Mat& a, const char* what) {
  if (a.rows() != a.cols()) fail(Errc::NotSymmetric, std::string(what) + " is not square");
  const double tol = 1e-9 * std::max(a.frobenius_norm(), 1e-300);
  for (int r = 0; r < a.rows(); ++r)
    for (int c = r + 1; c < a.cols(); ++c)
      if (std::abs(a(r, c) - a(c, r)) > tol)
        fail(Errc::NotSymmetric, std::string(what) + " asymmetric at (" + std::to_string(r) +
                                     "," + std::to_string(c) + ")");
}

// Flips eigenvector columns so the first component above noise level is
// non-negative; keeps test expectations deterministic.
void normalize_signs(Mat& vectors) {
  for (int c = 0; c < vectors.cols(); ++c) {
    double lead = 0.0;
    for (int r = 0; r < vectors.rows(); ++r) {
      if (std::abs(vectors(r, c)) > 1e-12) {
        lead = vectors(r, c);
        break;
      }
    }
    if (lead < 0.0)
      for (int r = 0; r < vectors.rows(); ++r) vectors(r, c) = -vectors(r, c);
  }
}

void sort_descending(SymEig& e) {
  const int n = static_cast<int>(e.values.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return e.values[i] > e.values[j]; });
  SymEig sorted;
  sorted.values.resize(n);
  sorted.vectors = Mat(e.vectors.rows(), n);
  for (int i = 0; i < n; ++i) {
    sorted.values[i] = e.values[order[i]];
    for (int r = 0; r < e.vectors.rows(); ++r)
      sorted.vectors(r, i) = e.vectors(r, order[i]);
  }
  e = std::move(sorted);
}

} // namespace

SymEig sym_eig(const Mat& input) {
  require_symmetric(input, "sym_eig input");
  const int n = input.rows();
  Mat a = input;
  // Work on the exactly symmetric average.
  for (int r = 0; r < n; ++r)
    for (int c = r + 1; c < n; ++c) {
      const double v = 0.5 * (a(r, c) + a(c, r));
      a(r, c) = v;
      a(c, r) = v;
    }
  Mat v = Mat::identity(n);
  const double normF = a.frobenius_norm();
  const double stop = 1e-12 * normF;

  auto max_offdiag = [&]() {
    double m = 0;
    for (int r = 0; r < n; ++r)
      for (int c = r + 1; c < n; ++c) m = std::max(m, std::abs(a(r, c)));
    return m;
  };

  bool converged = normF == 0.0 || n < 2 || max_offdiag() < stop;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < stop) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        const double h = t * apq;
        a(p, p) -= h;
        a(q, q) += h;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          if (k != p && k != q) {
            const double akp = a(k, p);
            const double akq = a(k, q);
            a(k, p) = akp - s * (akq + tau * akp);
            a(p, k) = a(k, p);
            a(k, q) = akq + s * (akp - tau * akq);
            a(q, k) = a(k, q);
          }
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = vkp - s * (vkq + tau * vkp);
          v(k, q) = vkq + s * (vkp - tau * vkq);
        }
      }
    }
    converged = max_offdiag() < stop;
  }
  if (!converged) fail(Errc::NoConvergence, "Jacobi sweeps exhausted");

  SymEig e;
  e.values.resize(n);
  for (int i = 0; i < n; ++i) e.values[i] = a(i, i);
  e.vectors = std::move(v);
  sort_descending(e);
  normalize_signs(e.vectors);
  return e;
}

namespace {

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
Mat cholesky(const Mat& a) {
  const int n = a.rows();
  Mat l(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c <= r; ++c) {
      double s = a(r, c);
      for (int k = 0; k < c; ++k) s -= l(r, k) * l(c, k);
      if (r == c) {
        if (s <= 0.0) fail(Errc::CholeskyFailure, "pivot " + std::to_string(s) + " at row " +
                                                      std::to_string(r));
        l(r, r) = std::sqrt(s);
      } else {
        l(r, c) = s / l(c, c);
      }
    }
  }
  return l;
}

// Solves L X = B for X, L lower-triangular.
Mat forward_solve(const Mat& l, const Mat& b) {
  const int n = l.rows();
  Mat x(n, b.cols());
  for (int c = 0; c < b.cols(); ++c) {
    for (int r = 0; r < n; ++r) {
      double s = b(r, c);
      for (int k = 0; k < r; ++k) s -= l(r, k) * x(k, c);
      x(r, c) = s / l(r, r);
    }
  }
  return x;
}

// Solves L^T X = B for X, L lower-triangular.
Mat backward_solve_t(const Mat& l, const Mat& b) {
  const int n = l.rows();
  Mat x(n, b.cols());
  for (int c = 0; c < b.cols(); ++c) {
    for (int r = n - 1; r >= 0; --r) {
      double s = b(r, c);
      for (int k = r + 1; k < n; ++k) s -= l(k, r) * x(k, c);
      x(r, c) = s / l(r, r);
    }
  }
  return x;
}

} // namespace

double gen_eig_regularization(const Mat& s_w) {
  const double tr = s_w.trace();
  if (tr == 0.0) return 1e-6;
  return 1e-6 * tr / s_w.rows();
}

SymEig gen_eig(const Mat& s_b, const Mat& s_w) {
  if (s_b.rows() != s_w.rows() || s_b.cols() != s_w.cols())
    fail(Errc::DimMismatch, "scatter matrices differ in shape");
  require_symmetric(s_b, "S_b");
  require_symmetric(s_w, "S_w");
  const int n = s_b.rows();
  const double reg = gen_eig_regularization(s_w);
  Mat sw = s_w;
  for (int i = 0; i < n; ++i) sw(i, i) += reg;

  const Mat l = cholesky(sw);
  // C = L^-1 S_b L^-T, symmetric by construction up to rounding.
  Mat c = forward_solve(l, forward_solve(l, s_b).transposed());
  for (int r = 0; r < n; ++r)
    for (int q = r + 1; q < n; ++q) {
      const double v = 0.5 * (c(r, q) + c(q, r));
      c(r, q) = v;
      c(q, r) = v;
    }
  SymEig reduced = sym_eig(c);
  // Map eigenvectors back and renormalize to unit length.
  Mat vectors = backward_solve_t(l, reduced.vectors);
  for (int col = 0; col < vectors.cols(); ++col) {
    double norm = 0;
    for (int r = 0; r < n; ++r) norm += vectors(r, col) * vectors(r, col);
    norm = std::sqrt(norm);
    if (norm > 0)
      for (int r = 0; r < n; ++r) vectors(r, col) /= norm;
  }
  normalize_signs(vectors);
  return SymEig{std::move(reduced.values), std::move(vectors)};
}

Mat gram_pca(const Mat& data, int k) {
  const int n = data.cols();
  if (k > n) fail(Errc::RankDeficient, "k exceeds sample count");
  const Mat gram = data.transposed() * data;
  const SymEig e = sym_eig(gram);
  int usable = 0;
  while (usable < n && e.values[usable] > 1e-10) ++usable;
  if (usable < k)
    fail(Errc::RankDeficient, "only " + std::to_string(usable) + " directions for k=" +
                                  std::to_string(k));
  Mat basis(data.rows(), k);
  for (int i = 0; i < k; ++i) {
    const double inv = 1.0 / std::sqrt(e.values[i]);
    for (int r = 0; r < data.rows(); ++r) {
      double s = 0;
      for (int j = 0; j < n; ++j) s += data(r, j) * e.vectors(j, i);
      basis(r, i) = s * inv;
    }
  }
  normalize_signs(basis);
  return basis;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_mat(std::ostream& os, const Mat& m) {
  os << "MAT " << m.rows() << " " << m.cols() << "\n";
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (c) os << ' ';
      os << format_double(m(r, c));
    }
    os << '\n';
  }
}

Mat read_mat(std::istream& is) {
  std::string tag;
  int rows = 0, cols = 0;
  if (!(is >> tag >> rows >> cols) || tag != "MAT" || rows < 0 || cols < 0)
    fail(Errc::IoFailure, "malformed MAT header");
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (!(is >> m(r, c))) fail(Errc::IoFailure, "truncated MAT body");
  return m;
}

} // namespace crowdlens
