#pragma once

#include <iosfwd>
#include <vector>

#include "crowdlens/error.hpp"

namespace crowdlens {

/// Dense row-major matrix of doubles.
class Mat {
public:
  Mat() = default;
  Mat(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(std::size_t(rows) * cols, fill) {}

  static Mat identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double operator()(int r, int c) const { return a_[std::size_t(r) * cols_ + c]; }
  double& operator()(int r, int c) { return a_[std::size_t(r) * cols_ + c]; }

  const std::vector<double>& data() const { return a_; }
  std::vector<double>& data() { return a_; }

  Mat transposed() const;
  Mat operator*(const Mat& other) const;
  Mat operator+(const Mat& other) const;
  Mat operator-(const Mat& other) const;
  Mat scaled(double s) const;

  double trace() const;
  double frobenius_norm() const;

  Mat col(int c) const;
  void set_col(int c, const Mat& v);

  bool operator==(const Mat&) const = default;

private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> a_;
};

/// Eigenpairs sorted by descending eigenvalue; vectors are unit-norm
/// columns in matching order.
struct SymEig {
  std::vector<double> values;
  Mat vectors;
};

/// Cyclic Jacobi diagonalization of a symmetric matrix. Sweeps run until
/// the largest off-diagonal magnitude drops below 1e-12 * ||a||_F, up to
/// 100 sweeps. Eigenvector sign: first nonzero component non-negative.
SymEig sym_eig(const Mat& a);

/// Generalized symmetric problem S_b v = lambda S_w' v with Tikhonov
/// regularization S_w' = S_w + reg*I, reg = 1e-6 * trace(S_w)/dim
/// (1e-6 when the trace is zero), reduced through a Cholesky factor.
/// Returned columns are unit-norm, descending eigenvalue order.
SymEig gen_eig(const Mat& s_b, const Mat& s_w);

/// Regularization constant gen_eig applies; exposed for residual checks.
double gen_eig_regularization(const Mat& s_w);

/// PCA basis of mean-centered column data via the N x N Gram matrix.
/// Returns d x k; columns are unit-norm eigenvectors of data * data^T
/// for the top k Gram eigenvalues above 1e-10 (fewer -> RankDeficient).
Mat gram_pca(const Mat& data, int k);

/// Text form: "MAT <rows> <cols>" then one row per line, values in
/// shortest round-trip decimal.
void write_mat(std::ostream& os, const Mat& m);
Mat read_mat(std::istream& is);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

} // namespace crowdlens
