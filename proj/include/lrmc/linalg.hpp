#pragma once

// Dense-matrix primitives: reduced SVD, tangent-space and mask projections,
// and power-iteration norm estimates for linear maps on matrices.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lrmc {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw Error(std::string(what) + ": matrix contains NaN or Inf");
  }
}

inline void require_same_shape(const Matrix& a, Index rows, Index cols,
                               std::string_view what) {
  if (a.rows() != rows || a.cols() != cols) {
    throw Error(std::string(what) + ": dimension mismatch (" +
                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                " vs " + std::to_string(rows) + "x" + std::to_string(cols) +
                ")");
  }
}

/// Trace inner product <A, B> = trace(A^T B).
inline double inner(const Matrix& a, const Matrix& b) {
  return (a.array() * b.array()).sum();
}

/// A set of (row, col) index pairs inside a rows x cols grid.
///
/// Membership is stored as a dense boolean grid, so pairs are always in range
/// and never duplicated.
class IndexMask {
 public:
  IndexMask() = default;
  IndexMask(Index rows, Index cols) : in_(BoolGrid::Constant(rows, cols, false)) {
    if (rows <= 0 || cols <= 0) throw Error("IndexMask: dimensions must be positive");
  }
  explicit IndexMask(BoolGrid grid) : in_(std::move(grid)) {}

  static IndexMask full(Index rows, Index cols) {
    IndexMask m(rows, cols);
    m.in_.setConstant(true);
    return m;
  }

  static IndexMask from_pairs(Index rows, Index cols,
                              const std::vector<std::pair<Index, Index>>& pairs) {
    IndexMask m(rows, cols);
    for (auto [i, j] : pairs) {
      if (i < 0 || i >= rows || j < 0 || j >= cols) {
        throw Error("IndexMask: pair (" + std::to_string(i) + "," +
                    std::to_string(j) + ") out of range");
      }
      if (m.in_(i, j)) {
        throw Error("IndexMask: duplicate pair (" + std::to_string(i) + "," +
                    std::to_string(j) + ")");
      }
      m.in_(i, j) = true;
    }
    return m;
  }

  Index rows() const { return in_.rows(); }
  Index cols() const { return in_.cols(); }
  Index size() const { return in_.count(); }
  bool empty() const { return size() == 0; }

  bool contains(Index i, Index j) const { return in_(i, j); }
  void insert(Index i, Index j) { in_(i, j) = true; }
  void erase(Index i, Index j) { in_(i, j) = false; }

  const BoolGrid& grid() const { return in_; }

  /// Members in row-major order.
  std::vector<std::pair<Index, Index>> members() const {
    std::vector<std::pair<Index, Index>> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (Index i = 0; i < rows(); ++i)
      for (Index j = 0; j < cols(); ++j)
        if (in_(i, j)) out.emplace_back(i, j);
    return out;
  }

  IndexMask complement() const { return IndexMask(BoolGrid(!in_)); }

  friend IndexMask operator|(const IndexMask& a, const IndexMask& b) {
    a.check_shape(b);
    return IndexMask(BoolGrid(a.in_ || b.in_));
  }
  friend IndexMask operator&(const IndexMask& a, const IndexMask& b) {
    a.check_shape(b);
    return IndexMask(BoolGrid(a.in_ && b.in_));
  }
  /// Set difference a \ b.
  friend IndexMask operator-(const IndexMask& a, const IndexMask& b) {
    a.check_shape(b);
    return IndexMask(BoolGrid(a.in_ && !b.in_));
  }
  friend bool operator==(const IndexMask& a, const IndexMask& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.in_ == b.in_).all();
  }

  bool is_subset_of(const IndexMask& other) const {
    check_shape(other);
    return (in_ && !other.in_).count() == 0;
  }

 private:
  void check_shape(const IndexMask& other) const {
    if (rows() != other.rows() || cols() != other.cols()) {
      throw Error("IndexMask: dimension mismatch");
    }
  }

  BoolGrid in_;
};

/// P_O(Z): Z on the mask, zero elsewhere.
inline Matrix project_mask(const IndexMask& mask, const Matrix& z) {
  require_same_shape(z, mask.rows(), mask.cols(), "project_mask");
  return mask.grid().select(z, 0.0);
}

/// Reduced SVD L = U diag(sigma) V^T of a rank-r matrix.
struct SvdFactors {
  Matrix U;
  Vector sigma;
  Matrix V;

  Index rank() const { return sigma.size(); }
  Index rows() const { return U.rows(); }
  Index cols() const { return V.rows(); }

  Matrix uv() const { return U * V.transpose(); }
  Matrix reconstruct() const { return U * sigma.asDiagonal() * V.transpose(); }
};

inline constexpr double kDefaultRankTol = 1e-9;

/// Keeps the singular values above rank_tol times the largest one.
inline SvdFactors reduced_svd(const Matrix& m, double rank_tol = kDefaultRankTol) {
  require_finite(m, "reduced_svd");
  if (!(rank_tol > 0.0)) throw Error("reduced_svd: rank_tol must be positive");
  if (m.size() == 0 || m.isZero(0.0)) throw Error("zero matrix has no reduced SVD");

  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw Error("reduced_svd: SVD backend did not converge");
  }
  const Vector& s = svd.singularValues();
  const double cutoff = rank_tol * s(0);
  Index r = 0;
  while (r < s.size() && s(r) > cutoff) ++r;

  return SvdFactors{svd.matrixU().leftCols(r), s.head(r), svd.matrixV().leftCols(r)};
}

/// Leading r components of f.
inline SvdFactors truncated(SvdFactors f, Index r) {
  if (r < 1 || r > f.rank()) {
    throw Error("truncated: rank " + std::to_string(r) + " outside [1, " + std::to_string(f.rank()) + "]");
  }
  f.U = f.U.leftCols(r).eval();
  f.V = f.V.leftCols(r).eval();
  f.sigma = f.sigma.head(r).eval();
  return f;
}

/// P_T(Z) = UU^T Z + Z VV^T - UU^T Z VV^T, evaluated in factored form.
inline Matrix project_T(const SvdFactors& f, const Matrix& z) {
  require_same_shape(z, f.rows(), f.cols(), "project_T");
  const Matrix utz = f.U.transpose() * z;  // r x n2
  const Matrix zv = z * f.V;               // n1 x r
  const Matrix utzv = utz * f.V;           // r x r
  return f.U * utz + (zv - f.U * utzv) * f.V.transpose();
}

/// P_{T-perp}(Z) = (I - UU^T) Z (I - VV^T).
inline Matrix project_T_perp(const SvdFactors& f, const Matrix& z) {
  require_same_shape(z, f.rows(), f.cols(), "project_T_perp");
  const Matrix a = z - f.U * (f.U.transpose() * z);
  return a - (a * f.V) * f.V.transpose();
}

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Power-iteration estimate of sup_{|X|_F = 1} |op(X)|_F for a map that is
/// self-adjoint under the trace inner product. Converged once two successive
/// estimates differ by less than tol.
template <class Op>
NormEstimate operator_norm(Op&& op, Index rows, Index cols, int iters, double tol,
                           std::uint64_t start_seed = 0x5eedULL) {
  if (rows <= 0 || cols <= 0) throw Error("operator_norm: dimensions must be positive");
  if (iters < 1) throw Error("operator_norm: iters must be >= 1");

  std::mt19937_64 gen(start_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) x(i, j) = normal(gen);
  x /= x.norm();

  NormEstimate est;
  double prev = -1.0;
  for (int k = 1; k <= iters; ++k) {
    Matrix y = op(x);
    const double v = y.norm();
    est.value = v;
    est.iterations = k;
    if (v == 0.0) {
      est.converged = true;
      break;
    }
    if (prev >= 0.0 && std::abs(v - prev) < tol) {
      est.converged = true;
      break;
    }
    prev = v;
    x = y / v;
  }
  return est;
}

/// Largest singular value. Exact SVD up to max_exact_dim, power iteration on
/// A^T A above that.
inline double spectral_norm(const Matrix& a, Index max_exact_dim = 512,
                            double tol = 1e-6) {
  if (a.size() == 0) return 0.0;
  if (std::max(a.rows(), a.cols()) <= max_exact_dim) {
    Eigen::BDCSVD<Matrix> svd(a);
    if (svd.info() != Eigen::Success) throw Error("spectral_norm: SVD did not converge");
    return svd.singularValues()(0);
  }
  std::mt19937_64 gen(0x5eedULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(a.cols());
  for (Index i = 0; i < x.size(); ++i) x(i) = normal(gen);
  x.normalize();
  double prev = 0.0;
  for (int k = 0; k < 1000; ++k) {
    Vector y = a.transpose() * (a * x);
    const double ny = y.norm();
    if (ny == 0.0) return 0.0;
    const double sigma = std::sqrt(ny);
    x = y / ny;
    if (std::abs(sigma - prev) < tol * std::max(1.0, sigma)) return sigma;
    prev = sigma;
  }
  return prev;
}

}  // namespace lrmc
