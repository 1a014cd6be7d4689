#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace psplit {

/// Real coordinate vector; the concrete Hilbert-space element everywhere in
/// the library.
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double inner(const Vec& a, const Vec& b);
bool all_finite(const Vec& v);
/// Throws std::domain_error naming `what` when v holds NaN/Inf.
void require_finite(const Vec& v, const char* what);

/// Linear operator with forward and adjoint actions.
///
/// Maps built from explicit matrices keep the matrix around so that
/// factorizations (see SpdSolveCache) do not need to probe columns. An
/// optional `norm_bound` carries an analytically known upper bound on the
/// operator norm (e.g. 2 for the 1-D forward difference).
class LinearMap {
 public:
  using Action = std::function<Vec(const Vec&)>;

  LinearMap(Eigen::Index rows, Eigen::Index cols, Action forward, Action adjoint);

  static LinearMap dense(Mat m);
  static LinearMap sparse(SparseMat m);
  static LinearMap identity(Eigen::Index n);
  static LinearMap zero(Eigen::Index rows, Eigen::Index cols);

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }

  Vec apply(const Vec& x) const;
  Vec apply_adjoint(const Vec& y) const;

  const Mat* dense_matrix() const { return dense_.get(); }
  const SparseMat* sparse_matrix() const { return sparse_.get(); }

  /// Explicit rows×cols matrix; probes columns when no matrix is attached.
  Mat materialize() const;

  std::optional<double> norm_bound() const { return norm_bound_; }
  LinearMap with_norm_bound(double bound) const;

  /// alpha * this
  LinearMap scaled(double alpha) const;
  /// this ∘ inner
  LinearMap compose(const LinearMap& inner) const;

 private:
  Eigen::Index rows_;
  Eigen::Index cols_;
  Action forward_;
  Action adjoint_;
  std::shared_ptr<const Mat> dense_;
  std::shared_ptr<const SparseMat> sparse_;
  std::optional<double> norm_bound_;
};

/// Largest |<Lx,y> - <x,L*y>| / (1 + |x||y|) over `samples` seeded random pairs.
double adjoint_mismatch(const LinearMap& map, int samples, std::uint64_t seed);

/// Power iteration on L*L from a seeded random start; returns sqrt of the
/// final Rayleigh quotient. Returns 0 for the zero map.
double operator_norm_estimate(const LinearMap& map, int iters = 200, std::uint64_t seed = 0);

/// Solves (Id + M*M) r = v with a Cholesky factorization computed once.
///
/// When M is K×N with K < N the K×K system (Id + M M*) is factored instead and
/// the solve goes through the Woodbury identity
///   (Id + M*M)^{-1} = Id - M* (Id + M M*)^{-1} M.
class SpdSolveCache {
 public:
  explicit SpdSolveCache(LinearMap source);

  Vec solve(const Vec& v) const;
  const LinearMap& source() const { return source_; }
  bool uses_woodbury() const { return woodbury_; }

 private:
  LinearMap source_;
  bool woodbury_ = false;
  Eigen::LLT<Mat> llt_;
};

Vec spd_solve(const SpdSolveCache& cache, const Vec& v);

}  // namespace psplit
