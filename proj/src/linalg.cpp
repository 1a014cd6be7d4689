#include "psplit/linalg.hpp"

#include <cmath>
#include <random>

namespace psplit {

double inner(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw DimensionError("inner: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
  return a.dot(b);
}

bool all_finite(const Vec& v) { return v.allFinite(); }

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw std::domain_error(std::string(what) + ": non-finite entry");
}

LinearMap::LinearMap(Eigen::Index rows, Eigen::Index cols, Action forward, Action adjoint)
    : rows_(rows), cols_(cols), forward_(std::move(forward)), adjoint_(std::move(adjoint)) {
  if (rows < 1 || cols < 1) throw DimensionError("LinearMap: dimensions must be positive");
}

LinearMap LinearMap::dense(Mat m) {
  auto shared = std::make_shared<const Mat>(std::move(m));
  LinearMap map(
      shared->rows(), shared->cols(), [shared](const Vec& x) -> Vec { return *shared * x; },
      [shared](const Vec& y) -> Vec { return shared->transpose() * y; });
  map.dense_ = shared;
  return map;
}

LinearMap LinearMap::sparse(SparseMat m) {
  auto shared = std::make_shared<const SparseMat>(std::move(m));
  LinearMap map(
      shared->rows(), shared->cols(), [shared](const Vec& x) -> Vec { return *shared * x; },
      [shared](const Vec& y) -> Vec { return shared->transpose() * y; });
  map.sparse_ = shared;
  return map;
}

LinearMap LinearMap::identity(Eigen::Index n) {
  LinearMap map(
      n, n, [](const Vec& x) { return x; }, [](const Vec& y) { return y; });
  map.norm_bound_ = 1.0;
  return map;
}

LinearMap LinearMap::zero(Eigen::Index rows, Eigen::Index cols) {
  LinearMap map(
      rows, cols, [rows](const Vec&) -> Vec { return Vec::Zero(rows); },
      [cols](const Vec&) -> Vec { return Vec::Zero(cols); });
  map.norm_bound_ = 0.0;
  return map;
}

Vec LinearMap::apply(const Vec& x) const {
  if (x.size() != cols_) throw DimensionError("LinearMap::apply: expected " + std::to_string(cols_) +
                                              " entries, got " + std::to_string(x.size()));
  return forward_(x);
}

Vec LinearMap::apply_adjoint(const Vec& y) const {
  if (y.size() != rows_) throw DimensionError("LinearMap::apply_adjoint: expected " + std::to_string(rows_) +
                                              " entries, got " + std::to_string(y.size()));
  return adjoint_(y);
}

Mat LinearMap::materialize() const {
  if (dense_) return *dense_;
  if (sparse_) return Mat(*sparse_);
  Mat out(rows_, cols_);
  Vec e = Vec::Zero(cols_);
  for (Eigen::Index j = 0; j < cols_; ++j) {
    e[j] = 1.0;
    out.col(j) = forward_(e);
    e[j] = 0.0;
  }
  return out;
}

LinearMap LinearMap::with_norm_bound(double bound) const {
  LinearMap copy = *this;
  copy.norm_bound_ = bound;
  return copy;
}

LinearMap LinearMap::scaled(double alpha) const {
  auto fwd = forward_;
  auto adj = adjoint_;
  LinearMap map(
      rows_, cols_, [fwd, alpha](const Vec& x) -> Vec { return alpha * fwd(x); },
      [adj, alpha](const Vec& y) -> Vec { return alpha * adj(y); });
  if (dense_) map.dense_ = std::make_shared<const Mat>(alpha * *dense_);
  if (norm_bound_) map.norm_bound_ = std::abs(alpha) * *norm_bound_;
  return map;
}

LinearMap LinearMap::compose(const LinearMap& inner_map) const {
  if (inner_map.rows() != cols_) throw DimensionError("LinearMap::compose: dimension mismatch");
  auto outer = *this;
  auto in = inner_map;
  LinearMap map(
      rows_, inner_map.cols(), [outer, in](const Vec& x) { return outer.apply(in.apply(x)); },
      [outer, in](const Vec& y) { return in.apply_adjoint(outer.apply_adjoint(y)); });
  if (norm_bound_ && inner_map.norm_bound_) map.norm_bound_ = *norm_bound_ * *inner_map.norm_bound_;
  return map;
}

double adjoint_mismatch(const LinearMap& map, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vec x(map.cols());
    Vec y(map.rows());
    for (auto& v : x) v = normal(rng);
    for (auto& v : y) v = normal(rng);
    const double lhs = inner(map.apply(x), y);
    const double rhs = inner(x, map.apply_adjoint(y));
    worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + x.norm() * y.norm()));
  }
  return worst;
}

double operator_norm_estimate(const LinearMap& map, int iters, std::uint64_t seed) {
  if (iters < 1) throw std::invalid_argument("operator_norm_estimate: iters must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vec v(map.cols());
  for (auto& x : v) x = normal(rng);
  v.normalize();
  double rayleigh = 0.0;
  for (int k = 0; k < iters; ++k) {
    Vec w = map.apply_adjoint(map.apply(v));
    rayleigh = v.dot(w);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
  }
  return std::sqrt(std::max(rayleigh, 0.0));
}

namespace {

// M^T M or M M^T without densifying sparse operands first.
Mat gram(const LinearMap& m, bool outer) {
  if (const SparseMat* s = m.sparse_matrix()) {
    SparseMat g = outer ? SparseMat(*s * s->transpose()) : SparseMat(s->transpose() * *s);
    return Mat(g);
  }
  const Mat d = m.materialize();
  if (outer) {
    Mat g = Mat::Zero(d.rows(), d.rows());
    g.selfadjointView<Eigen::Lower>().rankUpdate(d);
    return g.selfadjointView<Eigen::Lower>();
  }
  Mat g = Mat::Zero(d.cols(), d.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(d.transpose());
  return g.selfadjointView<Eigen::Lower>();
}

}  // namespace

SpdSolveCache::SpdSolveCache(LinearMap source) : source_(std::move(source)) {
  woodbury_ = source_.rows() < source_.cols();
  Mat system = gram(source_, woodbury_);
  system.diagonal().array() += 1.0;
  llt_.compute(system);
  if (llt_.info() != Eigen::Success) throw std::runtime_error("SpdSolveCache: Cholesky factorization failed");
}

Vec SpdSolveCache::solve(const Vec& v) const {
  if (v.size() != source_.cols()) throw DimensionError("spd_solve: dimension mismatch");
  if (woodbury_) return v - source_.apply_adjoint(llt_.solve(source_.apply(v)));
  return llt_.solve(v);
}

Vec spd_solve(const SpdSolveCache& cache, const Vec& v) { return cache.solve(v); }

}  // namespace psplit
