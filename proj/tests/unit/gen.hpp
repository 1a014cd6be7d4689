#pragma once

#include "psplit/multivariate.hpp"

#include <doctest.h>

#include <random>
#include <vector>

namespace testgen {

using psplit::Mat;
using psplit::Vec;
using Index = Eigen::Index;

/// Seeded source for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed * 0x9e3779b97f4a7c15ULL + 1) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  /// Log-uniform on [lo, hi].
  double scale(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }

  Vec vec(Index n, double sigma = 1.0) {
    std::normal_distribution<double> d(0.0, sigma);
    Vec v(n);
    for (auto& e : v) e = d(rng_);
    return v;
  }
  Mat mat(Index r, Index c) {
    std::normal_distribution<double> d;
    Mat m(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) m(i, j) = d(rng_);
    return m;
  }
  Mat psd(Index n) {
    const Mat g = mat(n, n);
    return g * g.transpose() / static_cast<double>(n);
  }
  Mat skew(Index n) {
    const Mat g = mat(n, n);
    return 0.5 * (g - g.transpose());
  }
  /// S with S + Sᵀ ⪰ 0
  Mat monotone(Index n) { return psd(n) + skew(n); }
  /// Orthonormal basis of a random k-dimensional subspace of ℝⁿ.
  Mat basis(Index n, Index k) {
    Eigen::HouseholderQR<Mat> qr(mat(n, k));
    return qr.householderQ() * Mat::Identity(n, k);
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Dense projector onto span(basis) for an orthonormal basis.
inline Mat dense_projector(const Mat& q) { return q * q.transpose(); }

inline psplit::SubspaceProjector matrix_projector(const Mat& p) {
  return {[p](const Vec& v) -> Vec { return p * v; }, "matrix"};
}

/// Largest relative gap between two iterate sequences; +∞ on length mismatch.
inline double max_gap(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  if (a.size() != b.size() || a.empty()) return std::numeric_limits<double>::infinity();
  double gap = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) gap = std::max(gap, (a[k] - b[k]).norm() / (1.0 + b[k].norm()));
  return gap;
}

/// Solver config that runs exactly `iters` iterations and records every iterate.
struct Recorder {
  std::vector<Vec> xs;
  std::vector<Vec> ys;

  psplit::SolverConfig config(int iters, double gamma = 0.0) {
    psplit::SolverConfig cfg;
    cfg.max_iters = iters;
    cfg.tol = std::numeric_limits<double>::min();
    cfg.gamma = gamma;
    cfg.observer = [this](int, const Vec& x, const Vec& y) {
      xs.push_back(x);
      ys.push_back(y);
    };
    return cfg;
  }
};

inline psplit::SolverConfig converge(double tol = 1e-12, int max_iters = 200000) {
  psplit::SolverConfig cfg;
  cfg.tol = tol;
  cfg.max_iters = max_iters;
  return cfg;
}

}  // namespace testgen
