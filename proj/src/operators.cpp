#include "psplit/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace psplit {

namespace {

void require_positive_step(double gamma, const char* what) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument(std::string(what) + ": γ must be > 0");
}

Vec random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 3.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vec v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

}  // namespace

Vec soft_threshold(const Vec& x, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("soft_threshold: α must be >= 0");
  if (alpha == 0.0) return x;
  return x.unaryExpr([alpha](double v) { return v > alpha ? v - alpha : (v < -alpha ? v + alpha : 0.0); });
}

Vec box_project(const Vec& x, const Vec& lo, const Vec& hi) {
  if (lo.size() != x.size() || hi.size() != x.size()) throw DimensionError("box_project: dimension mismatch");
  if ((lo.array() > hi.array()).any()) throw std::invalid_argument("box_project: lo > hi");
  return x.cwiseMax(lo).cwiseMin(hi);
}

Vec prox_conjugate(const ResolventOp& f_prox, double gamma, const Vec& v) {
  require_positive_step(gamma, "prox_conjugate");
  return v - gamma * f_prox(1.0 / gamma, v / gamma);
}

Vec resolvent_of_inverse(const ResolventOp& m_res, double gamma, const Vec& v) {
  require_positive_step(gamma, "resolvent_of_inverse");
  return v - gamma * m_res(1.0 / gamma, v / gamma);
}

Vec partial_inverse_resolvent(const ResolventOp& a_res, const SubspaceProjector& proj, double gamma,
                              const Vec& u) {
  require_positive_step(gamma, "partial_inverse_resolvent");
  const Vec p = a_res(gamma, u);
  return 2.0 * proj(p) - p + (u - proj(u));
}

// -- resolvent library ------------------------------------------------------

ResolventOp zero_resolvent() {
  return {[](double, const Vec& v) { return v; }, "zero"};
}

ResolventOp l1_resolvent(double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("l1_resolvent: α must be >= 0");
  return {[alpha](double gamma, const Vec& v) { return soft_threshold(v, gamma * alpha); },
          "l1:" + std::to_string(alpha)};
}

ResolventOp box_resolvent(Vec lo, Vec hi) {
  if (lo.size() != hi.size()) throw DimensionError("box_resolvent: bound size mismatch");
  if ((lo.array() > hi.array()).any()) throw std::invalid_argument("box_resolvent: lo > hi");
  return {[lo = std::move(lo), hi = std::move(hi)](double, const Vec& v) { return box_project(v, lo, hi); },
          "box"};
}

ResolventOp interval_resolvent(double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("interval_resolvent: lo > hi");
  std::ostringstream key;
  key << "interval:" << lo << ":" << hi;
  return {[lo, hi](double, const Vec& v) { return Vec(v.cwiseMax(lo).cwiseMin(hi)); }, key.str()};
}

ResolventOp point_resolvent(Vec c) {
  return {[c = std::move(c)](double, const Vec& v) -> Vec {
            if (v.size() != c.size()) throw DimensionError("point_resolvent: dimension mismatch");
            return c;
          },
          "point"};
}

ResolventOp affine_resolvent(Mat s, Vec b) {
  if (s.rows() != s.cols() || s.rows() != b.size()) throw DimensionError("affine_resolvent: shape mismatch");
  return {[s = std::move(s), b = std::move(b)](double gamma, const Vec& v) -> Vec {
            Mat system = gamma * s;
            system.diagonal().array() += 1.0;
            return system.partialPivLu().solve(v - gamma * b);
          },
          "affine"};
}

ResolventOp quadratic_resolvent(double weight, Vec center) {
  if (weight < 0.0) throw std::invalid_argument("quadratic_resolvent: weight must be >= 0");
  return {[weight, c = std::move(center)](double gamma, const Vec& v) -> Vec {
            return (v + gamma * weight * c) / (1.0 + gamma * weight);
          },
          "quadratic:" + std::to_string(weight)};
}

namespace {

std::vector<std::string> split_descriptor(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : s) {
    if (ch == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  return parts;
}

double parse_number(const std::string& s, const std::string& descriptor) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("resolvent descriptor '" + descriptor + "': bad number '" + s + "'");
  }
}

}  // namespace

ResolventOp resolvent_from_descriptor(const std::string& descriptor, Eigen::Index dim) {
  const auto parts = split_descriptor(descriptor);
  const std::string& name = parts.front();
  auto arity = [&](std::size_t n) {
    if (parts.size() != n + 1)
      throw std::invalid_argument("resolvent descriptor '" + descriptor + "': expected " + std::to_string(n) +
                                  " parameter(s)");
  };
  auto num = [&](std::size_t i) { return parse_number(parts[i], descriptor); };

  ResolventOp op;
  if (name == "zero") {
    arity(0);
    op = zero_resolvent();
  } else if (name == "l1") {
    arity(1);
    op = l1_resolvent(num(1));
  } else if (name == "nonneg") {
    arity(0);
    op = {[](double, const Vec& v) { return Vec(v.cwiseMax(0.0)); }, "nonneg"};
  } else if (name == "interval") {
    arity(2);
    op = interval_resolvent(num(1), num(2));
  } else if (name == "point") {
    arity(1);
    op = point_resolvent(Vec::Constant(dim, num(1)));
  } else if (name == "scale") {
    arity(1);
    const double a = num(1);
    if (a < 0.0) throw std::invalid_argument("scale: coefficient must be >= 0");
    op = {[a](double gamma, const Vec& v) { return Vec(v / (1.0 + gamma * a)); }, ""};
  } else if (name == "shift") {
    arity(1);
    const double c = num(1);
    op = {[c](double gamma, const Vec& v) { return Vec((v.array() + gamma * c) / (1.0 + gamma)); }, ""};
  } else if (name == "quadratic") {
    arity(2);
    op = quadratic_resolvent(num(1), Vec::Constant(dim, num(2)));
  } else {
    throw std::invalid_argument("unknown resolvent descriptor '" + descriptor + "'");
  }
  op.descriptor = descriptor;
  return op;
}

std::vector<std::string> resolvent_registry_keys() {
  return {"zero", "l1:<alpha>", "nonneg", "interval:<lo>:<hi>", "point:<c>", "scale:<a>", "shift:<c>",
          "quadratic:<w>:<c>"};
}

// -- forward operators ------------------------------------------------------

ForwardOp zero_forward(Eigen::Index dim) {
  return {[dim](const Vec& x) -> Vec {
            if (x.size() != dim) throw DimensionError("zero_forward: dimension mismatch");
            return Vec::Zero(dim);
          },
          0.0, 0.0, "zero"};
}

ForwardOp affine_forward(Mat s, Vec b) {
  if (s.rows() != s.cols() || s.rows() != b.size()) throw DimensionError("affine_forward: shape mismatch");
  Eigen::JacobiSVD<Mat> svd(s);
  const double beta = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  double zeta = 0.0;
  if ((s - s.transpose()).norm() <= 1e-12 * (1.0 + s.norm())) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(s);
    if (eig.eigenvalues().minCoeff() >= -1e-12 * (1.0 + beta)) zeta = eig.eigenvalues().maxCoeff();
  }
  return {[s = std::move(s), b = std::move(b)](const Vec& x) -> Vec { return s * x + b; }, beta, zeta, "affine"};
}

ForwardOp least_squares_gradient(LinearMap m, Vec z, double weight, double norm_of_m) {
  if (z.size() != m.rows()) throw DimensionError("least_squares_gradient: data size mismatch");
  const double zeta = weight * norm_of_m * norm_of_m;
  return {[m = std::move(m), z = std::move(z), weight](const Vec& x) -> Vec {
            return weight * m.apply_adjoint(m.apply(x) - z);
          },
          zeta, zeta, "least_squares"};
}

// -- subspace projectors ----------------------------------------------------

SubspaceProjector whole_space_projector() {
  return {[](const Vec& v) { return v; }, "whole"};
}

SubspaceProjector zero_subspace_projector() {
  return {[](const Vec& v) -> Vec { return Vec::Zero(v.size()); }, "zero"};
}

SubspaceProjector span_projector(const Mat& basis) {
  Eigen::HouseholderQR<Mat> qr(basis);
  const Eigen::Index rank = Eigen::FullPivLU<Mat>(basis).rank();
  auto q = std::make_shared<const Mat>(qr.householderQ() * Mat::Identity(basis.rows(), rank));
  return {[q](const Vec& v) -> Vec {
            if (v.size() != q->rows()) throw DimensionError("span_projector: dimension mismatch");
            return *q * (q->transpose() * v);
          },
          "span"};
}

SubspaceProjector kernel_projector(const LinearMap& t) {
  const Mat dense = t.materialize();
  auto tt = std::make_shared<const Mat>(dense);
  auto cod = std::make_shared<const Eigen::CompleteOrthogonalDecomposition<Mat>>(dense * dense.transpose());
  return {[tt, cod](const Vec& v) -> Vec {
            if (v.size() != tt->cols()) throw DimensionError("kernel_projector: dimension mismatch");
            return v - tt->transpose() * cod->solve(*tt * v);
          },
          "kernel"};
}

SubspaceProjector graph_kernel_projector(std::shared_ptr<const SpdSolveCache> cache) {
  return {[cache](const Vec& v) -> Vec {
            const LinearMap& m = cache->source();
            const Eigen::Index n = m.cols();
            const Eigen::Index k = m.rows();
            if (v.size() != n + k) throw DimensionError("graph_kernel_projector: dimension mismatch");
            Vec out(n + k);
            out.head(n) = cache->solve(v.head(n) + m.apply_adjoint(v.tail(k)));
            out.tail(k) = m.apply(out.head(n));
            return out;
          },
          "graph_kernel"};
}

// -- discrete gradients -----------------------------------------------------

LinearMap discrete_gradient_1d(Eigen::Index n) {
  if (n < 2) throw DimensionError("discrete_gradient_1d: n must be >= 2");
  LinearMap map(
      n - 1, n, [n](const Vec& x) -> Vec { return x.tail(n - 1) - x.head(n - 1); },
      [n](const Vec& y) -> Vec {
        Vec out(n);
        out[0] = -y[0];
        out.segment(1, n - 2) = y.head(n - 2) - y.segment(1, n - 2);
        out[n - 1] = y[n - 2];
        return out;
      });
  return map.with_norm_bound(2.0);
}

LinearMap discrete_gradient_2d(Eigen::Index h, Eigen::Index w) {
  if (h < 2 || w < 2) throw DimensionError("discrete_gradient_2d: h and w must be >= 2");
  const Eigen::Index nh = h * (w - 1);
  const Eigen::Index nv = (h - 1) * w;
  LinearMap map(
      nh + nv, h * w,
      [h, w, nh](const Vec& x) -> Vec {
        Vec out(nh + (h - 1) * w);
        for (Eigen::Index r = 0; r < h; ++r)
          for (Eigen::Index c = 0; c + 1 < w; ++c) out[r * (w - 1) + c] = x[r * w + c + 1] - x[r * w + c];
        for (Eigen::Index r = 0; r + 1 < h; ++r)
          for (Eigen::Index c = 0; c < w; ++c) out[nh + r * w + c] = x[(r + 1) * w + c] - x[r * w + c];
        return out;
      },
      [h, w, nh](const Vec& y) -> Vec {
        Vec out = Vec::Zero(h * w);
        for (Eigen::Index r = 0; r < h; ++r)
          for (Eigen::Index c = 0; c + 1 < w; ++c) {
            const double g = y[r * (w - 1) + c];
            out[r * w + c + 1] += g;
            out[r * w + c] -= g;
          }
        for (Eigen::Index r = 0; r + 1 < h; ++r)
          for (Eigen::Index c = 0; c < w; ++c) {
            const double g = y[nh + r * w + c];
            out[(r + 1) * w + c] += g;
            out[r * w + c] -= g;
          }
        return out;
      });
  return map.with_norm_bound(std::sqrt(8.0));
}

// -- contract samplers ------------------------------------------------------

double firm_nonexpansiveness_violation(const ResolventOp& res, Eigen::Index dim, double gamma, int samples,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const Vec u = random_vector(rng, dim);
    const Vec v = random_vector(rng, dim);
    const Vec d = res(gamma, u) - res(gamma, v);
    worst = std::max(worst, d.squaredNorm() - d.dot(u - v));
  }
  return worst;
}

ProjectorViolations projector_violations(const SubspaceProjector& proj, Eigen::Index dim, int samples,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  ProjectorViolations out;
  for (int s = 0; s < samples; ++s) {
    const Vec u = random_vector(rng, dim);
    const Vec v = random_vector(rng, dim);
    const double alpha = coef(rng);
    const Vec pu = proj(u);
    const Vec pv = proj(v);
    out.idempotence = std::max(out.idempotence, (proj(pu) - pu).norm());
    out.self_adjointness =
        std::max(out.self_adjointness, std::abs(pu.dot(v) - u.dot(pv)) / (1.0 + u.norm() * v.norm()));
    out.linearity = std::max(out.linearity, (proj(alpha * u + v) - (alpha * pu + pv)).norm());
  }
  return out;
}

double moreau_identity_violation(const ResolventOp& f_prox, const ResolventOp& conj_prox, Eigen::Index dim,
                                 double gamma, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Vec v = random_vector(rng, dim);
    const Vec lhs = f_prox(gamma, v) + gamma * conj_prox(1.0 / gamma, v / gamma);
    worst = std::max(worst, (lhs - v).norm());
  }
  return worst;
}

std::vector<ProxPair> shipped_prox_pairs(Eigen::Index dim) {
  std::vector<ProxPair> pairs;
  const double alpha = 0.7;
  pairs.push_back({"l1/linf-ball", l1_resolvent(alpha), interval_resolvent(-alpha, alpha)});
  pairs.push_back({"zero/origin", zero_resolvent(), point_resolvent(Vec::Zero(dim))});
  pairs.push_back({"nonneg/nonpos", resolvent_from_descriptor("nonneg", dim),
                   {[](double, const Vec& v) { return Vec(v.cwiseMin(0.0)); }, "nonpos"}});

  const double w = 1.7;
  Vec c = Vec::LinSpaced(dim, -1.0, 1.0);
  // f = (w/2)‖x-c‖², f*(u) = ‖u‖²/(2w) + ⟨u,c⟩
  pairs.push_back({"quadratic/quadratic*", quadratic_resolvent(w, c),
                   {[w, c](double t, const Vec& v) -> Vec { return (v - t * c) / (1.0 + t / w); }, "quadratic*"}});

  Vec lo = Vec::LinSpaced(dim, -2.0, -0.5);
  Vec hi = Vec::LinSpaced(dim, 0.25, 1.5);
  // f = ι_[lo,hi], f* = support function σ(u) = Σ max(lo_i u_i, hi_i u_i)
  pairs.push_back({"box/support", box_resolvent(lo, hi),
                   {[lo, hi](double t, const Vec& v) -> Vec {
                      Vec out(v.size());
                      for (Eigen::Index i = 0; i < v.size(); ++i) {
                        if (v[i] - t * hi[i] > 0.0)
                          out[i] = v[i] - t * hi[i];
                        else if (v[i] - t * lo[i] < 0.0)
                          out[i] = v[i] - t * lo[i];
                        else
                          out[i] = 0.0;
                      }
                      return out;
                    },
                    "support"}});
  return pairs;
}

}  // namespace psplit
