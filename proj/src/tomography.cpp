#include "psplit/tomography.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace psplit {

std::vector<double> uniform_angles(int count, double span_deg) {
  if (count < 1) throw std::invalid_argument("uniform_angles: count must be >= 1");
  if (!(span_deg > 0.0) || !std::isfinite(span_deg)) throw std::invalid_argument("uniform_angles: span must be > 0");
  std::vector<double> out(static_cast<std::size_t>(count));
  const double step = span_deg * std::numbers::pi / 180.0 / count;
  for (int k = 0; k < count; ++k) out[static_cast<std::size_t>(k)] = k * step;
  return out;
}

namespace {

struct Ray {
  double ox, oy, dx, dy;
  double t0, t1;
};

// Chord lengths of one ray through the unit-pixel grid.
void trace_ray(const Ray& ray, int h, int w, int row, std::vector<Eigen::Triplet<double>>& out) {
  const double xmin = -0.5 * w, xmax = 0.5 * w;
  const double ymin = -0.5 * h, ymax = 0.5 * h;
  double tlo = ray.t0, thi = ray.t1;
  auto clip = [&](double o, double d, double lo, double hi) {
    if (std::abs(d) < 1e-15) {
      if (o < lo || o > hi) thi = -std::numeric_limits<double>::infinity();
      return;
    }
    double a = (lo - o) / d, b = (hi - o) / d;
    if (a > b) std::swap(a, b);
    tlo = std::max(tlo, a);
    thi = std::min(thi, b);
  };
  clip(ray.ox, ray.dx, xmin, xmax);
  clip(ray.oy, ray.dy, ymin, ymax);
  if (!(thi > tlo)) return;

  std::vector<double> ts{tlo, thi};
  if (std::abs(ray.dx) >= 1e-15)
    for (int c = 0; c <= w; ++c) {
      const double t = (xmin + c - ray.ox) / ray.dx;
      if (t > tlo && t < thi) ts.push_back(t);
    }
  if (std::abs(ray.dy) >= 1e-15)
    for (int r = 0; r <= h; ++r) {
      const double t = (ymin + r - ray.oy) / ray.dy;
      if (t > tlo && t < thi) ts.push_back(t);
    }
  std::sort(ts.begin(), ts.end());
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double len = ts[k + 1] - ts[k];
    if (len <= 1e-12) continue;
    const double tm = 0.5 * (ts[k] + ts[k + 1]);
    const double mx = ray.ox + tm * ray.dx;
    const double my = ray.oy + tm * ray.dy;
    const int c = std::clamp(static_cast<int>(std::floor(mx - xmin)), 0, w - 1);
    const int r = std::clamp(static_cast<int>(std::floor(ymax - my)), 0, h - 1);
    out.emplace_back(row, r * w + c, len);
  }
}

}  // namespace

LinearMap radon_projector(int h, int w, const std::vector<double>& angles, int detectors, const TomoGeometry& geo) {
  if (h < 2 || w < 2) throw DimensionError("radon_projector: image must be at least 2×2");
  if (detectors < 1) throw std::invalid_argument("radon_projector: detectors must be >= 1");
  if (angles.empty()) throw std::invalid_argument("radon_projector: at least one angle required");
  for (double a : angles)
    if (!std::isfinite(a)) throw std::invalid_argument("radon_projector: non-finite angle");
  const double diag = std::hypot(static_cast<double>(h), static_cast<double>(w));
  const double spacing = geo.spacing > 0.0 ? geo.spacing : diag / detectors;
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw std::invalid_argument("radon_projector: bad detector spacing");
  if (geo.beam == BeamGeometry::fan) {
    if (!(geo.sod > 0.5 * diag)) throw std::invalid_argument("radon_projector: source must lie outside the image");
    if (!(geo.sid > geo.sod)) throw std::invalid_argument("radon_projector: detector must lie beyond the object");
  }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(angles.size() * static_cast<std::size_t>(detectors) * static_cast<std::size_t>(h + w));
  const double inf = std::numeric_limits<double>::infinity();
  int row = 0;
  for (double theta : angles) {
    const double dcx = -std::sin(theta), dcy = std::cos(theta);
    const double ex = std::cos(theta), ey = std::sin(theta);
    for (int j = 0; j < detectors; ++j, ++row) {
      const double s = (j - 0.5 * (detectors - 1)) * spacing;
      Ray ray{};
      if (geo.beam == BeamGeometry::parallel) {
        ray = {s * ex, s * ey, dcx, dcy, -inf, inf};
      } else {
        const double sx = -geo.sod * dcx, sy = -geo.sod * dcy;
        const double mag = geo.sid / geo.sod;
        const double px = sx + geo.sid * dcx + s * mag * ex;
        const double py = sy + geo.sid * dcy + s * mag * ey;
        const double len = std::hypot(px - sx, py - sy);
        ray = {sx, sy, (px - sx) / len, (py - sy) / len, 0.0, len};
      }
      trace_ray(ray, h, w, row, trips);
    }
  }
  SparseMat m(row, h * w);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return LinearMap::sparse(std::move(m));
}

LinearMap radon_projector(int h, int w, const TomoGeometry& geo) {
  return radon_projector(h, w, uniform_angles(geo.angles, geo.span_deg), geo.detectors, geo);
}

Vec shepp_logan(int n) {
  if (n < 16) throw DimensionError("shepp_logan: side must be >= 16");
  // intensity, semi-axis a, semi-axis b, centre x, centre y, rotation (degrees)
  static constexpr double table[10][6] = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},        {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
      {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},       {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
      {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},     {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
      {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},   {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
  };
  Vec img = Vec::Zero(static_cast<Eigen::Index>(n) * n);
  const double half = 0.5 * (n - 1);
  for (int r = 0; r < n; ++r) {
    const double y = (half - r) / half;
    for (int c = 0; c < n; ++c) {
      const double x = (c - half) / half;
      double v = 0.0;
      for (const auto& e : table) {
        const double phi = e[5] * std::numbers::pi / 180.0;
        const double dx = x - e[3], dy = y - e[4];
        const double xr = dx * std::cos(phi) + dy * std::sin(phi);
        const double yr = -dx * std::sin(phi) + dy * std::cos(phi);
        if ((xr * xr) / (e[1] * e[1]) + (yr * yr) / (e[2] * e[2]) <= 1.0) v += e[0];
      }
      img[static_cast<Eigen::Index>(r) * n + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

Vec poisson_sinogram(const Vec& clean, double scale, std::uint64_t seed) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("poisson_sinogram: scale must be > 0");
  std::mt19937_64 rng(seed);
  Vec out(clean.size());
  int clamped = 0;
  for (Eigen::Index i = 0; i < clean.size(); ++i) {
    double mean = clean[i];
    if (mean < 0.0) {
      mean = 0.0;
      ++clamped;
    }
    if (mean == 0.0) {
      out[i] = 0.0;
      continue;
    }
    std::poisson_distribution<long long> draw(scale * mean);
    out[i] = static_cast<double>(draw(rng)) / scale;
  }
  if (clamped > 0) spdlog::warn("poisson_sinogram: clamped {} negative entries to 0", clamped);
  return out;
}

double psnr(const Vec& x, const Vec& ref) {
  if (x.size() != ref.size()) throw DimensionError("psnr: dimension mismatch");
  const double peak = ref.size() ? ref.maxCoeff() : 0.0;
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: reference has no positive peak");
  const double mse = (x - ref).squaredNorm() / static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

// Phantom at any side >= 2: sides below 16 are block averages of a finer render.
Vec phantom_at(int n) {
  if (n >= 16) return shepp_logan(n);
  if (n < 2) throw DimensionError("phantom side must be >= 2");
  const int f = (16 + n - 1) / n;
  const int big = n * f;
  const Vec fine = shepp_logan(big);
  Vec out = Vec::Zero(static_cast<Eigen::Index>(n) * n);
  for (int r = 0; r < big; ++r)
    for (int c = 0; c < big; ++c)
      out[static_cast<Eigen::Index>(r / f) * n + c / f] += fine[static_cast<Eigen::Index>(r) * big + c];
  return out / static_cast<double>(f * f);
}

}  // namespace

TomoInstance make_tomo_instance(const TomoOptions& opts, std::uint64_t seed) {
  Vec truth = phantom_at(opts.size);
  LinearMap proj = radon_projector(opts.size, opts.size, opts.geometry);
  Vec clean = proj.apply(truth);
  const double peak = clean.maxCoeff();
  if (!(peak > 0.0)) throw std::runtime_error("make_tomo_instance: empty sinogram");
  Vec noisy = poisson_sinogram(clean, opts.peak_counts / peak, seed);
  const Eigen::Index n = static_cast<Eigen::Index>(opts.size) * opts.size;
  FusedLassoInstance p{proj, std::move(noisy), Vec::Zero(n), Vec::Ones(n), opts.alpha1, opts.alpha2,
                       discrete_gradient_2d(opts.size, opts.size)};
  p.norm_m = operator_norm_estimate(p.m, 200, seed);
  p.seed = seed;
  return TomoInstance{opts.size, opts.geometry, std::move(truth), std::move(clean), std::move(p)};
}

}  // namespace psplit
