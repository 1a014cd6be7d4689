#pragma once

#include "psplit/fused_lasso.hpp"

namespace psplit {

enum class BeamGeometry { parallel, fan };

/// Image pixels are unit squares centred on the origin; row 0 is the top row.
/// Parallel rays at angle θ run along (−sin θ, cos θ), offset along
/// (cos θ, sin θ). Fan rays start at −sod·(−sin θ, cos θ) and hit a flat
/// detector at distance sid from the source.
struct TomoGeometry {
  BeamGeometry beam = BeamGeometry::parallel;
  int angles = 60;
  int detectors = 48;
  double span_deg = 180.0;
  double sod = 800.0;
  double sid = 1200.0;
  /// Detector pitch projected to the isocentre; 0 = image diagonal / detectors.
  double spacing = 0.0;
};

std::vector<double> uniform_angles(int count, double span_deg);

/// Ray-driven projector: entry (ray, pixel) is the chord length of the ray in
/// the pixel. Rows are ordered angle-major (ray = angle·detectors + detector).
LinearMap radon_projector(int h, int w, const std::vector<double>& angles, int detectors, const TomoGeometry& geo);
LinearMap radon_projector(int h, int w, const TomoGeometry& geo);

/// Modified Shepp–Logan phantom (10 ellipses) sampled at pixel centres, clamped to [0, 1].
Vec shepp_logan(int n);

/// Poisson(scale·clean_i)/scale per entry; negative means are clamped to 0.
Vec poisson_sinogram(const Vec& clean, double scale, std::uint64_t seed);

/// 10 log₁₀(max(ref)² / MSE); +∞ when x = ref.
double psnr(const Vec& x, const Vec& ref);

struct TomoInstance {
  int size = 32;
  TomoGeometry geometry;
  Vec truth;
  Vec clean_sinogram;
  /// M = projector, z = noisy sinogram, box [0, 1], L = 2-D gradient.
  FusedLassoInstance problem;
};

struct TomoOptions {
  int size = 32;
  TomoGeometry geometry;
  double alpha1 = 1.0;
  double alpha2 = 0.01;
  /// Expected counts at the sinogram maximum.
  double peak_counts = 1000.0;
};

TomoInstance make_tomo_instance(const TomoOptions& opts, std::uint64_t seed);

}  // namespace psplit
