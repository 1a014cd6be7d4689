#include "gen.hpp"

#include "psplit/linalg.hpp"

using namespace psplit;
using testgen::Gen;

TEST_SUITE("linalg") {
  TEST_CASE("inner product") {
    Vec a(2), b(2);
    a << 1, 2;
    b << 3, 4;
    CHECK(inner(a, b) == 11.0);
    CHECK(inner(a, Vec::Zero(2)) == 0.0);
    CHECK(inner(Vec::Unit(3, 0), Vec::Unit(3, 1)) == 0.0);
    CHECK_THROWS_AS(inner(a, Vec::Zero(3)), DimensionError);
  }

  TEST_CASE("finiteness guards") {
    Vec v = Vec::Ones(3);
    CHECK(all_finite(v));
    v[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(all_finite(v));
    CHECK_THROWS_AS(require_finite(v, "v"), std::domain_error);
  }

  TEST_CASE("dense and sparse maps agree with their matrices") {
    Gen g(1);
    const Mat m = g.mat(5, 3);
    const auto d = LinearMap::dense(m);
    const Vec x = g.vec(3), y = g.vec(5);
    CHECK((d.apply(x) - m * x).norm() < 1e-14);
    CHECK((d.apply_adjoint(y) - m.transpose() * y).norm() < 1e-14);
    const auto s = LinearMap::sparse(m.sparseView());
    CHECK((s.apply(x) - m * x).norm() < 1e-14);
    CHECK((s.materialize() - m).norm() < 1e-14);
    CHECK_THROWS_AS(d.apply(g.vec(4)), DimensionError);
    CHECK_THROWS_AS(d.apply_adjoint(g.vec(3)), DimensionError);
  }

  TEST_CASE("composition, scaling and norm bounds") {
    Gen g(2);
    const Mat a = g.mat(4, 3), b = g.mat(3, 6);
    const auto ab = LinearMap::dense(a).compose(LinearMap::dense(b));
    CHECK((ab.materialize() - a * b).norm() < 1e-12);
    CHECK((LinearMap::dense(a).scaled(-2.5).materialize() + 2.5 * a).norm() < 1e-12);
    CHECK(LinearMap::identity(4).norm_bound().value() == 1.0);
    CHECK(LinearMap::dense(a).with_norm_bound(7.0).norm_bound().value() == 7.0);
  }

  TEST_CASE("adjoint consistency holds for random dense maps") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Gen g(seed);
      const auto map = LinearMap::dense(g.mat(g.integer(1, 9), g.integer(1, 9)));
      CHECK(adjoint_mismatch(map, 100, seed) <= 1e-10);
    }
  }

  TEST_CASE("operator norm estimate: diagonal, identity, zero") {
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    CHECK(operator_norm_estimate(LinearMap::dense(d), 50, 0) == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(operator_norm_estimate(LinearMap::identity(5), 10, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(operator_norm_estimate(LinearMap::zero(3, 4), 10, 0) == 0.0);
  }

  TEST_CASE("operator norm estimate matches the largest singular value") {
    Gen g(3);
    const Mat m = g.mat(10, 8);
    const double oracle = Eigen::JacobiSVD<Mat>(m).singularValues()(0);
    CHECK(operator_norm_estimate(LinearMap::dense(m), 500, 3) == doctest::Approx(oracle).epsilon(1e-6));
  }

  TEST_CASE("operator norm estimate is nondecreasing in iterations and never exceeds the norm") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Gen g(seed);
      const Mat m = g.mat(g.integer(2, 12), g.integer(2, 12));
      const double oracle = Eigen::JacobiSVD<Mat>(m).singularValues()(0);
      double prev = 0.0;
      for (int iters : {1, 2, 5, 10, 50, 200}) {
        const double est = operator_norm_estimate(LinearMap::dense(m), iters, seed);
        CHECK(est >= prev - 1e-12);
        CHECK(est <= oracle + 1e-10);
        prev = est;
      }
    }
  }

  TEST_CASE("spd_solve closed forms") {
    Gen g(4);
    const Vec v = g.vec(5);
    CHECK((spd_solve(SpdSolveCache(LinearMap::zero(3, 5)), v) - v).norm() < 1e-14);
    CHECK((spd_solve(SpdSolveCache(LinearMap::identity(5)), v) - v / 2.0).norm() < 1e-14);
  }

  TEST_CASE("spd_solve matches the dense inverse, direct and Woodbury") {
    Gen g(5);
    for (auto [rows, cols] : {std::pair{6, 4}, std::pair{4, 6}}) {
      const Mat m = g.mat(rows, cols);
      const SpdSolveCache cache(LinearMap::dense(m));
      CHECK(cache.uses_woodbury() == (rows < cols));
      const Mat inv = (Mat::Identity(cols, cols) + m.transpose() * m).inverse();
      const Vec v = g.vec(cols);
      CHECK((spd_solve(cache, v) - inv * v).norm() <= 1e-10 * (1.0 + v.norm()));
    }
  }

  TEST_CASE("spd_solve residual invariant on random shapes") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      Gen g(seed);
      const auto map = LinearMap::dense(g.scale(0.01, 100.0) * g.mat(g.integer(1, 30), g.integer(1, 30)));
      const SpdSolveCache cache(map);
      const Vec v = g.vec(map.cols());
      const Vec r = cache.solve(v);
      CHECK((r + map.apply_adjoint(map.apply(r)) - v).norm() <= 1e-8 * v.norm());
    }
  }
}
