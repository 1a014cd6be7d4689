#include "gen.hpp"

using namespace psplit;
using testgen::Gen;
using testgen::Recorder;

namespace {

/// Block-diagonal resolvent on a stacked vector.
ResolventOp block_resolvent(std::vector<ResolventOp> blocks, std::vector<Eigen::Index> dims) {
  return {[blocks = std::move(blocks), dims = std::move(dims)](double g, const Vec& v) {
            Vec out(v.size());
            Eigen::Index at = 0;
            for (std::size_t k = 0; k < blocks.size(); ++k) {
              out.segment(at, dims[k]) = blocks[k](g, v.segment(at, dims[k]));
              at += dims[k];
            }
            return out;
          },
          "blocks"};
}

ResolventOp inverse_of(ResolventOp m) {
  return {[m = std::move(m)](double g, const Vec& v) { return resolvent_of_inverse(m, g, v); }, "inverse"};
}

/// Random two-by-two multivariate instance together with its stacked
/// single-variable form on z = (x₁, x₂, u₁, u₂).
struct MultiInstance {
  MultiProblemSpec spec;
  ProblemSpec stacked;
  std::vector<Mat> l;  // L₀₀, L₀₁, L₁₀ (L₁₁ = 0)

  explicit MultiInstance(Gen& g) {
    spec.primal_dims = {3, 2};
    spec.dual_dims = {2, 3};
    spec.a = {l1_resolvent(0.4), box_resolvent(Vec::Constant(2, -0.5), Vec::Constant(2, 0.7))};
    const Mat c0 = g.psd(3), c1 = g.psd(2);
    const Vec e0 = g.vec(3), e1 = g.vec(2);
    spec.c = {affine_forward(c0, e0), affine_forward(c1, e1)};
    const Mat basis = g.basis(3, 2);
    spec.v = {testgen::matrix_projector(testgen::dense_projector(basis)), whole_space_projector()};
    const Mat sb = g.skew(5) + 0.3 * g.psd(5);
    const Vec bb = g.vec(5);
    spec.b = affine_forward(sb, bb);
    spec.m = {l1_resolvent(0.5), interval_resolvent(-1.0, 1.0)};
    const Mat n0 = 0.5 * g.psd(2);
    spec.n_inv = {affine_forward(n0, Vec::Zero(2)), zero_forward(3)};
    const Mat d1 = g.psd(3);
    spec.d_inv = {zero_forward(2), affine_forward(d1, Vec::Zero(3))};
    l = {g.mat(2, 3), g.mat(3, 3), g.mat(2, 2)};
    spec.l = {{LinearMap::dense(l[0]), LinearMap::dense(l[1])}, {LinearMap::dense(l[2]), std::nullopt}};

    // stacked operators: A = (A₁, A₂, M₁⁻¹, M₂⁻¹), B couples through L, C = (C₁, C₂, D₁⁻¹, D₂⁻¹)
    Mat big_b = Mat::Zero(10, 10);
    big_b.topLeftCorner(5, 5) = sb;
    big_b.block(0, 5, 3, 2) = l[0].transpose();
    big_b.block(0, 7, 3, 3) = l[1].transpose();
    big_b.block(3, 5, 2, 2) = l[2].transpose();
    big_b.block(5, 5, 2, 2) = n0;
    big_b.block(5, 0, 2, 3) = -l[0];
    big_b.block(5, 3, 2, 2) = -l[2];
    big_b.block(7, 0, 3, 3) = -l[1];
    Vec big_bb = Vec::Zero(10);
    big_bb.head(5) = bb;
    Mat big_c = Mat::Zero(10, 10);
    big_c.block(0, 0, 3, 3) = c0;
    big_c.block(3, 3, 2, 2) = c1;
    big_c.block(7, 7, 3, 3) = d1;
    Vec big_e = Vec::Zero(10);
    big_e << e0, e1, Vec::Zero(5);
    Mat big_p = Mat::Identity(10, 10);
    big_p.topLeftCorner(3, 3) = testgen::dense_projector(basis);

    stacked.a = block_resolvent({spec.a[0], spec.a[1], inverse_of(spec.m[0]), inverse_of(spec.m[1])}, {3, 2, 2, 3});
    stacked.b = affine_forward(big_b, big_bb);
    stacked.c = affine_forward(big_c, big_e);
    stacked.v = testgen::matrix_projector(big_p);
  }
};

Vec weighted_average_stack(const Vec& z, const std::vector<double>& w, Eigen::Index n) {
  Vec avg = Vec::Zero(n);
  for (std::size_t k = 0; k < w.size(); ++k) avg += w[k] * z.segment(static_cast<Eigen::Index>(k) * n, n);
  return avg.replicate(static_cast<Eigen::Index>(w.size()), 1);
}

}  // namespace

TEST_SUITE("multivariate") {
  TEST_CASE("lifted constants") {
    MultiProblemSpec s;
    s.primal_dims = {2};
    s.dual_dims = {2};
    s.a = {zero_resolvent()};
    s.m = {zero_resolvent()};
    s.l = {{LinearMap::dense(2.0 * Mat::Identity(2, 2))}};
    auto k = lifted_constants(s);
    CHECK(k.ell == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(k.beta == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(k.zeta == 0.0);

    s.primal_dims = {2, 2};
    s.a.push_back(zero_resolvent());
    s.l.push_back({LinearMap::dense(2.0 * Mat::Identity(2, 2))});
    k = lifted_constants(s);
    CHECK(k.ell == doctest::Approx(16.0).epsilon(1e-12));
    // ℓ dominates ‖[L₁ L₂]‖² = 8
    CHECK(k.ell >= 8.0);

    s.b = affine_forward(3.0 * Mat::Identity(4, 4), Vec::Zero(4));
    s.n_inv = {affine_forward(5.0 * Mat::Identity(2, 2), Vec::Zero(2))};
    s.d_inv = {affine_forward(7.0 * Mat::Identity(2, 2), Vec::Zero(2))};
    k = lifted_constants(s);
    CHECK(k.beta == doctest::Approx(5.0 + 4.0).epsilon(1e-12));
    CHECK(k.zeta == doctest::Approx(7.0).epsilon(1e-12));
  }

  TEST_CASE("lifted constants dominate the stacked coupling norm") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Gen g(seed);
      const int I = g.integer(1, 3), J = g.integer(1, 3);
      MultiProblemSpec s;
      for (int i = 0; i < I; ++i) s.primal_dims.push_back(g.integer(1, 4)), s.a.push_back(zero_resolvent());
      for (int j = 0; j < J; ++j) s.dual_dims.push_back(g.integer(1, 4)), s.m.push_back(zero_resolvent());
      Mat big = Mat::Zero(s.dual_size(), s.primal_size());
      Eigen::Index col = 0;
      for (int i = 0; i < I; ++i) {
        s.l.emplace_back();
        Eigen::Index row = 0;
        for (int j = 0; j < J; ++j) {
          const Mat lij = g.mat(s.dual_dims[j], s.primal_dims[i]);
          s.l.back().push_back(LinearMap::dense(lij));
          big.block(row, col, lij.rows(), lij.cols()) = lij;
          row += s.dual_dims[j];
        }
        col += s.primal_dims[i];
      }
      const double stacked = Eigen::JacobiSVD<Mat>(big).singularValues()(0);
      CHECK(std::sqrt(lifted_constants(s).ell) >= stacked - 1e-6);
    }
  }

  TEST_CASE("spec consistency checks") {
    Gen g(1);
    MultiInstance inst(g);
    auto bad = inst.spec;
    bad.l[0][0] = LinearMap::dense(Mat::Ones(3, 3));
    CHECK_THROWS_AS(bad.check(), DimensionError);
    bad = inst.spec;
    bad.a.pop_back();
    CHECK_THROWS_AS(bad.check(), DimensionError);
    bad = inst.spec;
    bad.m.clear();
    CHECK_THROWS_AS(bad.check(), DimensionError);
    CHECK(inst.spec.primal_size() == 5);
    CHECK(inst.spec.dual_size() == 5);
  }

  TEST_CASE("multivariate solvers equal the single-variable method on the stacked space") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Gen g(seed);
      MultiInstance inst(g);
      const auto k = lifted_constants(inst.spec);
      MultiStart start;
      start.x = {inst.spec.v[0](g.vec(3)), g.vec(2)};
      start.u = {g.vec(2), g.vec(3)};
      Vec z0(10);
      z0 << start.x[0], start.x[1], start.u[0], start.u[1];
      {
        const double gamma = 0.9 * step_size_frpib_max(k.beta, k.zeta);
        Recorder multi, single;
        frpib_multi_solve(inst.spec, multi.config(200, gamma), start);
        frpib_solve(inst.stacked, single.config(200, gamma), z0, z0, Vec::Zero(10));
        CHECK(testgen::max_gap(multi.xs, single.xs) <= 1e-12);
        CHECK(testgen::max_gap(multi.ys, single.ys) <= 1e-12);
      }
      {
        const double gamma = 0.9 * step_size_fsdr_max(k.beta, k.zeta);
        Recorder multi, single;
        fpisdr_multi_solve(inst.spec, multi.config(200, gamma), start);
        fpisdr_solve(inst.stacked, single.config(200, gamma), z0, z0, Vec::Zero(10));
        CHECK(testgen::max_gap(multi.xs, single.xs) <= 1e-12);
      }
    }
  }

  TEST_CASE("multivariate limits are fixed points of the stacked iteration") {
    Gen g(11);
    MultiInstance inst(g);
    const auto r = frpib_multi_solve(inst.spec, testgen::converge(1e-13), {});
    REQUIRE(r.trace.status == RunStatus::converged);
    Recorder one;
    frpib_solve(inst.stacked, one.config(1, r.trace.gamma), r.trace.x, r.trace.x, r.trace.y);
    CHECK((one.xs[0] - r.trace.x).norm() <= 1e-9 * (1 + r.trace.x.norm()));
    CHECK((r.primal[0] - inst.spec.v[0](r.primal[0])).norm() <= 1e-10);
    CHECK(inst.spec.v[0](r.y[0]).norm() <= 1e-10);
    CHECK(r.y[1].norm() == 0.0);
    CHECK(r.dual.size() == 2);
  }

  TEST_CASE("single-block multivariate equals the composite solver") {
    Gen g(2);
    const Mat m = g.mat(5, 4);
    const Vec z = g.vec(5);
    const double nm = Eigen::JacobiSVD<Mat>(m).singularValues()(0);
    const auto l = discrete_gradient_1d(4);
    CompositeProblem p{box_resolvent(Vec::Constant(4, -1), Vec::Constant(4, 1)), l1_resolvent(0.3),
                       least_squares_gradient(LinearMap::dense(m), z, 1.0, nm), l};
    MultiProblemSpec s;
    s.primal_dims = {4};
    s.dual_dims = {3};
    s.a = {p.f};
    s.c = {p.h_grad};
    s.m = {p.g};
    s.l = {{l}};
    const auto k = composite_constants(p);
    CHECK(k.beta == doctest::Approx(2.0));
    CHECK(k.zeta == doctest::Approx(nm * nm));
    const auto lk = lifted_constants(s);
    CHECK(lk.beta == doctest::Approx(k.beta));
    CHECK(lk.zeta == doctest::Approx(k.zeta));

    for (int flavor = 0; flavor < 2; ++flavor) {
      const double gamma = 0.9 * (flavor ? step_size_fsdr_max(k.beta, k.zeta) : step_size_frpib_max(k.beta, k.zeta));
      Recorder multi, comp;
      MultiStart start;
      start.x = {g.vec(4)};
      start.u = {g.vec(3)};
      const auto rm = flavor ? fpisdr_multi_solve(s, multi.config(150, gamma), start)
                             : frpib_multi_solve(s, multi.config(150, gamma), start);
      const auto rc = flavor ? composite_fpisdr(p, comp.config(150, gamma), start.x[0], start.u[0])
                             : composite_frpib(p, comp.config(150, gamma), start.x[0], start.u[0]);
      REQUIRE(multi.xs.size() == comp.xs.size());
      for (std::size_t n = 0; n < comp.xs.size(); ++n)
        CHECK((multi.xs[n].head(4) - comp.xs[n]).norm() <= 1e-12 * (1 + comp.xs[n].norm()));
      CHECK((rm.dual[0] - rc.dual).norm() <= 1e-12 * (1 + rc.dual.norm()));
    }
  }

  TEST_CASE("composite solvers with V = H and L = 0 reduce to the plain methods") {
    Gen g(3);
    const Mat q = g.psd(4);
    const Vec b = g.vec(4);
    CompositeProblem p{l1_resolvent(0.2), zero_resolvent(), affine_forward(q, b), LinearMap::zero(2, 4)};
    ProblemSpec plain{p.f, zero_forward(4), p.h_grad};
    const double gamma = 0.5 * step_size_fsdr_max(0, q.norm());
    const Vec x0 = g.vec(4);
    Recorder a1, a2, b1, b2;
    composite_frpib(p, a1.config(60, gamma), x0, Vec::Zero(2));
    fhrb_solve(plain, a2.config(60, gamma), x0, x0);
    composite_fpisdr(p, b1.config(60, gamma), x0, Vec::Zero(2));
    fsdr_solve(plain, b2.config(60, gamma), x0, x0);
    CHECK(testgen::max_gap(a1.xs, a2.xs) <= 1e-14);
    CHECK(testgen::max_gap(b1.xs, b2.xs) <= 1e-14);
  }

  // A run that lands exactly on a floating-point fixed point stops early; past that
  // point the other run must stay at the same limit.
  void agree(const Recorder& cons, const Recorder& prod, Eigen::Index n) {
    REQUIRE(!cons.xs.empty());
    REQUIRE(!prod.xs.empty());
    const std::size_t len = std::max(cons.xs.size(), prod.xs.size());
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t i = std::min(k, cons.xs.size() - 1), j = std::min(k, prod.xs.size() - 1);
      CHECK((cons.xs[i] - prod.xs[j].head(n)).norm() <= 1e-12 * (1 + cons.xs[i].norm()));
      CHECK((cons.ys[i] - prod.ys[j]).norm() <= 1e-12 * (1 + cons.ys[i].norm()));
    }
  }

  TEST_CASE("consensus splitting equals the product-space method") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Gen g(seed);
      const Eigen::Index n = 3;
      const std::vector<double> w = {0.2, 0.5, 0.3};
      ConsensusSpec cs;
      cs.a = {l1_resolvent(0.3), interval_resolvent(-0.8, 0.9), affine_resolvent(g.monotone(n), g.vec(n))};
      cs.weights = w;
      const Mat sb = g.skew(n) + 0.2 * g.psd(n);
      const Mat sc = g.psd(n);
      const Vec bb = g.vec(n), bc = g.vec(n);
      cs.b = affine_forward(sb, bb);
      cs.c = affine_forward(sc, bc);

      std::vector<ResolventOp> scaled;
      for (std::size_t k = 0; k < 3; ++k)
        scaled.push_back({[a = cs.a[k], wk = w[k]](double t, const Vec& v) { return a(t / wk, v); }, "scaled"});
      Mat kb = Mat::Zero(9, 9), kc = Mat::Zero(9, 9);
      for (int k = 0; k < 3; ++k) kb.block(3 * k, 3 * k, 3, 3) = sb, kc.block(3 * k, 3 * k, 3, 3) = sc;
      ProblemSpec product{block_resolvent(scaled, {3, 3, 3}), affine_forward(kb, bb.replicate(3, 1)),
                          affine_forward(kc, bc.replicate(3, 1)),
                          {[w](const Vec& v) { return weighted_average_stack(v, w, 3); }, "diagonal"}};

      const Vec x0 = g.vec(n), xp = g.vec(n);
      std::vector<Vec> y0 = {g.vec(n), g.vec(n), Vec::Zero(n)};
      y0[2] = -(w[0] * y0[0] + w[1] * y0[1]) / w[2];
      Vec ys(9), xs0(9), xsp(9);
      ys << y0[0], y0[1], y0[2];
      xs0 << x0, x0, x0;
      xsp << xp, xp, xp;
      const double gamma = 0.8 * step_size_fsdr_max(cs.b.lipschitz, cs.c.cocoercivity_inverse);
      {
        Recorder cons, prod;
        consensus_frpib_solve(cs, cons.config(150, gamma), x0, xp, y0);
        frpib_solve(product, prod.config(150, gamma), xs0, xsp, ys);
        agree(cons, prod, n);
      }
      {
        Recorder cons, prod;
        consensus_fpisdr_solve(cs, cons.config(150, gamma), x0, xp, y0);
        fpisdr_solve(product, prod.config(150, gamma), xs0, xsp, ys);
        agree(cons, prod, n);
      }
    }
  }

  TEST_CASE("consensus finds the intersection-constrained zero") {
    ConsensusSpec cs;
    cs.a = {resolvent_from_descriptor("nonneg", 1), interval_resolvent(-1e300, 2.0)};
    cs.b = zero_forward(1);
    cs.c = affine_forward(Mat::Identity(1, 1), Vec::Constant(1, -3.0));
    for (auto* solve : {&consensus_frpib_solve, &consensus_fpisdr_solve}) {
      const auto t = (*solve)(cs, testgen::converge(1e-13), Vec::Zero(1), Vec::Zero(1), {});
      CHECK(t.status == RunStatus::converged);
      CHECK(t.x[0] == doctest::Approx(2.0).epsilon(1e-9));
    }
  }

  TEST_CASE("consensus keeps the weighted dual sum at zero") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Gen g(seed);
      const int K = g.integer(1, 5);
      ConsensusSpec cs;
      double total = 0.0;
      for (int k = 0; k < K; ++k) {
        cs.a.push_back(affine_resolvent(g.monotone(4), g.vec(4)));
        cs.weights.push_back(g.uniform(0.1, 1.0));
        total += cs.weights.back();
      }
      for (auto& w : cs.weights) w /= total;
      cs.b = affine_forward(g.skew(4), g.vec(4));
      cs.c = affine_forward(g.psd(4), g.vec(4));
      const auto w = cs.resolved_weights();
      Recorder r;
      const double gamma = 0.9 * step_size_frpib_max(cs.b.lipschitz, cs.c.cocoercivity_inverse);
      consensus_frpib_solve(cs, r.config(300, gamma), g.vec(4), g.vec(4));
      for (const auto& y : r.ys) CHECK(weighted_dual_sum(y, w).norm() <= 1e-10 * (1 + y.norm()));
    }
  }

  TEST_CASE("single-operator consensus is the unconstrained method") {
    Gen g(4);
    ConsensusSpec cs;
    cs.a = {affine_resolvent(g.monotone(3), g.vec(3))};
    cs.b = affine_forward(g.skew(3), g.vec(3));
    cs.c = affine_forward(g.psd(3), g.vec(3));
    ProblemSpec p{cs.a[0], cs.b, cs.c};
    const Vec x0 = g.vec(3), xp = g.vec(3);
    Recorder c1, f1, c2, f2;
    consensus_frpib_solve(cs, c1.config(100), x0, xp);
    fhrb_solve(p, f1.config(100), x0, xp);
    consensus_fpisdr_solve(cs, c2.config(100), x0, xp);
    fsdr_solve(p, f2.config(100), x0, xp);
    CHECK(testgen::max_gap(c1.xs, f1.xs) <= 1e-14);
    CHECK(testgen::max_gap(c2.xs, f2.xs) <= 1e-14);
  }

  TEST_CASE("consensus input validation") {
    ConsensusSpec cs;
    cs.b = zero_forward(2);
    cs.c = affine_forward(Mat::Identity(2, 2), Vec::Zero(2));
    CHECK_THROWS_AS(cs.resolved_weights(), std::invalid_argument);
    cs.a = {zero_resolvent(), zero_resolvent()};
    CHECK(cs.resolved_weights() == std::vector<double>{0.5, 0.5});
    cs.weights = {0.7, 0.7};
    CHECK_THROWS_AS(cs.resolved_weights(), std::invalid_argument);
    cs.weights = {1.0, 0.0};
    CHECK_THROWS_AS(cs.resolved_weights(), std::invalid_argument);
    cs.weights = {};
    CHECK_THROWS_AS(consensus_frpib_solve(cs, SolverConfig{}, Vec::Zero(2), Vec::Zero(2), {Vec::Ones(2), Vec::Ones(2)}),
                    std::invalid_argument);
    CHECK_THROWS_AS(weighted_dual_sum(Vec::Zero(5), {0.5, 0.5}), DimensionError);
  }
}
