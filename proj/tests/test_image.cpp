#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <errcalc/image.hpp>
#include <errcalc/measure_space.hpp>

using namespace errcalc;

namespace {

const Functional x1 = Functional::coordinate(0);
const Functional x2 = Functional::coordinate(1);

// exp truncated at degree n
Functional taylor_exp(int n) {
  Functional f = Functional::constant(1.0);
  double fact = 1.0;
  for (int k = 1; k <= n; ++k) {
    fact *= k;
    f = f + x1.pow(k) * Functional::constant(1.0 / fact);
  }
  return f;
}

}  // namespace

TEST_CASE("conditional gamma of the identity map is exact") {
  const auto im = image_structure(gaussian_product(1), {x1}, 4000, 7u);
  CHECK(im.estimator.kind == CondExpEstimator::Kind::binning);
  CHECK(im.estimator.bins == 16);  // ceil(4000^(1/3))
  CHECK(im.cells.size() == 16);

  long total = 0;
  double mass = 0.0;
  for (const auto& c : im.cells) {
    CHECK(c.count == 250);  // distinct draws split the quantile grid evenly
    CHECK(c.mean(0, 0) == 1.0);
    CHECK(c.se(0, 0) == 0.0);
    total += c.count;
    mass += c.mass;
  }
  CHECK(total == 4000);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));

  Vector y(1);
  for (const double q : {-3.0, -0.4, 0.0, 1.7, 5.0}) {
    y[0] = q;
    CHECK(im.gammaX(y)(0, 0) == 1.0);
    CHECK(im.gammaF(y, x1) == 1.0);
  }
}

TEST_CASE("conditional gamma recovers the quadratic density") {
  // X = x1^2 has Gamma[X] = 4 x1^2 = 4 X, constant on every level set
  const auto im = image_structure(gaussian_product(1),
                                  {Functional::parse("x1^2")}, 40000, 11u);
  CHECK(im.estimator.bins == 35);
  for (const auto& c : im.cells) {
    CHECK(c.mean(0, 0) ==
          doctest::Approx(4.0 * c.center[0]).epsilon(1e-12));
    Vector y(1);
    y[0] = c.center[0];
    CHECK(im.gammaX(y)(0, 0) ==
          doctest::Approx(4.0 * c.center[0]).epsilon(1e-12));
  }

  // neighbor estimator on the same image, queried away from the bins
  CondExpEstimator knn;
  knn.kind = CondExpEstimator::Kind::knn;
  const auto imk = image_structure(gaussian_product(1),
                                   {Functional::parse("x1^2")}, 40000, 11u, knn);
  CHECK(imk.estimator.neighbors == 200);
  CHECK(imk.cells.empty());
  Vector y(1);
  y[0] = 1.0;
  CHECK(imk.gammaX(y)(0, 0) == doctest::Approx(4.0).epsilon(0.05));
  CHECK_THROWS_AS(imk.cell_at(y), EstimatorError);
}

TEST_CASE("two-axis images bin jointly") {
  const auto im = image_structure(gaussian_product(2), {x1, x2}, 10000, 3u);
  CHECK(im.estimator.bins == 22);
  CHECK(im.cells.size() >= 450);  // independent axes fill almost every cell
  double mass = 0.0;
  long total = 0;
  for (const auto& c : im.cells) {
    CHECK((c.mean - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    mass += c.mass;
    total += c.count;
  }
  CHECK(total == 10000);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(im.locate(Vector::Zero(2)) >= 0);
  CHECK_THROWS_AS(im.locate(Vector::Zero(3)), DimensionError);

  // strongly correlated image axes leave the contrarian corners empty
  const auto imc = image_structure(gaussian_product(2), {x1, x1 + x2}, 10000, 3u);
  Vector corner(2);
  corner << 3.5, -3.5;
  CHECK(imc.locate(corner) == -1);
  CHECK_THROWS_AS(imc.cell_at(corner), EstimatorError);
  CHECK(imc.locate(Vector::Zero(2)) >= 0);

  CondExpEstimator coarse;
  coarse.kind = CondExpEstimator::Kind::binning;
  coarse.bins = 10;
  const auto imb = image_structure(gaussian_product(2), {x1, x2}, 10000, 3u, coarse);
  CHECK(imb.estimator.bins == 10);
  CHECK(imb.cells.size() == 100);
}

TEST_CASE("neighbor estimator carries dimension three") {
  const auto im = image_structure(gaussian_product(3), {x1, x2, x1 * x2},
                                  20000, 17u);
  CHECK(im.estimator.kind == CondExpEstimator::Kind::knn);
  CHECK(im.estimator.neighbors == 142);
  CHECK(im.cells.empty());
  CHECK(im.locate(Vector::Zero(3)) == -1);
  CHECK_THROWS_AS(im.cell_at(Vector::Zero(3)), EstimatorError);

  // Gamma[x1, x1] = 1 exactly; the cross entries shrink near the origin
  const Matrix g = im.gammaX(Vector::Zero(3));
  CHECK(g(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(g(0, 2)) <= 0.2);   // Gamma[x1, x1 x2] = x2
  CHECK(g(2, 2) <= 0.3);             // Gamma[x1 x2] = x1^2 + x2^2
}

TEST_CASE("tower property is exact for cell-measurable statistics") {
  const auto im = image_structure(gaussian_product(2), {x1, x1 + x2}, 10000, 3u);
  const Functional g = Functional::parse("x1^2 + 0.5*x2");
  CHECK(tower_residual(im, g, [](long) { return 1.0; }) <= 1e-13);
  CHECK(tower_residual(im, g, [](long c) {
          return c % 3 == 0 ? 1.0 : -0.5;
        }) <= 1e-12);

  CondExpEstimator knn;
  knn.kind = CondExpEstimator::Kind::knn;
  const auto imk = image_structure(gaussian_product(3), {x1, x2, x1 * x2},
                                   1000, 5u, knn);
  CHECK_THROWS_AS(tower_residual(imk, g, [](long) { return 1.0; }),
                  EstimatorError);
}

TEST_CASE("pullback keeps closed shapes closed") {
  SUBCASE("identity map is structural") {
    const BaseFn u = BaseFn::poly_box(
        SparsePoly::coordinate(1, 0).pow(2), {Interval{0.5, 2.0}});
    const BaseFn p = pullback(u, {x1}, 1);
    REQUIRE(p.is_polybox());
    CHECK(!p.polybox().rotated());
    CHECK(p.polybox().box[0].lo == 0.5);
    CHECK(p.polybox().box[0].hi == 2.0);
    Vector w(1);
    for (const double t : {-1.0, 0.3, 0.6, 1.0, 1.99, 2.5}) {
      w[0] = t;
      CHECK(p.eval(w) == u.eval(w));
    }
  }

  SUBCASE("negated and scaled axes stay boxes") {
    const BaseFn u = BaseFn::indicator1d(0.25, 1.0);
    const BaseFn pn = pullback(u, {-x1}, 1);
    REQUIRE(pn.is_polybox());
    CHECK(!pn.polybox().rotated());
    CHECK(pn.polybox().box[0].lo == -1.0);
    CHECK(pn.polybox().box[0].hi == -0.25);

    const BaseFn ps = pullback(BaseFn::indicator1d(0.0, 2.0),
                               {Functional::parse("2*x1 + 1")}, 1);
    REQUIRE(ps.is_polybox());
    CHECK(ps.polybox().box[0].lo == -0.5);
    CHECK(ps.polybox().box[0].hi == 0.5);
  }

  SUBCASE("affine slabs become rotated boxes") {
    const BaseFn u = BaseFn::indicator1d(0.0, kInf);
    const BaseFn p = pullback(u, {x1 + x2}, 2);
    REQUIRE(p.is_polybox());
    CHECK(p.polybox().rotated());
    CHECK(p.polybox().rot(0, 0) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    Rng rng(41);
    for (int t = 0; t < 50; ++t) {
      const Vector w = rng.normal_vector(2);
      CHECK(p.eval(w) == (w[0] + w[1] >= 0.0 ? 1.0 : 0.0));
    }
  }

  SUBCASE("orthogonal affine pairs rotate jointly") {
    const BaseFn u = BaseFn::box({Interval{0.0, kInf}, Interval{0.0, kInf}});
    const BaseFn p = pullback(u, {x1 + x2, x1 - x2}, 2);
    REQUIRE(p.is_polybox());
    CHECK(p.polybox().rotated());
    Rng rng(42);
    for (int t = 0; t < 50; ++t) {
      const Vector w = rng.normal_vector(2);
      const double want =
          (w[0] + w[1] >= 0.0 && w[0] - w[1] >= 0.0) ? 1.0 : 0.0;
      CHECK(p.eval(w) == want);
    }
  }

  SUBCASE("oblique pairs fall back to direct evaluation") {
    const BaseFn u = BaseFn::box({Interval{0.0, kInf}, Interval{0.0, kInf}});
    const BaseFn p = pullback(u, {x1, x1 + x2}, 2);
    CHECK(p.is_generic());
    Rng rng(43);
    for (int t = 0; t < 50; ++t) {
      const Vector w = rng.normal_vector(2);
      const double want = (w[0] >= 0.0 && w[0] + w[1] >= 0.0) ? 1.0 : 0.0;
      CHECK(p.eval(w) == want);
    }
  }

  SUBCASE("single-variable quadratics solve to intervals") {
    const std::vector<Functional> sq = {Functional::parse("x1^2")};
    const BaseFn inner = pullback(BaseFn::indicator1d(0.0, 1.0), sq, 1);
    REQUIRE(inner.is_polybox());
    CHECK(inner.polybox().box[0].lo == -1.0);
    CHECK(inner.polybox().box[0].hi == 1.0);

    const BaseFn rays = pullback(BaseFn::indicator1d(1.0, kInf), sq, 1);
    REQUIRE(rays.is_lincomb());
    CHECK(rays.terms().size() == 2);
    Vector w(1);
    for (const double t : {-2.0, -1.2, -0.5, 0.0, 0.5, 1.2, 2.0}) {
      w[0] = t;
      CHECK(rays.eval(w) == (t * t >= 1.0 ? 1.0 : 0.0));
    }

    const BaseFn none = pullback(BaseFn::indicator1d(-2.0, -1.0), sq, 1);
    CHECK(none.constant_value() == 0.0);

    // completed square: x^2 + 2x in [0, 3) means |x + 1| in [1, 2)
    const BaseFn shifted = pullback(BaseFn::indicator1d(0.0, 3.0),
                                    {Functional::parse("x1^2 + 2*x1")}, 1);
    REQUIRE(shifted.is_lincomb());
    for (const double t : {-3.5, -2.5, -1.5, -1.0, 0.5, 1.5}) {
      w[0] = t;
      const double q = t * t + 2.0 * t;
      CHECK(shifted.eval(w) == (q >= 0.0 && q < 3.0 ? 1.0 : 0.0));
    }
  }

  SUBCASE("everything else evaluates generically") {
    const BaseFn u = BaseFn::indicator1d(0.0, 1.0);
    const BaseFn cross = pullback(u, {x1 * x2}, 2);
    CHECK(cross.is_generic());
    const BaseFn curved = pullback(u, {apply(Builtin::exp_fn, x1)}, 1);
    CHECK(curved.is_generic());
    Vector w(1);
    w[0] = -0.3;
    CHECK(curved.eval(w) == (std::exp(-0.3) < 1.0 ? 1.0 : 0.0));
  }

  SUBCASE("linear combinations pull back term by term") {
    const BaseFn u = BaseFn::lincomb({{2.0, BaseFn::indicator1d(0.0, 1.0)},
                                      {-1.0, BaseFn::indicator1d(1.0, 2.0)}});
    const BaseFn p = pullback(u, {Functional::parse("x1^2")}, 1);
    REQUIRE(p.is_lincomb());
    Vector w(1);
    for (const double t : {-1.3, -0.7, 0.0, 0.5, 1.1, 1.39}) {
      w[0] = t;
      Vector y(1);
      y[0] = t * t;
      CHECK(p.eval(w) == u.eval(y));
    }
  }

  SUBCASE("rank errors surface immediately") {
    CHECK_THROWS_AS(pullback(BaseFn::box({Interval{}, Interval{}}), {x1}, 1),
                    DimensionError);
    CHECK_THROWS_AS(
        pullback(BaseFn::indicator1d(0.0, 1.0), {Functional::parse("x3")}, 2),
        ArityError);
  }
}

TEST_CASE("pullbacks of slabs and rays integrate in closed form") {
  const auto space2 = make_gauss_hermite_product(2, 6);
  const BaseFn slab = pullback(BaseFn::indicator1d(0.0, kInf), {x1 + x2}, 2);
  const InnerResult ns = space2->norm_sq(slab);
  CHECK(ns.std_error == 0.0);
  CHECK(ns.value == doctest::Approx(0.5).epsilon(1e-12));

  // E[(w1 + w2); w1 + w2 >= 0] = sqrt(2 / pi) . sqrt(2) / 2 = 1 / sqrt(pi)
  const BaseFn ramp = pullback(
      BaseFn::poly_box(SparsePoly::coordinate(1, 0), {Interval{0.0, kInf}}),
      {x1 + x2}, 2);
  const InnerResult ir = space2->integrate(ramp);
  CHECK(ir.std_error == 0.0);
  CHECK(ir.value == doctest::Approx(0.5641895835477563).epsilon(1e-12));

  const BaseFn quadrant = pullback(
      BaseFn::box({Interval{0.0, kInf}, Interval{0.0, kInf}}),
      {x1 + x2, x1 - x2}, 2);
  const InnerResult qn = space2->norm_sq(quadrant);
  CHECK(qn.std_error == 0.0);
  CHECK(qn.value == doctest::Approx(0.25).epsilon(1e-12));

  const auto space1 = make_gauss_hermite(9);
  const BaseFn rays =
      pullback(BaseFn::indicator1d(1.0, kInf), {Functional::parse("x1^2")}, 1);
  const InnerResult rn = space1->integrate(rays);
  CHECK(rn.std_error == 0.0);
  CHECK(rn.value == doctest::Approx(0.31731050786291415).epsilon(1e-12));
}

TEST_CASE("pushforward evaluations factor through the pullback") {
  const auto s = gaussian_product(1);
  const auto d = build_dgradient(s);
  const auto nu = sample_hvalued_wn(chaos_space(s, 8), 1, 23u);

  // identity map: the image measure is the measure itself
  const auto dgx = mv_gradient(x1, d, nu);
  const auto noise = image_mvg(dgx, {x1});
  const std::vector<BaseFn> us = {BaseFn::indicator1d(0.0, 1.0),
                                  BaseFn::poly(SparsePoly::coordinate(1, 0)),
                                  BaseFn::constant(1, 1.0)};
  for (const auto& u : us)
    CHECK(image_eval(noise, u) == mvg_eval(dgx, u));

  // folding map: evaluation composes with the map under the integral
  const auto dgq = mv_gradient(Functional::parse("x1^2"), d, nu);
  const auto qnoise = image_mvg(dgq, {Functional::parse("x1^2")});
  const BaseFn u01 = BaseFn::indicator1d(0.0, 1.0);
  CHECK(image_eval(qnoise, u01) ==
        mvg_eval(dgq, pullback(u01, qnoise.X, 1)));
  CHECK(image_eval(qnoise, BaseFn::constant(1, 1.0)) ==
        mvg_eval(dgq, BaseFn::constant(1, 1.0)));

  CHECK_THROWS_AS(image_mvg(dgx, {x1}, 2), DimensionError);
  CHECK_THROWS_AS(image_mvg(dgx, {Functional::parse("x2")}, 0), ArityError);
}

TEST_CASE("pushforward variance of a folded composite") {
  const auto s = gaussian_product(1);
  const auto d = build_dgradient(s);
  const auto nu = sample_hvalued_wn(chaos_space(s, 8), 1, 29u);
  const auto dgq = mv_gradient(Functional::parse("x1^2"), d, nu);

  const BaseFn uw = pullback(BaseFn::indicator1d(0.0, 1.0),
                             {Functional::parse("x1^2")}, 1);
  const auto pp = prepare_pairing(dgq.pairing(0), uw);

  // int_{-1}^{1} 4 x^2 phi(x) dx, split between the truncation and its defect
  CHECK(pp.variance() + pp.defect ==
        doctest::Approx(0.7949921723951965).epsilon(1e-12));
  CHECK(pp.defect > 0.0);
  CHECK(pp.defect < 0.35);  // most of the mass sits inside degree 8

  const auto emp = realization_moments(pp, 6000, 91u);
  CHECK(std::abs(emp.variance() - pp.variance()) <=
        3.0 * emp.stderr_variance());
}

TEST_CASE("realized pushforward variances match the integrated density") {
  SUBCASE("folding map on one axis") {
    const auto s = gaussian_product(1);
    const auto d = build_dgradient(s);
    const auto nu = sample_hvalued_wn(chaos_space(s, 8), 1, 31u);
    const auto dgq = mv_gradient(Functional::parse("x1^2"), d, nu);
    const std::vector<BaseFn> sets = {
        BaseFn::indicator1d(0.0, 1.0), BaseFn::indicator1d(-0.5, 0.5),
        BaseFn::constant(1, 1.0),
        BaseFn::poly_box(SparsePoly::coordinate(1, 0), {Interval{0.0, 2.0}})};
    const auto rows = image_density_check(dgq, {Functional::parse("x1^2")},
                                          sets, 4000, 20000, 57u);
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) {
      CHECK(r.z <= 3.0);
      CHECK(r.truncated > 0.0);
      CHECK(std::abs(r.empirical - r.truncated) <= 3.0 * r.emp_stderr);
    }
  }

  SUBCASE("affine map off the axes") {
    const auto s = gaussian_product(2);
    const auto d = build_dgradient(s);
    const auto nu = sample_hvalued_wn(chaos_space(s, 6), 2, 37u);
    const auto dgs = mv_gradient(x1 + x2, d, nu);
    const std::vector<BaseFn> sets = {BaseFn::indicator1d(0.0, kInf),
                                      BaseFn::constant(1, 1.0)};
    const auto rows =
        image_density_check(dgs, {x1 + x2}, sets, 4000, 20000, 61u);
    REQUIRE(rows.size() == 2);
    // Gamma[x1 + x2] = 2, so the half-line target is exactly 1
    CHECK(rows[0].truncated + rows[0].defect ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rows[1].truncated == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(rows[1].defect == doctest::Approx(0.0).epsilon(1e-12));
    for (const auto& r : rows) CHECK(r.z <= 3.0);
  }
}

TEST_CASE("functional calculus on the image agrees with the estimate") {
  const auto im = image_structure(gaussian_product(1),
                                  {Functional::parse("x1^2")}, 40000, 11u);
  const auto grad = nabla_image(Functional::parse("x1^2"), 1);
  REQUIRE(grad.size() == 1);

  for (const auto& c : im.cells) {
    Vector y(1);
    y[0] = c.center[0];
    // Gamma_X[y -> y^2](c) = (2c)^2 . 4c = 16 c^3 on the estimator grid
    CHECK(im.gammaF(y, Functional::parse("x1^2")) ==
          doctest::Approx(16.0 * std::pow(c.center[0], 3)).epsilon(1e-10));
    // the square root representative has unit gradient norm: (1/(2 sqrt y))^2 . 4y = 1
    CHECK(im.gammaF(y, Functional::parse("sqrt(x1)")) ==
          doctest::Approx(1.0).epsilon(1e-10));
    for (const auto method : {SqrtMethod::cholesky, SqrtMethod::eigen}) {
      const Vector dg =
          image_dirichlet_gradient(im, Functional::parse("x1^2"), y, method);
      CHECK(dg.squaredNorm() ==
            doctest::Approx(im.gammaF(y, Functional::parse("x1^2")))
                .epsilon(1e-8));
    }
  }

  const auto im2 = image_structure(gaussian_product(2), {x1, x2}, 10000, 3u);
  Vector y2(2);
  y2 << 0.7, -0.4;
  const Functional f = x1 * x2;
  CHECK(im2.gammaF(y2, f) ==
        doctest::Approx(0.4 * 0.4 + 0.7 * 0.7).epsilon(1e-12));
  const Vector dg2 = image_dirichlet_gradient(im2, f, y2);
  CHECK(dg2.squaredNorm() == doctest::Approx(im2.gammaF(y2, f)).epsilon(1e-12));

  CHECK_THROWS_AS(nabla_image(Functional::parse("x2"), 1), ArityError);
}

TEST_CASE("polynomial approximations contract in the weighted norm") {
  const auto im = image_structure(gaussian_product(1), {x1}, 20000, 13u);
  const std::vector<Functional> target = {apply(Builtin::exp_fn, x1)};

  double prev = -1.0;
  double last = 0.0;
  for (int n = 5; n <= 12; ++n) {
    const double dist =
        image_gradient_distance(im, nabla_image(taylor_exp(n), 1), target);
    if (prev >= 0.0) CHECK(dist < prev);
    prev = dist;
    last = dist;
  }
  CHECK(last < 1e-3);

  // evaluations are Cauchy in L2 over realizations: successive prepared
  // coefficients contract geometrically
  const auto s = gaussian_product(1);
  const auto d = build_dgradient(s);
  const auto nu = sample_hvalued_wn(chaos_space(s, 8), 1, 43u);
  const BaseFn u = BaseFn::indicator1d(0.0, 1.0);
  std::vector<Matrix> coeffs;
  for (int n = 2; n <= 8; ++n) {
    const auto dg = mv_gradient(taylor_exp(n).substitute({x1}), d, nu);
    coeffs.push_back(prepare_pairing(dg.pairing(0), u).coeff);
  }
  double prev_gap = kInf;
  for (std::size_t i = 0; i + 1 < coeffs.size(); ++i) {
    const double gap = (coeffs[i + 1] - coeffs[i]).squaredNorm();
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap < 1e-6);
}

TEST_CASE("nested image gradients compose") {
  const auto im = image_structure(gaussian_product(2), {x1, x2}, 10000, 19u);
  const std::vector<Functional> middle = {x1 + x2, x1 * x2};
  const std::vector<Functional> outer = {
      Functional::parse("x1^2"), x1 * x2, apply(Builtin::exp_fn, x2),
      Functional::parse("x1 - 2*x2^3")};
  const auto rep = compose_gradient_check(im, middle, outer);
  CHECK(rep.cells >= 450);
  CHECK(rep.scale > 0.1);
  CHECK(rep.residual <= 1e-8 * std::max(1.0, rep.scale));

  CHECK_THROWS_AS(
      compose_gradient_check(im, middle, {Functional::parse("x3")}),
      ArityError);
}

TEST_CASE("conditional jensen gap separates folding maps") {
  const auto s = gaussian_product(1);
  const auto d = build_dgradient(s);

  // linear functional of an injective image: both sides constant, gap zero
  const auto id = image_structure(s, {x1}, 40000, 23u);
  for (const auto& r : star_inequality_rows(id, d, x1)) {
    CHECK(r.lhs == 1.0);
    CHECK(r.rhs == 1.0);
    CHECK(r.gap == 0.0);
    CHECK(r.z == 0.0);
  }

  // injective image, curved functional: the gap is resolution noise
  for (const auto& r :
       star_inequality_rows(id, d, Functional::parse("x1^2"))) {
    CHECK(r.gap >= -3.0 * std::hypot(r.lhs_stderr, r.rhs_stderr));
    const double c = std::abs(r.center[0]);
    if (c >= 0.5 && c <= 1.5) CHECK(r.gap <= 0.05 * r.rhs);
  }

  // folding image: the conditional mean gradient cancels, the gap is the
  // whole quadratic form
  const auto fold =
      image_structure(s, {Functional::parse("x1^2")}, 40000, 23u);
  for (const auto& r : star_inequality_rows(fold, d, x1)) {
    CHECK(r.gap >= -3.0 * std::hypot(r.lhs_stderr, r.rhs_stderr));
    if (r.center[0] >= 0.5) {
      CHECK(r.z > 5.0);
      CHECK(r.gap > 0.9 * r.rhs);
    }
  }
}
