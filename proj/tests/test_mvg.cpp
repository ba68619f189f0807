#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <errcalc/mvg.hpp>

using namespace errcalc;

namespace {

std::vector<Functional> parse_all(const std::vector<const char*>& src) {
  std::vector<Functional> out;
  out.reserve(src.size());
  for (const char* s : src) out.push_back(Functional::parse(s));
  return out;
}

}  // namespace

TEST_CASE("gradient roots reproduce the gamma matrix") {
  const auto id2 = build_dgradient(gaussian_product(2));
  CHECK(id2.K == 2);
  CHECK(id2.root_const == Matrix::Identity(2, 2));

  Matrix diag = Matrix::Zero(2, 2);
  diag(0, 0) = 4.0;
  diag(1, 1) = 9.0;
  const auto dd = build_dgradient(gaussian_aniso(2, diag));
  CHECK(dd.root_const(0, 0) == 2.0);
  CHECK(dd.root_const(1, 1) == 3.0);
  CHECK(dd.root_const(0, 1) == 0.0);

  Matrix g(2, 2);
  g << 2.0, 1.0, 1.0, 2.0;
  for (const auto method : {SqrtMethod::cholesky, SqrtMethod::eigen}) {
    const auto d = build_dgradient(gaussian_aniso(2, g), method);
    const Matrix back = d.root_const.transpose() * d.root_const;
    CHECK((back - g).cwiseAbs().maxCoeff() <= 1e-12);
  }

  Matrix singular(2, 2);
  singular << 1.0, 1.0, 1.0, 1.0;  // rank one: Cholesky falls back to eigen
  const auto ds = build_dgradient(gaussian_aniso(2, singular));
  const Matrix back = ds.root_const.transpose() * ds.root_const;
  CHECK((back - singular).cwiseAbs().maxCoeff() <= 1e-12);

  const auto wide = build_dgradient(gaussian_product(2), SqrtMethod::cholesky, 4);
  CHECK(wide.root_const.rows() == 4);
  CHECK(wide.root_const.bottomRows(2).cwiseAbs().maxCoeff() == 0.0);

  ErrorStructure bad = gaussian_product(2);
  bad.gamma_const(1, 1) = -1.0;
  CHECK_THROWS_AS(build_dgradient(bad), FactorizationError);
  CHECK_THROWS_AS(build_dgradient(gaussian_product(2), SqrtMethod::cholesky, 1),
                  DimensionError);
}

TEST_CASE("squared gradient norm equals the quadratic form") {
  Matrix g(2, 2);
  g << 2.0, 1.0, 1.0, 2.0;
  const std::vector<ErrorStructure> structures = {gaussian_product(2),
                                                  gaussian_aniso(2, g)};
  const auto corpus = parse_all({"x1^2", "x1*x2", "sin(x1) + x2^3",
                                 "exp(x1/2) * cos(x2)", "tanh(x1*x2)",
                                 "1 + x1 + x1^2*x2"});
  for (const auto& s : structures) {
    for (const int k : {3, 4}) {  // auxiliary dimension dim and dim+2
      const auto d = build_dgradient(s, SqrtMethod::cholesky, k == 3 ? 0 : 4);
      Rng rng(77);
      for (int t = 0; t < 1000; ++t) {
        const Vector w = s.sample(rng);
        for (const auto& u : corpus) {
          const double lhs = d.apply(u, w).squaredNorm();
          const double rhs = gamma_bilinear(s, u, u, w);
          CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(rhs)));
        }
      }
    }
  }
}

TEST_CASE("composite application follows the chain rule") {
  const auto s = gaussian_product(2);
  const auto d = build_dgradient(s);
  const auto x1 = Functional::coordinate(0);
  const auto x2 = Functional::coordinate(1);
  Rng rng(3);

  for (int t = 0; t < 50; ++t) {
    const Vector w = s.sample(rng);
    // identity map passes the gradient through
    CHECK(dgrad_apply(d, Functional::coordinate(0), {x1}, w) == d.apply(x1, w));
    // cube of a coordinate
    const Vector v = dgrad_apply(d, Functional::parse("x1^3"), {x1}, w);
    CHECK(v[0] == doctest::Approx(3.0 * w[0] * w[0]).epsilon(1e-13));
    CHECK(v[1] == 0.0);
    // product map: gradient swaps the coordinates
    const Vector p = dgrad_apply(d, Functional::parse("x1*x2"), {x1, x2}, w);
    CHECK(p[0] == doctest::Approx(w[1]).epsilon(1e-13));
    CHECK(p[1] == doctest::Approx(w[0]).epsilon(1e-13));
  }

  // against direct application to the substituted composite
  const auto F = Functional::parse("x1^2 * x2 + sin(x2)");
  const std::vector<Functional> U = {Functional::parse("x1 + x2^2"),
                                     Functional::parse("x1 * x2")};
  const Functional composite = F.substitute(U);
  for (int t = 0; t < 200; ++t) {
    const Vector w = s.sample(rng);
    const Vector a = dgrad_apply(d, F, U, w);
    const Vector b = d.apply(composite, w);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, b.norm()));
  }
}

TEST_CASE("pairing the identity coordinate picks out one noise row") {
  const auto s = gaussian_product(2);
  const auto d = build_dgradient(s);
  const auto space = chaos_space(s, 4);
  const auto nu = sample_hvalued_wn(space, 2, 21u);
  const auto dgx = mv_gradient(Functional::coordinate(0), d, nu);

  CHECK(dgx.pairing().g == nu.g);  // same realization, not a copy
  CHECK(dgx.pairing().mix[0] == 1.0);
  CHECK(dgx.pairing().mix[1] == 0.0);

  for (const auto& f : test_function_corpus(2, 6, 91u)) {
    const double direct = space->expand(f).coeff.dot(nu.g.row(0));
    CHECK(mvg_eval(dgx, f) == direct);
  }
}

TEST_CASE("constant functionals give the zero measure") {
  const auto s = gaussian_product(1);
  const auto d = build_dgradient(s);
  const auto nu = sample_hvalued_wn(chaos_space(s, 6), 1, 5u);
  const auto dgc = mv_gradient(Functional::constant(3.5), d, nu);
  for (const auto& f : test_function_corpus(1, 5, 17u))
    CHECK(mvg_eval(dgc, f) == 0.0);
}

TEST_CASE("the gradient measure is linear in the functional") {
  const auto s = gaussian_product(2);
  const auto d = build_dgradient(s);
  const auto nu = sample_hvalued_wn(chaos_space(s, 5), 2, 33u);
  const auto x1 = Functional::coordinate(0);
  const auto x2 = Functional::coordinate(1);

  const auto dsum = mv_gradient(x1 + x2, d, nu);
  const auto d1 = mv_gradient(x1, d, nu);
  const auto d2 = mv_gradient(x2, d, nu);
  for (const auto& f : test_function_corpus(2, 8, 7u))
    CHECK(mvg_eval(dsum, f) == mvg_eval(d1, f) + mvg_eval(d2, f));

  const auto xa = Functional::parse("x1^2");
  const auto xb = Functional::parse("x1*x2");
  const auto mix = Functional::constant(2.5) * xa - Functional::constant(0.75) * xb;
  const auto dm = mv_gradient(mix, d, nu);
  const auto da = mv_gradient(xa, d, nu);
  const auto db = mv_gradient(xb, d, nu);
  for (const auto& f : test_function_corpus(2, 8, 7u)) {
    const double want = 2.5 * mvg_eval(da, f) - 0.75 * mvg_eval(db, f);
    CHECK(std::abs(mvg_eval(dm, f) - want) <= 1e-10 * std::max(1.0, std::abs(want)));
  }

  const auto nu3 = sample_hvalued_wn(chaos_space(s, 5), 3, 33u);
  CHECK_THROWS_AS(mv_gradient(x1, d, nu3), DimensionError);
}

TEST_CASE("realization variance equals the integrated density") {
  const long m_real = 4000;

  // identity functional on the line: unit variance, no truncation loss
  {
    const auto s = gaussian_product(1);
    const auto d = build_dgradient(s);
    const auto nu = sample_hvalued_wn(chaos_space(s, 8), 1, 9u);
    const auto dgx = mv_gradient(Functional::coordinate(0), d, nu);
    const auto pp = prepare_pairing(dgx.pairing(), BaseFn::constant(1, 1.0));
    CHECK(pp.variance() == 1.0);
    const auto acc = realization_moments(pp, m_real, 101u);
    CHECK(std::abs(acc.variance() - 1.0) <= 3.0 * acc.stderr_variance());
  }

  // squared coordinate: density 4x^2 integrates to 4
  {
    const auto s = gaussian_product(1);
    const auto d = build_dgradient(s);
    const auto nu = sample_hvalued_wn(chaos_space(s, 8), 1, 10u);
    const auto dgx = mv_gradient(Functional::parse("x1^2"), d, nu);
    const auto pp = prepare_pairing(dgx.pairing(), BaseFn::constant(1, 1.0));
    CHECK(pp.variance() == doctest::Approx(4.0).epsilon(1e-12));
    const auto acc = realization_moments(pp, m_real, 102u);
    CHECK(std::abs(acc.variance() - 4.0) <= 3.0 * acc.stderr_variance());
  }

  // restriction to the half line halves the mass, up to truncation
  {
    const auto s = gaussian_product(1);
    const auto d = build_dgradient(s);
    const auto nu = sample_hvalued_wn(chaos_space(s, 12), 1, 11u);
    const auto dgx = mv_gradient(Functional::parse("x1^2"), d, nu);
    const auto pp =
        prepare_pairing(dgx.pairing(), BaseFn::indicator1d(0.0, kInf));
    // truncated coefficient energy of 2x 1_{x>0} through degree 12
    CHECK(pp.variance() == doctest::Approx(1.99608685).epsilon(1e-6));
    CHECK(2.0 - pp.variance() <= 0.005);
    const auto acc = realization_moments(pp, m_real, 103u);
    CHECK(std::abs(acc.variance() - pp.variance()) <=
          3.0 * acc.stderr_variance());
  }

  // bilinear functional on the plane
  {
    const auto s = gaussian_product(2);
    const auto d = build_dgradient(s);
    const auto nu = sample_hvalued_wn(chaos_space(s, 4), 2, 12u);
    const auto dgx = mv_gradient(Functional::parse("x1*x2"), d, nu);
    const auto pp = prepare_pairing(dgx.pairing(), BaseFn::constant(2, 1.0));
    CHECK(pp.variance() == doctest::Approx(2.0).epsilon(1e-12));
    const auto acc = realization_moments(pp, m_real, 104u);
    CHECK(std::abs(acc.variance() - 2.0) <= 3.0 * acc.stderr_variance());
  }

  // a larger auxiliary space changes nothing: extra rows carry zero field
  {
    const auto s = gaussian_product(1);
    const auto d = build_dgradient(s, SqrtMethod::cholesky, 3);
    const auto nu = sample_hvalued_wn(chaos_space(s, 8), 3, 13u);
    const auto dgx = mv_gradient(Functional::parse("x1^2"), d, nu);
    const auto pp = prepare_pairing(dgx.pairing(), BaseFn::constant(1, 1.0));
    CHECK(pp.variance() == doctest::Approx(4.0).epsilon(1e-12));
  }
}

TEST_CASE("density of the associated measure") {
  const auto s = gaussian_product(1);
  const auto d = build_dgradient(s);
  const auto nu = sample_hvalued_wn(chaos_space(s, 6), 1, 14u);

  const auto did = mv_gradient(Functional::coordinate(0), d, nu);
  const auto dsq = mv_gradient(Functional::parse("x1^2"), d, nu);
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const Vector w = s.sample(rng);
    CHECK(mvg_density(did).eval(w) == 1.0);
    CHECK(mvg_density(dsq).eval(w) ==
          doctest::Approx(4.0 * w[0] * w[0]).epsilon(1e-15));
  }

  const auto dv = mv_gradient({Functional::coordinate(0),
                               Functional::parse("x1^2")},
                              d, nu);
  const auto mat = mvg_density_matrix(dv);
  for (int t = 0; t < 50; ++t) {
    const Vector w = s.sample(rng);
    CHECK(mat[0][0].eval(w) == 1.0);
    CHECK(mat[0][1].eval(w) == doctest::Approx(2.0 * w[0]).epsilon(1e-15));
    CHECK(mat[1][0].eval(w) == doctest::Approx(2.0 * w[0]).epsilon(1e-15));
    CHECK(mat[1][1].eval(w) ==
          doctest::Approx(4.0 * w[0] * w[0]).epsilon(1e-15));
  }

  // expression form of gamma agrees with the pointwise bilinear form
  Matrix g(2, 2);
  g << 2.0, 1.0, 1.0, 2.0;
  const auto sa = gaussian_aniso(2, g);
  const auto u = Functional::parse("x1^2 + x2");
  const auto v = Functional::parse("x1*x2");
  const auto guv = gamma_functional(sa, u, v);
  Rng rng2(9);
  for (int t = 0; t < 100; ++t) {
    const Vector w = sa.sample(rng2);
    CHECK(guv.eval(w) ==
          doctest::Approx(gamma_bilinear(sa, u, v, w)).epsilon(1e-12));
  }

  ErrorStructure varying = gaussian_product(1);
  varying.gamma_fn = [](const Vector& w) {
    return Matrix::Constant(1, 1, 1.0 + w[0] * w[0]);
  };
  CHECK_THROWS_AS(gamma_functional(varying, u, u), ValidationError);
}

TEST_CASE("chain rule identity holds at coefficient level") {
  const auto s1 = gaussian_product(1);
  const auto d1 = build_dgradient(s1);
  const auto nu1 = sample_hvalued_wn(chaos_space(s1, 10), 1, 15u);
  const auto dgx1 = mv_gradient(Functional::coordinate(0), d1, nu1);

  const auto cube = chain_rule_check(dgx1, Functional::parse("x1^3"), 12, 51u);
  CHECK(cube.n_functions == 12);
  CHECK(cube.max_discrepancy <= 1e-10);

  const auto s2 = gaussian_product(2);
  const auto d2 = build_dgradient(s2);
  const auto nu2 = sample_hvalued_wn(chaos_space(s2, 6), 2, 16u);
  const auto dgx2 = mv_gradient({Functional::coordinate(0),
                                 Functional::coordinate(1)},
                                d2, nu2);

  // additive map: both routes are the same arithmetic
  const auto add = chain_rule_check(dgx2, Functional::parse("x1 + x2"), 8, 52u);
  CHECK(add.max_discrepancy == 0.0);

  const auto mul = chain_rule_check(dgx2, Functional::parse("x1*x2"), 12, 53u);
  CHECK(mul.max_discrepancy <= 1e-10);

  Matrix g(2, 2);
  g << 2.0, 1.0, 1.0, 2.0;
  const auto sa = gaussian_aniso(2, g);
  const auto da = build_dgradient(sa);
  const auto nua = sample_hvalued_wn(chaos_space(sa, 6), 2, 17u);
  const auto dgxa = mv_gradient({Functional::parse("x1 + x2"),
                                 Functional::parse("x1*x2")},
                                da, nua);
  const auto poly =
      chain_rule_check(dgxa, Functional::parse("x1^2 - 2*x2"), 12, 54u);
  CHECK(poly.max_discrepancy <= 1e-10);
}

TEST_CASE("test function corpus is deterministic and closed form") {
  const auto a = test_function_corpus(2, 9, 42u);
  const auto b = test_function_corpus(2, 9, 42u);
  REQUIRE(a.size() == 9);
  CHECK(a[0].constant_value() == 1.0);

  Rng rng(1);
  const auto space = make_gauss_hermite_product(2, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].dim() == 2);
    for (int t = 0; t < 20; ++t) {
      const Vector w = rng.normal_vector(2);
      CHECK(a[i].eval(w) == b[i].eval(w));
    }
    CHECK(space->expand(a[i]).quad_stderr == 0.0);  // closed-form expansion
  }
}
