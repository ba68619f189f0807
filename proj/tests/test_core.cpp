#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <errcalc/mc.hpp>
#include <errcalc/psd.hpp>
#include <errcalc/rng.hpp>
#include <errcalc/stats.hpp>
#include <errcalc/structure.hpp>

#include "oracles.hpp"

using namespace errcalc;

namespace {

Vector pt(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("seeded sampling is reproducible and marginally standard normal") {
  const auto s = gaussian_product(3);
  Rng a(42u), b(42u);
  for (int i = 0; i < 10; ++i) {
    const Vector wa = s.sample(a), wb = s.sample(b);
    CHECK(wa == wb);
  }
  // moments over a modest stream
  Rng c(7u);
  MomentAccumulator acc;
  for (int i = 0; i < 20000; ++i) acc.add(s.sample(c)[0]);
  CHECK(std::abs(acc.mean()) < 4.0 * acc.stderr_mean());
  CHECK(std::abs(acc.variance() - 1.0) < 4.0 * acc.stderr_variance());
}

TEST_CASE("carre du champ at hand-checked points") {
  const auto s2 = gaussian_product(2);
  const auto u = Functional::parse("x1*x2");
  CHECK(gamma_bilinear(s2, u, u, pt({1.0, 2.0})) == doctest::Approx(5.0));
  const auto x1 = Functional::parse("x1");
  CHECK(gamma_bilinear(s2, x1, x1, pt({0.3, -1.2})) == doctest::Approx(1.0));
  const auto su = Functional::parse("sin(x1)");
  const auto sq = Functional::parse("x1^2");
  CHECK(gamma_bilinear(s2, su, sq, pt({0.0, 0.0})) == doctest::Approx(0.0));
}

TEST_CASE("carre du champ is bilinear, positive, and local") {
  const auto s = gaussian_product(2);
  const auto u = Functional::parse("sin(x1)+x2^2");
  const auto v = Functional::parse("exp(x1*x2)");
  const auto z = Functional::parse("x1 - tanh(x2)");
  Rng rng(123u);
  for (int rep = 0; rep < 200; ++rep) {
    const Vector w = s.sample(rng) * 0.7;
    const double a = -1.0 + 2.0 * rng.uniform();
    const double b = -1.0 + 2.0 * rng.uniform();
    const auto au_bv = Functional::constant(a) * u + Functional::constant(b) * v;
    const double lhs = gamma_bilinear(s, au_bv, z, w);
    const double rhs = a * gamma_bilinear(s, u, z, w) + b * gamma_bilinear(s, v, z, w);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12).scale(1.0 + std::abs(rhs)));

    const double guu = gamma_bilinear(s, u, u, w);
    const double gvv = gamma_bilinear(s, v, v, w);
    const double guv = gamma_bilinear(s, u, v, w);
    CHECK(guu >= 0.0);
    CHECK(guv * guv <= guu * gvv + 1e-12);
  }
}

TEST_CASE("chain rule for scalar post-composition") {
  const auto s = gaussian_product(1);
  const auto u = Functional::parse("x1^2 + 1");
  Rng rng(55u);
  for (int rep = 0; rep < 100; ++rep) {
    const Vector w = s.sample(rng);
    // F(t) = tanh(t), F o u by substitution
    const auto fu = Functional::parse("tanh(x1)").substitute({u});
    const double lhs = gamma_bilinear(s, fu, fu, w);
    const double t = u.eval(w);
    const double fp = 1.0 - std::tanh(t) * std::tanh(t);
    const double rhs = fp * fp * gamma_bilinear(s, u, u, w);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10).scale(1.0 + std::abs(rhs)));
  }
}

TEST_CASE("anisotropic structures weight gradients by the gamma matrix") {
  Matrix gm(2, 2);
  gm << 2.0, 1.0, 1.0, 2.0;
  const auto s = gaussian_aniso(2, gm);
  const auto u = Functional::parse("x1");
  const auto v = Functional::parse("x2");
  const Vector w = pt({0.4, -0.9});
  CHECK(gamma_bilinear(s, u, u, w) == doctest::Approx(2.0));
  CHECK(gamma_bilinear(s, u, v, w) == doctest::Approx(1.0));
  const auto y = Functional::parse("x1+x2");
  CHECK(gamma_bilinear(s, y, y, w) == doctest::Approx(6.0));

  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  CHECK_THROWS_AS(gaussian_aniso(2, bad), PositivityError);
}

TEST_CASE("gamma matrices collect pairwise forms and stay PSD") {
  const auto s = gaussian_product(2);
  const std::vector<Functional> coords = {Functional::parse("x1"),
                                          Functional::parse("x2")};
  const Matrix id = gamma_matrix(s, coords, pt({0.1, 0.2}));
  CHECK((id - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);

  const std::vector<Functional> sq = {Functional::parse("x1^2")};
  const Matrix one = gamma_matrix(s, sq, pt({1.0, 0.0}));
  CHECK(one(0, 0) == doctest::Approx(4.0));

  const std::vector<Functional> rot = {Functional::parse("x1+x2"),
                                       Functional::parse("x1-x2")};
  const Matrix two = gamma_matrix(s, rot, pt({0.5, 0.5}));
  CHECK(two(0, 0) == doctest::Approx(2.0));
  CHECK(two(1, 1) == doctest::Approx(2.0));
  CHECK(two(0, 1) == doctest::Approx(0.0));

  const std::vector<Functional> mixed = {Functional::parse("sin(x1)*x2"),
                                         Functional::parse("x1^3 - x2"),
                                         Functional::parse("tanh(x1*x2)")};
  Rng rng(77u);
  for (int rep = 0; rep < 50; ++rep) {
    const Vector w = s.sample(rng);
    const Matrix g = gamma_matrix(s, mixed, w);
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK_NOTHROW(check_psd(g, 1e-10));
  }
}

TEST_CASE("dirichlet form estimates match closed-form Gaussian energies") {
  const auto s1 = gaussian_product(1);
  const auto x1 = Functional::parse("x1");
  const auto e1 = dirichlet_form(s1, x1, x1, 50000, 99u);
  CHECK(e1.value == doctest::Approx(0.5));
  CHECK(e1.std_error == 0.0);  // constant integrand

  const auto sq = Functional::parse("x1^2");
  const auto e2 = dirichlet_form(s1, sq, sq, 50000, 99u);
  CHECK(std::abs(e2.value - 2.0) < 3.0 * e2.std_error);

  const auto s2 = gaussian_product(2);
  const auto e3 = dirichlet_form(s2, Functional::parse("x1"),
                                 Functional::parse("x2"), 50000, 99u);
  CHECK(e3.value == doctest::Approx(0.0));

  CHECK_THROWS_AS(dirichlet_form(s1, x1, x1, 1, 99u), ValidationError);
}

TEST_CASE("dirichlet form is symmetric and worker-count independent") {
  const auto s = gaussian_product(2);
  const auto u = Functional::parse("sin(x1)*x2");
  const auto v = Functional::parse("x1^2 + x2");
  const auto uv = dirichlet_form(s, u, v, 40000, 1234u);
  const auto vu = dirichlet_form(s, v, u, 40000, 1234u);
  CHECK(uv.value == vu.value);
  CHECK(uv.std_error == vu.std_error);

  const auto w1 = dirichlet_form(s, u, v, 40000, 1234u, 1);
  const auto w4 = dirichlet_form(s, u, v, 40000, 1234u, 4);
  CHECK(w1.value == w4.value);
  CHECK(w1.std_error == w4.std_error);
}

TEST_CASE("generator composition reproduces the OU generator") {
  // OU on R: A[x] = -x/2, Gamma[x,x] = 1; A[f o x] = -x f'(x)/2 + f''(x)/2
  const auto f = Functional::parse("x1^2");
  const double x = 1.0;
  const double composed = generator_compose(pt({-x / 2.0}), Matrix::Identity(1, 1), f, pt({x}));
  CHECK(composed == doctest::Approx(1.0 - x * x));  // symbolic A[x^2] = 1 - x^2

  Rng rng(31u);
  const auto g = Functional::parse("tanh(x1)");
  for (int rep = 0; rep < 50; ++rep) {
    const double t = -2.0 + 4.0 * rng.uniform();
    const double lhs = generator_compose(pt({-t / 2.0}), Matrix::Identity(1, 1), g, pt({t}));
    const double th = std::tanh(t);
    const double rhs = -t / 2.0 * (1.0 - th * th) + 0.5 * (-2.0 * th * (1.0 - th * th));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12).scale(1.0 + std::abs(rhs)));
  }

  // linear f keeps only the drift term
  const auto lin = Functional::parse("3*x1 - 2*x2");
  const double drift = generator_compose(pt({1.5, -0.5}), Matrix::Zero(2, 2), lin, pt({0.0, 0.0}));
  CHECK(drift == doctest::Approx(3.0 * 1.5 + (-2.0) * (-0.5)));

  // pure diffusion with identity Gamma and f = t^2
  const double diff = generator_compose(pt({0.0}), Matrix::Identity(1, 1), f, pt({5.0}));
  CHECK(diff == doctest::Approx(1.0));
}

TEST_CASE("psd square roots factor and reject indefinite input") {
  Matrix a(2, 2);
  a << 4.0, 2.0, 2.0, 3.0;
  const Matrix r = psd_sqrt(a);
  CHECK((r.transpose() * r - a).cwiseAbs().maxCoeff() < 1e-12);

  Matrix rank1(2, 2);
  rank1 << 1.0, 1.0, 1.0, 1.0;
  const Matrix rr = psd_sqrt(rank1);
  CHECK((rr.transpose() * rr - rank1).cwiseAbs().maxCoeff() < 1e-12);

  Matrix indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(psd_sqrt(indef), FactorizationError);
  CHECK_THROWS_AS(check_psd(indef), PositivityError);
  const Matrix proj = psd_clamp(indef);
  CHECK_NOTHROW(check_psd(proj));
}

TEST_CASE("monte carlo block scheme merges independently of worker count") {
  const auto stat = [](long n, uint64_t seed, int workers) {
    return mc_moments(n, seed, workers,
                      [](Rng& rng) { return rng.normal() * rng.normal(); });
  };
  const auto m1 = stat(30000, 5u, 1);
  const auto m2 = stat(30000, 5u, 2);
  const auto m8 = stat(30000, 5u, 8);
  CHECK(m1.mean() == m2.mean());
  CHECK(m1.mean() == m8.mean());
  CHECK(m1.variance() == m8.variance());
}

TEST_CASE("kolmogorov-smirnov accepts normal samples and rejects shifted ones") {
  Rng rng(2024u);
  std::vector<double> xs(5000);
  for (auto& x : xs) x = rng.normal();
  const auto ok = ks_test_normal(xs);
  CHECK(ok.p_value > 0.01);
  for (auto& x : xs) x += 0.2;
  const auto bad = ks_test_normal(xs);
  CHECK(bad.p_value < 0.01);
}
