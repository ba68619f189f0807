#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <errcalc/measure_space.hpp>
#include <errcalc/mvg.hpp>
#include <errcalc/wiener.hpp>

using namespace errcalc;

namespace {

Vector cells(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (const double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("discrete paths obey the ito isometry") {
  const auto ws = wiener_space(8);
  const auto& s = ws.structure;
  CHECK(ws.grid()[7] == 1.0);
  CHECK(ws.grid()[0] == 0.125);

  const Functional w1 = ws.integral_step(Vector::Ones(8));  // w(1)
  const Functional half =
      ws.integral_step(cells({1, 1, 1, 1, 0, 0, 0, 0}));  // int 1_[0,1/2] dw
  const Functional other =
      ws.integral_step(cells({0, 0, 0, 0, 1, 1, 1, 1}));
  const Functional haar =
      ws.integral_step(cells({1, 1, 1, 1, -1, -1, -1, -1}));

  Rng rng(3);
  const Vector w = s.sample(rng);
  CHECK(gamma_bilinear(s, w1, w1, w) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(gamma_bilinear(s, half, half, w) ==
        doctest::Approx(0.5).epsilon(1e-14));
  CHECK(gamma_bilinear(s, half, other, w) == 0.0);
  CHECK(gamma_bilinear(s, haar, haar, w) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(gamma_bilinear(s, haar, w1, w) == 0.0);

  // E[u, u] = 1/2 |f|^2 with rounding-level spread: Gamma is constant
  const auto e = dirichlet_form(s, half, half, 200, 17u);
  CHECK(e.value == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(e.std_error <= 1e-9);

  // cell averages of t on the grid against |t|_{L2}^2 = 1/3
  const Functional ramp = ws.integral([](double t) { return t; });
  const double g = gamma_bilinear(s, ramp, ramp, w);
  CHECK(std::abs(g - 1.0 / 3.0) <= 1.0 / (12.0 * 64.0) + 1e-12);

  // realized variance of int f dw over fresh paths
  Rng prng(29);
  MomentAccumulator acc;
  for (int i = 0; i < 20000; ++i) acc.add(haar.eval(s.sample(prng)));
  CHECK(std::abs(acc.mean()) <= 3.0 * acc.stderr_mean());
  CHECK(std::abs(acc.variance() - 1.0) <= 3.0 * acc.stderr_variance());

  CHECK_THROWS_AS(wiener_space(0), ValidationError);
  CHECK_THROWS_AS(ws.integral_step(Vector::Ones(5)), DimensionError);
}

TEST_CASE("chaos bases are orthonormal in closed form") {
  const auto z = chaos_basis(8, 3);
  CHECK(z.size() == 165);  // 1 + 8 + 36 + 120
  CHECK(z.degrees.front() == 0);
  CHECK(z.degrees.back() == 3);
  CHECK(z.fn(0).constant_value() == 1.0);

  double max_defect = 0.0;
  bool closed = false;
  z.space->gram(&max_defect, &closed);
  CHECK(closed);
  CHECK(max_defect <= 1e-12);
  z.space->verify_gram();

  const auto z2 = chaos_basis(2, 1);
  CHECK(z2.size() == 3);
  Vector p(2);
  p << 0.3, -1.7;
  CHECK(z2.fn(1).eval(p) == 0.3);
  CHECK(z2.fn(2).eval(p) == -1.7);

  // H2 normalization: E[((x1^2 - 1)/sqrt(2))^2] = 1 by E[x^4] = 3
  SparsePoly h2(2);
  h2.add_term({2, 0}, 1.0 / std::sqrt(2.0));
  h2.add_term({0, 0}, -1.0 / std::sqrt(2.0));
  CHECK(z2.space->norm_sq(BaseFn::poly(h2)).value ==
        doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(chaos_basis(16, 3), SizeError);  // 969 elements over the cap
  CHECK_THROWS_AS(chaos_basis(0, 2), ValidationError);
}

TEST_CASE("sharp gradient is characterized on the first chaos") {
  const auto ws = wiener_space(8);
  const Functional u1 = Functional::coordinate(0);
  const Functional u2 = Functional::coordinate(1);

  SUBCASE("first chaos maps to the copy integral") {
    const auto sg = sharp(ws, u1, {Vector::Ones(8)});
    Rng rng(5);
    const Vector w = rng.normal_vector(8);
    const Vector what = rng.normal_vector(8);
    const double direct = Vector::Ones(8).dot(what) / std::sqrt(8.0);
    CHECK(sg.eval(w, what) == doctest::Approx(direct).epsilon(1e-12));
    CHECK(sg.second_moment(w) == doctest::Approx(1.0).epsilon(1e-14));
    const auto mc = sharp_second_moment_mc(sg, w, 4000, 7u);
    CHECK(std::abs(mc.value - 1.0) <= 3.0 * mc.std_error);
  }

  SUBCASE("functional calculus squares the path value") {
    const auto sg = sharp(ws, u1 * u1, {Vector::Ones(8)});
    Rng rng(6);
    const Vector w = rng.normal_vector(8);
    const Vector what = rng.normal_vector(8);
    const double i_w = Vector::Ones(8).dot(w) / std::sqrt(8.0);
    const double i_hat = Vector::Ones(8).dot(what) / std::sqrt(8.0);
    CHECK(sg.eval(w, what) == doctest::Approx(2.0 * i_w * i_hat).epsilon(1e-14));
    CHECK(sg.second_moment(w) ==
          doctest::Approx(4.0 * i_w * i_w).epsilon(1e-14));
    // axiom (i): the copy second moment is Gamma[X]
    const Functional x = sg.composite();
    CHECK(sg.second_moment(w) ==
          doctest::Approx(gamma_bilinear(ws.structure, x, x, w))
              .epsilon(1e-12));
  }

  SUBCASE("constants annihilate") {
    const auto sg = sharp(ws, Functional::constant(3.0), {Vector::Ones(8)});
    Rng rng(7);
    CHECK(sg.eval(rng.normal_vector(8), rng.normal_vector(8)) == 0.0);
    CHECK(sg.second_moment(rng.normal_vector(8)) == 0.0);
  }

  SUBCASE("copy second moment equals gamma across a composite corpus") {
    const Vector f = cells({1, 1, 1, 1, 0, 0, 0, 0});
    const Vector g = cells({0, 0, 0, 0, 1, 1, 1, 1});
    const std::vector<Functional> outers = {
        u1, u1 * u1, u1 * u2, apply(Builtin::exp_fn, u1 * Functional::constant(0.5)) * apply(Builtin::cos_fn, u2)};
    Rng rng(11);
    for (const auto& outer : outers) {
      const auto sg = sharp(ws, outer, {f, g});
      const Functional x = sg.composite();
      for (int t = 0; t < 100; ++t) {
        const Vector w = ws.structure.sample(rng);
        const double closed = sg.second_moment(w);
        const double want = gamma_bilinear(ws.structure, x, x, w);
        CHECK(closed == doctest::Approx(want).epsilon(1e-10));
      }
      const Vector w0 = ws.structure.sample(rng);
      const auto mc = sharp_second_moment_mc(sg, w0, 4000, 13u);
      CHECK(std::abs(mc.value - sg.second_moment(w0)) <= 3.0 * mc.std_error);
    }
  }

  CHECK_THROWS_AS(sharp(ws, Functional::parse("x3"), {Vector::Ones(8)}),
                  ArityError);
  CHECK_THROWS_AS(sharp(ws, u1, {}), ValidationError);
}

TEST_CASE("chaos noise pairs basis elements into single rows") {
  const auto z = chaos_basis(8, 2);  // 1 + 8 + 36 = 45 elements
  const auto nu = wiener_hvalued_wn(z, 9, 19u);
  CHECK(nu.K == 9);
  CHECK(nu.g.rows() == 9);
  CHECK(nu.g.cols() == 45);

  // pairing with Z_n picks column n of the realization
  for (const int n : {0, 1, 5}) {
    const Vector v = wn_eval_h(nu, z.fn(n));
    CHECK((v - nu.g.col(n)).cwiseAbs().maxCoeff() == 0.0);
  }

  // Y in the second chaos: x1 x2 is already normalized
  SparsePoly xy(8);
  xy.add_term({1, 1, 0, 0, 0, 0, 0, 0}, 1.0);
  const auto ce = z.space->expand(BaseFn::poly(xy));
  CHECK(ce.quad_stderr == 0.0);
  CHECK(ce.coeff.cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ce.coeff.squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));

  // realized component variance = |coeff|^2 = 1
  MomentAccumulator acc;
  for (int r = 0; r < 2000; ++r) {
    const auto fresh = wiener_hvalued_wn(z, 9, derive_seed(101u, r));
    acc.add(wn_eval_h(fresh, BaseFn::poly(xy))[3]);
  }
  CHECK(std::abs(acc.mean()) <= 3.0 * acc.stderr_mean());
  CHECK(std::abs(acc.variance() - 1.0) <= 3.0 * acc.stderr_variance());
}

TEST_CASE("gradient pairings realize the double sum") {
  const auto ws = wiener_space(8);
  const auto z = chaos_basis(8, 2);
  const auto nu = wiener_hvalued_wn(z, 9, 23u);

  const auto sg = sharp(ws, Functional::parse("x1^2"), {Vector::Ones(8)});
  const auto noise = wiener_gradient_noise(sg, nu);
  CHECK(noise.rows() == 9);

  // the copy fields vanish on the constant copy element
  const auto psi = sharp_copy_fields(sg, *z.space, 9);
  Rng rng(31);
  const Vector w = rng.normal_vector(8);
  CHECK(psi[0].eval(w) == 0.0);

  // evaluation equals the coefficient-realization double sum
  const BaseFn y = BaseFn::poly(linear_image(
      SparsePoly::coordinate(1, 0), Matrix::Ones(1, 8) / std::sqrt(8.0)));
  const auto pp = prepare_pairing(noise, y);
  double manual = 0.0;
  for (int k = 0; k < 9; ++k) manual += pp.coeff.row(k).dot(nu.g.row(k));
  CHECK(wn_eval(noise, y) == doctest::Approx(manual).epsilon(1e-13));

  CHECK_THROWS_AS(sharp_copy_fields(sg, *z.space, 100), DimensionError);
}

TEST_CASE("parseval variance closes the loop") {
  const auto ws = wiener_space(8);
  const auto z = chaos_basis(8, 2);
  const auto nu = wiener_hvalued_wn(z, 9, 37u);
  const BaseFn one = BaseFn::constant(8, 1.0);

  SUBCASE("path value with unit weight") {
    const auto sg = sharp(ws, Functional::coordinate(0), {Vector::Ones(8)});
    const auto rep = wiener_variance_check(sg, z, one, nu, 5000, 41u);
    CHECK(rep.target == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.target_stderr == 0.0);
    CHECK(rep.parseval == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(rep.defect) <= 1e-12);
    CHECK(std::abs(rep.empirical - 1.0) <= 3.0 * rep.emp_stderr);
  }

  SUBCASE("path value weighed by itself") {
    const auto sg = sharp(ws, Functional::coordinate(0), {Vector::Ones(8)});
    const BaseFn y = BaseFn::poly(linear_image(
        SparsePoly::coordinate(1, 0),
        Matrix::Ones(1, 8) / std::sqrt(8.0)));
    const auto rep = wiener_variance_check(sg, z, y, nu, 5000, 43u);
    CHECK(rep.target == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.parseval == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(rep.empirical - 1.0) <= 3.0 * rep.emp_stderr);
  }

  SUBCASE("squared path value") {
    const auto sg = sharp(ws, Functional::parse("x1^2"), {Vector::Ones(8)});
    const auto rep = wiener_variance_check(sg, z, one, nu, 5000, 47u);
    CHECK(rep.target == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(rep.parseval == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(std::abs(rep.empirical - 4.0) <= 3.0 * rep.emp_stderr);
    // cumulative chaos sums are nondecreasing and exhaust the target
    REQUIRE(rep.parseval_by_degree.size() == 3);
    CHECK(rep.parseval_by_degree[0] <= rep.parseval_by_degree[1] + 1e-15);
    CHECK(rep.parseval_by_degree[1] <= rep.parseval_by_degree[2] + 1e-15);
    CHECK(rep.parseval_by_degree[2] ==
          doctest::Approx(rep.parseval).epsilon(1e-12));
  }

  SUBCASE("high-degree weights leave a defect") {
    const auto sg = sharp(ws, Functional::parse("x1^2"), {Vector::Ones(8)});
    SparsePoly cube(8);
    cube.add_term({3, 0, 0, 0, 0, 0, 0, 0}, 1.0);
    const BaseFn y = BaseFn::poly(cube);  // Y = x1^3 pushes past degree 2
    const auto rep = wiener_variance_check(sg, z, y, nu, 5000, 53u);
    CHECK(rep.target_stderr == 0.0);
    CHECK(rep.defect > 0.0);
    CHECK(rep.parseval < rep.target);
    CHECK(rep.empirical <= rep.target + 3.0 * rep.emp_stderr);
    CHECK_THROWS_AS(
        wiener_variance_check(sg, z, y, nu, 100, 53u, 1e-6),
        TruncationError);
  }

  SUBCASE("copy truncation is monotone") {
    const auto sg = sharp(ws, Functional::parse("x1^2"), {Vector::Ones(8)});
    double prev = -1.0;
    for (const int k : {1, 3, 9}) {
      const auto nuk = wiener_hvalued_wn(z, k, 59u);
      const auto pp =
          prepare_pairing(wiener_gradient_noise(sg, nuk), one);
      CHECK(pp.variance() >= prev);
      prev = pp.variance();
    }
    CHECK(prev == doctest::Approx(4.0).epsilon(1e-12));
  }
}

TEST_CASE("both gradient constructions share one density") {
  const int n = 8;
  const auto ws = wiener_space(n);
  const auto z = chaos_basis(n, 2);
  const auto sg = sharp(ws, Functional::parse("x1^2"), {Vector::Ones(n)});
  const Functional x = sg.composite();  // w(1)^2 on the increments

  // chaos route
  const auto nu_chaos = wiener_hvalued_wn(z, 9, 61u);
  const auto noise = wiener_gradient_noise(sg, nu_chaos);

  // coordinate route through the auxiliary-space root of gamma
  const auto d = build_dgradient(ws.structure);
  const auto nu_coord = sample_hvalued_wn(z.space, n, 67u);
  const auto dgx = mv_gradient(x, d, nu_coord);

  const std::vector<BaseFn> ys = {
      BaseFn::constant(n, 1.0),
      BaseFn::poly(linear_image(
          SparsePoly::coordinate(1, 0),
          Matrix::Ones(1, n) / std::sqrt(8.0)))};
  for (const auto& y : ys) {
    const auto pa = prepare_pairing(noise, y);
    const auto pb = prepare_pairing(dgx.pairing(0), y);
    // same associated density Gamma[X] . m at the shared truncation
    CHECK(pa.variance() == doctest::Approx(pb.variance()).epsilon(1e-12));
    const auto ea = realization_moments(pa, 4000, 71u);
    const auto eb = realization_moments(pb, 4000, 73u);
    CHECK(std::abs(ea.variance() - pa.variance()) <=
          3.0 * ea.stderr_variance());
    CHECK(std::abs(eb.variance() - pb.variance()) <=
          3.0 * eb.stderr_variance());
  }

  // the density against m is Gamma[X] for both: mvg carries it symbolically
  const Functional dens = mvg_density(dgx);
  Rng rng(79);
  for (int t = 0; t < 50; ++t) {
    const Vector w = ws.structure.sample(rng);
    CHECK(dens.eval(w) == doctest::Approx(sg.gamma().eval(w)).epsilon(1e-10));
  }
}
