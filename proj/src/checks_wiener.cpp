#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <errcalc/base_fn.hpp>
#include <errcalc/expr.hpp>
#include <errcalc/mc.hpp>
#include <errcalc/mvg.hpp>
#include <errcalc/polynomial.hpp>
#include <errcalc/rng.hpp>
#include <errcalc/structure.hpp>
#include <errcalc/white_noise.hpp>
#include <errcalc/wiener.hpp>

#include "checks_common.hpp"

namespace errcalc::detail {

namespace {

int copy_count(const RunConfig& cfg) {
  return cfg.wiener.copies > 0 ? cfg.wiener.copies
                               : cfg.wiener.increments + 1;
}

void run_chaos_orthonormal(const RunConfig& cfg, std::uint64_t seed,
                           CheckReport& r) {
  const int n = cfg.wiener.increments;
  const auto z = chaos_basis(n, cfg.wiener.chaos_degree);
  double maxdef = 0.0;
  bool closed_all = false;
  const Matrix G = z.space->gram(&maxdef, &closed_all);
  const double gdev =
      (G - Matrix::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
  z.space->verify_gram();
  Rng rng(derive_seed(seed, 1));
  double c0dev = std::abs(z.fn(0).eval(rng.normal_vector(n)) - 1.0);
  bool graded = !z.degrees.empty() && z.degrees.front() == 0 &&
                z.degrees.back() == cfg.wiener.chaos_degree;
  for (std::size_t i = 1; i < z.degrees.size(); ++i)
    graded = graded && z.degrees[i - 1] <= z.degrees[i];
  r.estimate = std::max({gdev, maxdef, c0dev});
  r.target = 0.0;
  exact_verdict(r, 1e-12);
  r.pass = r.pass && closed_all && graded && z.fn(0).is_constant_one();
  r.detail = std::to_string(z.size()) + " chaos elements, Gram deviation " +
             fnum(gdev);
}

void run_chaos_noise_unit(const RunConfig& cfg, std::uint64_t seed,
                          CheckReport& r) {
  const int n = cfg.wiener.increments;
  const int deg = cfg.wiener.chaos_degree;
  const int K = copy_count(cfg);
  const auto z = chaos_basis(n, deg);
  const auto nu = wiener_hvalued_wn(z, K, derive_seed(seed, 1));
  double worst = 0.0;
  for (int idx : {0, 1, std::min(5, z.size() - 1)}) {
    const Vector got = wn_eval_h(nu, z.fn(idx));
    worst = std::max(worst,
                     (got - Vector(nu.g.col(idx))).cwiseAbs().maxCoeff());
  }
  if (n >= 2 && deg >= 2) {
    const auto ce =
        z.space->expand(BaseFn::from_functional(Functional::parse("x1*x2"), n));
    worst = std::max(worst, std::abs(ce.coeff.norm() - 1.0));
    worst = std::max(worst, ce.quad_stderr);
  }
  Vector e1 = Vector::Zero(K);
  e1(0) = 1.0;
  const auto pp = prepare_pairing(transform_pair_vector(nu, e1), z.fn(1));
  worst = std::max(worst, std::abs(pp.variance() - 1.0));
  const auto acc =
      realization_moments(pp, std::min<long>(cfg.samples.realizations, 2000),
                          derive_seed(seed, 3));
  r.target = 1.0;
  r.estimate = acc.variance();
  r.std_error = acc.stderr_variance();
  r.defect = 0.0;
  stat_verdict(r, cfg.tolerance.z_threshold);
  r.pass = r.pass && worst <= 1e-12;
  r.detail = "basis elements map to unit coefficient rows, deviation " +
             fnum(worst);
}

void run_ito_isometry(const RunConfig& cfg, std::uint64_t seed,
                      CheckReport& r) {
  const int n = cfg.wiener.increments;
  const auto ws = wiener_space(n);
  const auto& ou = ws.structure;
  const Vector zero = Vector::Zero(n);
  Vector v1 = Vector::Ones(n), v2(n), v3(n);
  for (int i = 0; i < n; ++i) {
    v2(i) = static_cast<double>(i + 1) / n;
    v3(i) = i % 2 == 0 ? 1.0 : -1.0;
  }
  double worst = 0.0;
  for (const auto& [a, b] :
       std::vector<std::pair<Vector, Vector>>{{v1, v1}, {v1, v2}, {v2, v3}}) {
    const Functional ia = ws.integral_step(a), ib = ws.integral_step(b);
    const double got = gamma_functional(ou, ia, ib).eval(zero);
    worst = std::max(worst, std::abs(got - a.dot(b) / n));
  }
  const Functional ramp = ws.integral([](double t) { return t; });
  const double ramp_gamma = gamma_functional(ou, ramp, ramp).eval(zero);
  const bool ramp_ok =
      std::abs(ramp_gamma - 1.0 / 3.0) <= 1.0 / (12.0 * n * n) + 1e-12;
  const Functional i1 = ws.integral_step(v1);
  const auto df = dirichlet_form(ou, i1, i1, cfg.samples.m_samples,
                                 derive_seed(seed, 2));
  const double z1 = std::abs(df.value - 0.5) / df.std_error;
  Rng rng(derive_seed(seed, 3));
  MomentAccumulator acc;
  const long m = std::min<long>(cfg.samples.realizations, 20000);
  for (long t = 0; t < m; ++t) acc.add(i1.eval(ou.sample(rng)));
  const double z2 = std::abs(acc.variance() - step_norm_sq(v1)) /
                    acc.stderr_variance();
  r.target = 0.0;
  r.estimate = worst;
  r.z = std::max(z1, z2);
  r.pass = worst <= 1e-12 && ramp_ok && r.z <= cfg.tolerance.z_threshold;
  r.detail = "step isometry off by " + fnum(worst) + ", ramp Riemann error " +
             fnum(std::abs(ramp_gamma - 1.0 / 3.0)) + ", energy z " + fnum(z1) +
             ", variance z " + fnum(z2);
}

void run_sharp_first_chaos(const RunConfig& cfg, std::uint64_t seed,
                           CheckReport& r) {
  const int n = cfg.wiener.increments;
  const auto ws = wiener_space(n);
  const auto& ou = ws.structure;
  Vector v1 = Vector::Zero(n), v2 = Vector::Zero(n);
  for (int i = 0; i < n; ++i) (i < (n + 1) / 2 ? v1 : v2)(i) = 1.0;
  Rng rng(derive_seed(seed, 1));
  double worst = 0.0;
  const auto sgv = sharp(ws, Functional::coordinate(0), {v1});
  const Vector sc = ws.step_coeffs(v1);
  for (int t = 0; t < 20; ++t) {
    const Vector w = rng.normal_vector(n);
    const Vector what = rng.normal_vector(n);
    worst = std::max(worst, std::abs(sgv.eval(w, what) - sc.dot(what)));
    worst = std::max(worst,
                     std::abs(sgv.second_moment(w) - step_norm_sq(v1)));
  }
  const auto sgc = sharp(ws, Functional::constant(2.0), {v1});
  for (int t = 0; t < 5; ++t) {
    const Vector w = rng.normal_vector(n);
    worst = std::max(worst, std::abs(sgc.second_moment(w)));
    worst = std::max(worst, std::abs(sgc.eval(w, rng.normal_vector(n))));
  }
  double rel_worst = 0.0;
  double max_z = 0.0;
  for (const char* text :
       {"x1", "x1^2", "x1*x2", "exp(x1/2)*cos(x2)"}) {
    const Functional F = Functional::parse(text);
    const std::vector<Vector> bases =
        F.min_dim() <= 1 ? std::vector<Vector>{v1}
                         : std::vector<Vector>{v1, v2};
    const auto sg = sharp(ws, F, bases);
    const Functional comp = sg.composite();
    for (int t = 0; t < 100; ++t) {
      const Vector w = rng.normal_vector(n);
      const double lhs = sg.second_moment(w);
      const double rhs = gamma_bilinear(ou, comp, comp, w);
      rel_worst = std::max(rel_worst,
                           std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
      if (t < 3 && std::string(text) == "exp(x1/2)*cos(x2)") {
        const auto est = sharp_second_moment_mc(
            sg, w, std::min<long>(cfg.samples.realizations, 4000),
            derive_seed(seed, 7 + t));
        max_z = std::max(max_z, std::abs(est.value - lhs) / est.std_error);
      }
    }
  }
  r.target = 0.0;
  r.estimate = std::max(worst, rel_worst);
  r.z = max_z;
  r.pass = worst <= 1e-12 && rel_worst <= 1e-10 &&
           max_z <= cfg.tolerance.z_threshold;
  r.detail = "copy-space gradient vs carre du champ, deviation " +
             fnum(std::max(worst, rel_worst)) + ", Monte Carlo z " +
             fnum(max_z);
}

// Shared closing-variance run: X is w(1) or w(1)^2, Y is 1 or w(1).
void parseval_case(const RunConfig& cfg, std::uint64_t seed, CheckReport& r,
                   int which) {
  const int n = cfg.wiener.increments;
  const int deg = cfg.wiener.chaos_degree;
  const int K = copy_count(cfg);
  const auto ws = wiener_space(n);
  const auto z = chaos_basis(n, deg);
  const Vector ones = Vector::Ones(n);
  const auto sg = which == 2 ? sharp(ws, Functional::parse("x1^2"), {ones})
                             : sharp(ws, Functional::coordinate(0), {ones});
  BaseFn y = BaseFn::constant(n, 1.0);
  if (which == 1) {
    Matrix m(1, n);
    m.setConstant(1.0 / std::sqrt(static_cast<double>(n)));
    y = BaseFn::poly(linear_image(SparsePoly::coordinate(1, 0), m));
  }
  const auto nu = wiener_hvalued_wn(z, K, derive_seed(seed, 1));
  const auto rep = wiener_variance_check(sg, z, y, nu,
                                         cfg.samples.realizations,
                                         derive_seed(seed, 2));
  const double pinned = which == 2 ? 4.0 : 1.0;
  r.target = pinned;
  r.estimate = rep.empirical;
  r.std_error = rep.emp_stderr;
  r.defect = std::max(0.0, rep.defect);
  stat_verdict(r, cfg.tolerance.z_threshold);
  const bool closed_ok = std::abs(rep.target - pinned) <= 1e-9;
  bool exact_ok = true;
  if (K >= n + 1)
    exact_ok = std::abs(rep.parseval - pinned) <= 1e-9 &&
               std::abs(rep.defect) <= 1e-9;
  r.pass = r.pass && closed_ok && exact_ok;
  r.detail = "closed target " + fnum(rep.target) + ", Parseval sum " +
             fnum(rep.parseval) + ", defect " + fnum(rep.defect);
}

void run_parseval_unit(const RunConfig& cfg, std::uint64_t seed,
                       CheckReport& r) {
  parseval_case(cfg, seed, r, 0);
}

void run_parseval_weighted(const RunConfig& cfg, std::uint64_t seed,
                           CheckReport& r) {
  parseval_case(cfg, seed, r, 1);
}

void run_parseval_square(const RunConfig& cfg, std::uint64_t seed,
                         CheckReport& r) {
  parseval_case(cfg, seed, r, 2);
}

void run_cross_construction(const RunConfig& cfg, std::uint64_t seed,
                            CheckReport& r) {
  const int n = cfg.wiener.increments;
  const int K = copy_count(cfg);
  const auto ws = wiener_space(n);
  const auto z = chaos_basis(n, cfg.wiener.chaos_degree);
  const Vector ones = Vector::Ones(n);
  const BaseFn one = BaseFn::constant(n, 1.0);

  const auto sg = sharp(ws, Functional::parse("x1^2"), {ones});
  const auto nuA = wiener_hvalued_wn(z, K, derive_seed(seed, 1));
  const auto ppA = prepare_pairing(wiener_gradient_noise(sg, nuA), one);

  Functional sum = Functional::coordinate(0);
  for (int i = 1; i < n; ++i) sum = sum + Functional::coordinate(i);
  const Functional F = sum * sum * Functional::constant(1.0 / n);
  const auto ou = ou_structure(n);
  const auto d = build_dgradient(ou);
  const auto nuB = sample_hvalued_wn(z.space, d.K, derive_seed(seed, 2));
  const auto dgB = mv_gradient(F, d, nuB);
  const auto ppB = prepare_pairing(dgB.pairing(0), one);

  const double varA = ppA.variance();
  const double varB = ppB.variance();
  bool var_ok;
  if (K >= n + 1)
    var_ok = std::abs(varA - varB) <= 1e-9 && std::abs(varA - 4.0) <= 1e-9;
  else
    var_ok = varA <= varB + 1e-9;

  const long m = std::min<long>(cfg.samples.realizations, 5000);
  const auto accA = realization_moments(ppA, m, derive_seed(seed, 10));
  const auto accB = realization_moments(ppB, m, derive_seed(seed, 11));
  const double zA = std::abs(accA.variance() - varA) / accA.stderr_variance();
  const double zB = std::abs(accB.variance() - varB) / accB.stderr_variance();

  const Functional densB = mvg_density(dgB);
  const Functional densA = sg.gamma();
  Rng rng(derive_seed(seed, 3));
  double dens_dev = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Vector w = rng.normal_vector(n);
    const double a = densA.eval(w), b = densB.eval(w);
    dens_dev = std::max(dens_dev,
                        std::abs(a - b) / std::max(1.0, std::abs(b)));
  }
  r.target = varB;
  r.estimate = varA;
  r.z = std::max(zA, zB);
  r.pass = var_ok && dens_dev <= 1e-10 && r.z <= cfg.tolerance.z_threshold;
  r.detail = "copy-space route " + fnum(varA) + " vs coefficient route " +
             fnum(varB) + ", density deviation " + fnum(dens_dev);
}

void run_truncation_monotone(const RunConfig& cfg, std::uint64_t seed,
                             CheckReport& r) {
  const int n = cfg.wiener.increments;
  const int deg = cfg.wiener.chaos_degree;
  const int K = copy_count(cfg);
  const auto ws = wiener_space(n);
  const auto sg = sharp(ws, Functional::parse("x1^2"), {Vector::Ones(n)});
  const BaseFn one = BaseFn::constant(n, 1.0);
  const auto z_full = chaos_basis(n, deg);
  auto run_once = [&](const ChaosBasis& z, int k) {
    const auto nu = wiener_hvalued_wn(z, k, derive_seed(seed, 1));
    return wiener_variance_check(sg, z, one, nu, 2, derive_seed(seed, 2));
  };
  const auto rep = run_once(z_full, K);
  bool ladder_ok = true;
  for (std::size_t i = 1; i < rep.parseval_by_degree.size(); ++i)
    ladder_ok = ladder_ok && rep.parseval_by_degree[i] >=
                                 rep.parseval_by_degree[i - 1] - 1e-12;
  if (!rep.parseval_by_degree.empty())
    ladder_ok = ladder_ok &&
                std::abs(rep.parseval_by_degree.back() - rep.parseval) <=
                    1e-12 &&
                rep.parseval_by_degree.back() <= rep.target + 1e-12;

  std::vector<int> degs = {1, std::min(2, deg), deg};
  std::sort(degs.begin(), degs.end());
  degs.erase(std::unique(degs.begin(), degs.end()), degs.end());
  double prev = -kInf;
  bool deg_mono = true;
  for (int d : degs) {
    const double p = run_once(chaos_basis(n, d), K).parseval;
    deg_mono = deg_mono && p >= prev - 1e-12;
    prev = p;
  }
  std::vector<int> ks = {1, std::max(2, (n + 1) / 2), n + 1};
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  prev = -kInf;
  bool k_mono = true;
  double final_parseval = 0.0;
  for (int k : ks) {
    final_parseval = run_once(z_full, k).parseval;
    k_mono = k_mono && final_parseval >= prev - 1e-12;
    prev = final_parseval;
  }
  r.target = 4.0;
  r.estimate = final_parseval;
  r.z = 0.0;
  r.pass = ladder_ok && deg_mono && k_mono &&
           std::abs(final_parseval - 4.0) <= 1e-9;
  r.detail = "Parseval mass grows with chaos degree and copy count up to " +
             fnum(final_parseval);
}

}  // namespace

void register_wiener_checks(std::vector<CheckDef>& out) {
  out.push_back({"wiener/chaos_orthonormal", "wiener", nullptr,
                 run_chaos_orthonormal});
  out.push_back({"wiener/chaos_noise_unit", "wiener", nullptr,
                 run_chaos_noise_unit});
  out.push_back({"wiener/ito_isometry", "wiener", nullptr, run_ito_isometry});
  out.push_back({"wiener/sharp_first_chaos", "wiener", nullptr,
                 run_sharp_first_chaos});
  out.push_back({"wiener/parseval_unit", "wiener", nullptr,
                 run_parseval_unit});
  out.push_back({"wiener/parseval_weighted", "wiener", nullptr,
                 run_parseval_weighted});
  out.push_back({"wiener/parseval_square", "wiener", nullptr,
                 run_parseval_square});
  out.push_back({"wiener/cross_construction", "wiener", nullptr,
                 run_cross_construction});
  out.push_back({"wiener/truncation_monotone", "wiener", nullptr,
                 run_truncation_monotone});
}

}  // namespace errcalc::detail
