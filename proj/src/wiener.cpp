#include <errcalc/wiener.hpp>

#include <cmath>
#include <utility>

#include <errcalc/measure_space.hpp>

namespace errcalc {

namespace {

// 5-point Gauss-Legendre on [-1, 1]
constexpr double kGlNode[5] = {-0.906179845938664, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.906179845938664};
constexpr double kGlWeight[5] = {0.23692688505618908, 0.47862867049936647,
                                 0.5688888888888889, 0.47862867049936647,
                                 0.23692688505618908};

Functional linear_functional(const Vector& c) {
  Functional acc = Functional::constant(0.0);
  for (Index i = 0; i < c.size(); ++i)
    if (c[i] != 0.0)
      acc = acc + Functional::constant(c[i]) *
                      Functional::coordinate(static_cast<int>(i));
  return acc;
}

SparsePoly linear_poly(const Vector& c) {
  SparsePoly p(static_cast<int>(c.size()));
  for (Index i = 0; i < c.size(); ++i) {
    if (c[i] == 0.0) continue;
    SparsePoly::Key k(static_cast<std::size_t>(c.size()), 0);
    k[static_cast<std::size_t>(i)] = 1;
    p.add_term(k, c[i]);
  }
  return p;
}

}  // namespace

Vector TruncatedWienerSpace::grid() const {
  Vector t(n_inc);
  for (int i = 0; i < n_inc; ++i)
    t[i] = static_cast<double>(i + 1) / n_inc;
  return t;
}

Vector TruncatedWienerSpace::step_coeffs(const Vector& cell_values) const {
  if (cell_values.size() != n_inc)
    throw DimensionError("step_coeffs: one value per grid cell required");
  return cell_values / std::sqrt(static_cast<double>(n_inc));
}

Functional TruncatedWienerSpace::integral_step(const Vector& cell_values) const {
  return linear_functional(step_coeffs(cell_values));
}

Vector TruncatedWienerSpace::cell_average(
    const std::function<double(double)>& f) const {
  Vector avg(n_inc);
  const double h = 1.0 / n_inc;
  for (int i = 0; i < n_inc; ++i) {
    const double mid = (i + 0.5) * h;
    double acc = 0.0;
    for (int q = 0; q < 5; ++q)
      acc += kGlWeight[q] * f(mid + 0.5 * h * kGlNode[q]);
    avg[i] = 0.5 * acc;  // weights sum to 2
  }
  return avg;
}

Functional TruncatedWienerSpace::integral(
    const std::function<double(double)>& f) const {
  return integral_step(cell_average(f));
}

TruncatedWienerSpace wiener_space(int n_inc) {
  if (n_inc < 1) throw ValidationError("wiener_space: at least one increment");
  TruncatedWienerSpace ws;
  ws.n_inc = n_inc;
  ws.structure = ou_structure(n_inc);
  return ws;
}

ErrorStructure ou_structure(int n_inc) {
  if (n_inc < 1) throw ValidationError("ou_structure: at least one increment");
  ErrorStructure s = gaussian_product(n_inc);
  s.label = "ornstein_uhlenbeck(" + std::to_string(n_inc) + ")";
  return s;
}

double step_norm_sq(const Vector& cell_values) {
  return cell_values.squaredNorm() / static_cast<double>(cell_values.size());
}

ChaosBasis chaos_basis(int n_inc, int degree, int size_cap) {
  if (n_inc < 1) throw ValidationError("chaos_basis: at least one increment");
  if (degree < 0) throw ValidationError("chaos_basis: negative degree bound");
  ChaosBasis z;
  z.space = make_gauss_hermite_product(n_inc, degree, size_cap);
  z.n_inc = n_inc;
  z.degree = degree;
  const auto* hb = dynamic_cast<const HermiteProductBasis*>(&z.space->basis());
  for (const auto& idx : hb->indices()) {
    int d = 0;
    for (int e : idx) d += e;
    z.degrees.push_back(d);
  }
  return z;
}

Vector SharpGradient::bases(const Vector& w) const {
  Vector u(arity());
  for (int j = 0; j < arity(); ++j)
    u[j] = coeffs[static_cast<std::size_t>(j)].dot(w);
  return u;
}

Functional SharpGradient::composite() const {
  std::vector<Functional> atoms;
  atoms.reserve(coeffs.size());
  for (const auto& c : coeffs) atoms.push_back(linear_functional(c));
  return F.substitute(atoms);
}

double SharpGradient::eval(const Vector& w, const Vector& what) const {
  const auto [v, grad] = F.eval_grad(bases(w));
  (void)v;
  double acc = 0.0;
  for (int j = 0; j < arity(); ++j)
    acc += grad[j] * coeffs[static_cast<std::size_t>(j)].dot(what);
  return acc;
}

double SharpGradient::second_moment(const Vector& w) const {
  const auto [v, grad] = F.eval_grad(bases(w));
  (void)v;
  double acc = 0.0;
  for (int j = 0; j < arity(); ++j)
    for (int l = 0; l < arity(); ++l)
      acc += grad[j] * grad[l] *
             coeffs[static_cast<std::size_t>(j)].dot(
                 coeffs[static_cast<std::size_t>(l)]);
  return acc;
}

Functional SharpGradient::gamma() const {
  std::vector<Functional> atoms;
  atoms.reserve(coeffs.size());
  for (const auto& c : coeffs) atoms.push_back(linear_functional(c));
  std::vector<Functional> dfs;
  dfs.reserve(coeffs.size());
  for (int j = 0; j < arity(); ++j)
    dfs.push_back(F.derivative(j).substitute(atoms));
  Functional acc = Functional::constant(0.0);
  for (int j = 0; j < arity(); ++j)
    for (int l = 0; l < arity(); ++l) {
      const double gjl = coeffs[static_cast<std::size_t>(j)].dot(
          coeffs[static_cast<std::size_t>(l)]);
      if (gjl == 0.0) continue;
      acc = acc + dfs[static_cast<std::size_t>(j)] *
                      dfs[static_cast<std::size_t>(l)] *
                      Functional::constant(gjl);
    }
  return acc;
}

SharpGradient sharp(const TruncatedWienerSpace& ws, Functional f,
                    std::vector<Vector> cell_values) {
  if (cell_values.empty())
    throw ValidationError("sharp: at least one base integral");
  SharpGradient sg;
  sg.F = std::move(f);
  sg.n_inc = ws.n_inc;
  sg.coeffs.reserve(cell_values.size());
  for (const auto& v : cell_values) sg.coeffs.push_back(ws.step_coeffs(v));
  if (sg.F.min_dim() > sg.arity())
    throw ArityError("sharp: outer function exceeds the base integrals");
  return sg;
}

MonteCarloEstimate sharp_second_moment_mc(const SharpGradient& sg,
                                          const Vector& w, long n,
                                          std::uint64_t seed) {
  if (n < 2) throw ValidationError("sharp_second_moment_mc: sample too small");
  Rng rng(seed);
  MomentAccumulator acc;
  for (long i = 0; i < n; ++i) {
    const double v = sg.eval(w, rng.normal_vector(sg.n_inc));
    acc.add(v * v);
  }
  return {acc.mean(), acc.stderr_mean(), n, seed};
}

HValuedWhiteNoise wiener_hvalued_wn(const ChaosBasis& z, int k_copy,
                                    std::uint64_t seed) {
  if (!z.space) throw ValidationError("wiener_hvalued_wn: empty chaos basis");
  if (k_copy < 1)
    throw ValidationError("wiener_hvalued_wn: at least one copy element");
  return sample_hvalued_wn(z.space, k_copy, seed);
}

std::vector<Functional> sharp_copy_fields(const SharpGradient& sg,
                                          const BaseMeasureSpace& copy_space,
                                          int k_copy) {
  if (copy_space.measure().dim != sg.n_inc)
    throw DimensionError("sharp_copy_fields: copy space rank mismatch");
  if (k_copy < 1 || k_copy > copy_space.truncation())
    throw DimensionError("sharp_copy_fields: copy truncation out of range");
  std::vector<Functional> atoms, dfs;
  for (const auto& c : sg.coeffs) atoms.push_back(linear_functional(c));
  for (int j = 0; j < sg.arity(); ++j)
    dfs.push_back(sg.F.derivative(j).substitute(atoms));
  // first-chaos coefficients of each base integral in the copy basis
  std::vector<Vector> e;
  e.reserve(sg.coeffs.size());
  for (const auto& c : sg.coeffs)
    e.push_back(copy_space.expand(BaseFn::poly(linear_poly(c))).coeff);
  std::vector<Functional> psi;
  psi.reserve(static_cast<std::size_t>(k_copy));
  for (int k = 0; k < k_copy; ++k) {
    Functional acc = Functional::constant(0.0);
    for (int j = 0; j < sg.arity(); ++j) {
      const double ejk = e[static_cast<std::size_t>(j)][k];
      if (ejk == 0.0) continue;
      acc = acc + dfs[static_cast<std::size_t>(j)] * Functional::constant(ejk);
    }
    psi.push_back(std::move(acc));
  }
  return psi;
}

ScalarWhiteNoise wiener_gradient_noise(const SharpGradient& sg,
                                       const HValuedWhiteNoise& nu) {
  if (!nu.space) throw ValidationError("wiener_gradient_noise: noise without a space");
  const auto psi = sharp_copy_fields(sg, *nu.space, nu.K);
  std::vector<BaseFn> fields;
  fields.reserve(psi.size());
  for (const auto& p : psi)
    fields.push_back(BaseFn::from_functional(p, sg.n_inc));
  return transform_pair_field(nu, std::move(fields));
}

WienerVarianceReport wiener_variance_check(const SharpGradient& sg,
                                           const ChaosBasis& z, const BaseFn& y,
                                           const HValuedWhiteNoise& nu,
                                           long m_realizations,
                                           std::uint64_t seed,
                                           double defect_budget) {
  if (z.space != nu.space)
    throw ValidationError("wiener_variance_check: chaos and noise use different spaces");
  if (m_realizations < 2)
    throw ValidationError("wiener_variance_check: too few realizations");
  const auto noise = wiener_gradient_noise(sg, nu);
  const PreparedPairing pp = prepare_pairing(noise, y);

  WienerVarianceReport rep;
  rep.m_realizations = m_realizations;
  rep.parseval = pp.variance();
  rep.parseval_by_degree.assign(static_cast<std::size_t>(z.degree) + 1, 0.0);
  for (int n = 0; n < static_cast<int>(pp.coeff.cols()); ++n) {
    const double c2 = pp.coeff.col(n).squaredNorm();
    for (int l = z.degrees[static_cast<std::size_t>(n)]; l <= z.degree; ++l)
      rep.parseval_by_degree[static_cast<std::size_t>(l)] += c2;
  }

  const BaseFn gamma_bf = BaseFn::from_functional(sg.gamma(), sg.n_inc);
  const InnerResult tgt = z.space->integrate(y.squared() * gamma_bf);
  rep.target = tgt.value;
  rep.target_stderr = tgt.std_error;
  rep.defect = rep.target - rep.parseval;
  if (rep.defect - 3.0 * rep.target_stderr > defect_budget)
    throw TruncationError("wiener_variance_check: truncation defect " +
                          std::to_string(rep.defect) + " exceeds the budget");

  const MomentAccumulator emp = realization_moments(pp, m_realizations, seed);
  rep.empirical = emp.variance();
  rep.emp_stderr = emp.stderr_variance();
  return rep;
}

}  // namespace errcalc
