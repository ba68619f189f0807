#include <errcalc/mvg.hpp>

#include <cmath>
#include <utility>

namespace errcalc {

namespace {

Matrix pad_rows(const Matrix& m, int k) {
  Matrix out = Matrix::Zero(k, m.cols());
  out.topRows(m.rows()) = m;
  return out;
}

}  // namespace

Matrix DGradientOp::root(const Vector& w) const {
  if (structure.constant_gamma()) return root_const;
  return pad_rows(psd_sqrt(structure.gamma_field(w), method), K);
}

Vector DGradientOp::apply(const Functional& u, const Vector& w) const {
  return root(w) * u.eval_grad(w).second;
}

DGradientOp build_dgradient(const ErrorStructure& s, SqrtMethod method, int K) {
  if (K == 0) K = s.dim;
  if (K < s.dim)
    throw DimensionError("build_dgradient: auxiliary dimension below dim");
  DGradientOp d;
  d.structure = s;
  d.K = K;
  d.method = method;
  if (s.constant_gamma())
    d.root_const = pad_rows(psd_sqrt(s.gamma_const, method), K);
  return d;
}

Vector dgrad_apply(const DGradientOp& d, const Functional& f,
                   const std::vector<Functional>& u, const Vector& w) {
  Vector uw(static_cast<Index>(u.size()));
  for (std::size_t i = 0; i < u.size(); ++i)
    uw[static_cast<Index>(i)] = u[i].eval(w);
  const Vector gf = f.eval_grad(uw).second;
  const Matrix ju = jacobian(u, w);  // |u| x dim
  return d.root(w) * (ju.transpose() * gf);
}

std::vector<BaseFn> dgrad_field(const DGradientOp& d, const Functional& x) {
  const int dim = d.structure.dim;
  std::vector<BaseFn> psi;
  psi.reserve(static_cast<std::size_t>(d.K));
  if (d.structure.constant_gamma()) {
    std::vector<Functional> dx(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j)
      dx[static_cast<std::size_t>(j)] = x.derivative(j);
    for (int k = 0; k < d.K; ++k) {
      Functional acc;
      for (int j = 0; j < dim; ++j) {
        const double m = d.root_const(k, j);
        if (m == 0.0) continue;
        acc = acc + Functional::constant(m) * dx[static_cast<std::size_t>(j)];
      }
      psi.push_back(BaseFn::from_functional(acc, dim));
    }
    return psi;
  }
  for (int k = 0; k < d.K; ++k)
    psi.push_back(BaseFn::generic(dim, [d, x, k](const Vector& w) {
      return d.root(w).row(k).dot(x.eval_grad(w).second);
    }));
  return psi;
}

const ScalarWhiteNoise& MeasureValuedGradient::pairing(int i) const {
  if (i < 0 || static_cast<std::size_t>(i) >= pairings.size())
    throw DimensionError("MeasureValuedGradient: component out of range");
  return pairings[static_cast<std::size_t>(i)];
}

MeasureValuedGradient mv_gradient(const Functional& x, const DGradientOp& d,
                                  const HValuedWhiteNoise& nu) {
  return mv_gradient(std::vector<Functional>{x}, d, nu);
}

MeasureValuedGradient mv_gradient(std::vector<Functional> x,
                                  const DGradientOp& d,
                                  const HValuedWhiteNoise& nu) {
  if (!nu.space) throw ValidationError("mv_gradient: noise without a space");
  if (nu.K != d.K)
    throw DimensionError("mv_gradient: noise rows do not match the gradient");
  if (nu.space->measure().dim != d.structure.dim)
    throw DimensionError("mv_gradient: base space dimension mismatch");
  if (x.empty()) throw ValidationError("mv_gradient: empty functional vector");
  MeasureValuedGradient out;
  out.X = std::move(x);
  out.D = d;
  out.nu = nu;
  out.pairings.reserve(out.X.size());
  for (const auto& xi : out.X)
    out.pairings.push_back(transform_pair_field(nu, dgrad_field(d, xi)));
  return out;
}

double mvg_eval(const MeasureValuedGradient& dgx, const BaseFn& f, int comp) {
  return wn_eval(dgx.pairing(comp), f);
}

Functional mvg_density(const MeasureValuedGradient& dgx, int i, int j) {
  if (j < 0) j = i;
  const auto n = static_cast<int>(dgx.X.size());
  if (i < 0 || i >= n || j >= n)
    throw DimensionError("mvg_density: component out of range");
  return gamma_functional(dgx.D.structure, dgx.X[static_cast<std::size_t>(i)],
                          dgx.X[static_cast<std::size_t>(j)]);
}

std::vector<std::vector<Functional>> mvg_density_matrix(
    const MeasureValuedGradient& dgx) {
  const auto n = dgx.X.size();
  std::vector<std::vector<Functional>> out(n, std::vector<Functional>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out[i][j] = gamma_functional(dgx.D.structure, dgx.X[i], dgx.X[j]);
  return out;
}

std::vector<BaseFn> test_function_corpus(int dim, int n, uint64_t seed) {
  if (dim < 1) throw DimensionError("test_function_corpus: dim must be positive");
  if (n < 1) throw ValidationError("test_function_corpus: need n >= 1");
  std::vector<BaseFn> out;
  out.reserve(static_cast<std::size_t>(n));
  Rng rng(seed);
  const auto axis = [&] { return static_cast<int>(rng.raw() % static_cast<uint64_t>(dim)); };
  for (int i = 0; i < n; ++i) {
    switch (i % 4) {
      case 0:
        out.push_back(
            BaseFn::constant(dim, i == 0 ? 1.0 : rng.uniform(0.5, 2.0)));
        break;
      case 1: {  // half-space indicator
        std::vector<Interval> box(static_cast<std::size_t>(dim));
        box[static_cast<std::size_t>(axis())] = {0.8 * rng.normal(), kInf};
        out.push_back(BaseFn::box(std::move(box)));
        break;
      }
      case 2: {  // bounded box on one axis
        std::vector<Interval> box(static_cast<std::size_t>(dim));
        const double a = rng.uniform(-1.5, 0.5);
        box[static_cast<std::size_t>(axis())] = {a, a + rng.uniform(0.5, 2.0)};
        out.push_back(BaseFn::box(std::move(box)));
        break;
      }
      default: {  // low-degree polynomial
        SparsePoly p = SparsePoly::constant(dim, rng.uniform(-1.0, 1.0));
        p = p + SparsePoly::coordinate(dim, axis()).scaled(rng.uniform(-1.0, 1.0));
        p = p + (SparsePoly::coordinate(dim, axis()) *
                 SparsePoly::coordinate(dim, axis()))
                    .scaled(rng.uniform(-0.5, 0.5));
        out.push_back(BaseFn::poly(std::move(p)));
        break;
      }
    }
  }
  return out;
}

ChainRuleReport chain_rule_check(const MeasureValuedGradient& dgx,
                                 const Functional& F, int n_test_functions,
                                 uint64_t seed) {
  const int dim = dgx.D.structure.dim;
  const auto d = dgx.X.size();
  const MeasureValuedGradient lhs =
      mv_gradient(F.substitute(dgx.X), dgx.D, dgx.nu);
  std::vector<ScalarWhiteNoise> rhs;
  rhs.reserve(d);
  for (std::size_t i = 0; i < d; ++i) {
    const Functional fi = F.derivative(static_cast<int>(i)).substitute(dgx.X);
    rhs.push_back(transform_multiply(dgx.pairings[i],
                                     BaseFn::from_functional(fi, dim)));
  }
  ChainRuleReport rep;
  rep.n_functions = n_test_functions;
  for (const auto& f : test_function_corpus(dim, n_test_functions, seed)) {
    const double a = mvg_eval(lhs, f);
    double b = 0.0;
    for (const auto& nu_i : rhs) b += wn_eval(nu_i, f);
    rep.max_discrepancy = std::max(rep.max_discrepancy, std::abs(a - b));
  }
  return rep;
}

SpacePtr chaos_space(const ErrorStructure& s, int max_degree, int size_cap) {
  return make_gauss_hermite_product(s.dim, max_degree, size_cap);
}

}  // namespace errcalc
