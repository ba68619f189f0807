#include <errcalc/structure.hpp>

namespace errcalc {

ErrorStructure gaussian_product(int dim) {
  if (dim < 1) throw DimensionError("dimension must be positive");
  ErrorStructure s;
  s.dim = dim;
  s.label = "gaussian_product(" + std::to_string(dim) + ")";
  s.sampler = [dim](Rng& rng) { return rng.normal_vector(dim); };
  s.gamma_const = Matrix::Identity(dim, dim);
  return s;
}

ErrorStructure gaussian_aniso(int dim, const Matrix& gamma) {
  if (dim < 1) throw DimensionError("dimension must be positive");
  if (gamma.rows() != dim || gamma.cols() != dim)
    throw DimensionError("gamma matrix must be dim x dim");
  check_psd(gamma, 1e-10);
  ErrorStructure s;
  s.dim = dim;
  s.label = "gaussian_aniso(" + std::to_string(dim) + ")";
  s.sampler = [dim](Rng& rng) { return rng.normal_vector(dim); };
  s.gamma_const = 0.5 * (gamma + gamma.transpose());
  return s;
}

double gamma_bilinear(const ErrorStructure& s, const Functional& u,
                      const Functional& v, const Vector& w) {
  const Matrix g = s.gamma_field(w);
  const Vector gu = u.eval_grad(w).second;
  if (u.root() == v.root()) {
    const double val = gu.dot(g * gu);
    return val < 0.0 ? 0.0 : val;  // PSD form; clip fp noise on the diagonal
  }
  const Vector gv = v.eval_grad(w).second;
  // symmetric average: swapping (u,v) permutes a commutative sum
  return 0.5 * (gu.dot(g * gv) + gv.dot(g * gu));
}

Functional gamma_functional(const ErrorStructure& s, const Functional& u,
                            const Functional& v) {
  if (!s.constant_gamma())
    throw ValidationError(
        "gamma_functional: gamma varies with position, no expression form");
  std::vector<Functional> du(static_cast<std::size_t>(s.dim));
  std::vector<Functional> dv(static_cast<std::size_t>(s.dim));
  for (int a = 0; a < s.dim; ++a) {
    du[static_cast<std::size_t>(a)] = u.derivative(a);
    dv[static_cast<std::size_t>(a)] = v.derivative(a);
  }
  Functional acc;
  for (int a = 0; a < s.dim; ++a)
    for (int b = 0; b < s.dim; ++b) {
      const double c = s.gamma_const(a, b);
      if (c == 0.0) continue;
      acc = acc + Functional::constant(c) * du[static_cast<std::size_t>(a)] *
                      dv[static_cast<std::size_t>(b)];
    }
  return acc;
}

Matrix gamma_matrix(const ErrorStructure& s, const std::vector<Functional>& x,
                    const Vector& w) {
  const Matrix g = s.gamma_field(w);
  const Index d = static_cast<Index>(x.size());
  Matrix grads(s.dim, d);
  for (Index i = 0; i < d; ++i)
    grads.col(i) = x[static_cast<std::size_t>(i)].eval_grad(w).second;
  Matrix out = grads.transpose() * g * grads;
  return 0.5 * (out + out.transpose());
}

MonteCarloEstimate dirichlet_form(const ErrorStructure& s, const Functional& u,
                                  const Functional& v, long n, std::uint64_t seed,
                                  int workers) {
  if (n < 2) throw ValidationError("dirichlet_form needs n >= 2 samples");
  const MomentAccumulator acc =
      mc_moments(n, seed, workers, [&](Rng& rng) {
        const Vector w = s.sample(rng);
        return gamma_bilinear(s, u, v, w);
      });
  return {0.5 * acc.mean(), 0.5 * acc.stderr_mean(), acc.n, seed};
}

double generator_compose(const Vector& ax, const Matrix& gamma,
                         const Functional& f, const Vector& x) {
  double value = 0.0;
  Vector grad;
  Matrix hess;
  f.eval_hessian(x, value, grad, hess);
  if (grad.size() != ax.size() || gamma.rows() != ax.size())
    throw DimensionError("generator_compose operand sizes disagree");
  return ax.dot(grad) + 0.5 * (gamma.array() * hess.array()).sum();
}

}  // namespace errcalc
