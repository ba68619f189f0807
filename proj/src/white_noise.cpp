#include <errcalc/white_noise.hpp>

#include <cmath>
#include <sstream>

#include <errcalc/mc.hpp>
#include <errcalc/psd.hpp>

namespace errcalc {

namespace {

// effective integrand for row k: f times the row's weight function
BaseFn row_integrand(const ScalarWhiteNoise& nu, const BaseFn& f, int k) {
  if (static_cast<std::size_t>(k) < nu.field.size() &&
      nu.field[static_cast<std::size_t>(k)].valid())
    return f * nu.field[static_cast<std::size_t>(k)];
  return f;
}

// quadrature budget: recorded stderr must stay below 1e-3 of the
// integrand's L2 norm
void check_budget(const BaseMeasureSpace& space, const BaseFn& fk,
                  double quad_stderr) {
  if (quad_stderr == 0.0) return;
  const double norm = std::sqrt(std::max(0.0, space.norm_sq(fk).value));
  if (quad_stderr > 1e-3 * norm) {
    std::ostringstream os;
    os << "quadrature stderr " << quad_stderr << " exceeds budget "
       << 1e-3 * norm;
    throw QuadratureError(os.str());
  }
}

ScalarWhiteNoise scalar_view(const HValuedWhiteNoise& nu) {
  ScalarWhiteNoise out;
  out.space = nu.space;
  out.g = nu.g;
  out.mix = Vector::Ones(1);
  if (nu.weight.valid()) out.field = {nu.weight};
  out.assoc = nu.assoc;
  out.seed = nu.seed;
  return out;
}

}  // namespace

Matrix draw_wn_coeffs(int rows, int n, uint64_t seed) {
  Matrix g(rows, n);
  for (int k = 0; k < rows; ++k) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(k)));
    for (int j = 0; j < n; ++j) g(k, j) = rng.normal();
  }
  return g;
}

ScalarWhiteNoise sample_scalar_wn(SpacePtr space, uint64_t seed) {
  if (!space) throw ValidationError("sample_scalar_wn: null space");
  space->verify_gram();
  ScalarWhiteNoise nu;
  nu.g = draw_wn_coeffs(1, space->truncation(), seed);
  nu.space = std::move(space);
  nu.mix = Vector::Ones(1);
  nu.seed = seed;
  return nu;
}

HValuedWhiteNoise sample_hvalued_wn(SpacePtr space, int K, uint64_t seed) {
  if (!space) throw ValidationError("sample_hvalued_wn: null space");
  if (K < 1) throw DimensionError("sample_hvalued_wn: need K >= 1");
  space->verify_gram();
  HValuedWhiteNoise nu;
  nu.K = K;
  nu.g = draw_wn_coeffs(K, space->truncation(), seed);
  nu.space = std::move(space);
  nu.seed = seed;
  return nu;
}

double wn_eval(const ScalarWhiteNoise& nu, const BaseFn& f) {
  if (!nu.space) throw ValidationError("wn_eval: noise without a space");
  if (nu.mix.size() != nu.g.rows())
    throw DimensionError("wn_eval: mixing weights do not match rows");
  // evaluate linear combinations by recursion so linearity holds to the bit
  if (f.is_lincomb()) {
    double acc = 0.0;
    for (const auto& t : f.terms()) acc += t.coeff * wn_eval(nu, t.fn);
    return acc;
  }
  double total = 0.0;
  for (int k = 0; k < nu.rows(); ++k) {
    if (nu.mix[k] == 0.0) continue;
    const BaseFn fk = row_integrand(nu, f, k);
    const CoeffExpansion ce = nu.space->expand(fk);
    check_budget(*nu.space, fk, ce.quad_stderr);
    total += nu.mix[k] * ce.coeff.dot(nu.g.row(k));
  }
  return total;
}

Vector wn_eval_h(const HValuedWhiteNoise& nu, const BaseFn& f) {
  if (!nu.space) throw ValidationError("wn_eval_h: noise without a space");
  const BaseFn fw = nu.weight.valid() ? f * nu.weight : f;
  const CoeffExpansion ce = nu.space->expand(fw);
  check_budget(*nu.space, fw, ce.quad_stderr);
  return nu.g * ce.coeff;
}

ScalarWhiteNoise transform_multiply(const ScalarWhiteNoise& nu,
                                    const BaseFn& phi) {
  if (!phi.valid()) throw ValidationError("transform_multiply: invalid weight");
  if (phi.dim() != nu.space->measure().dim)
    throw DimensionError("transform_multiply: weight rank mismatch");
  if (phi.is_constant_one()) return nu;
  ScalarWhiteNoise out = nu;
  if (out.field.empty())
    out.field.assign(static_cast<std::size_t>(out.rows()), BaseFn{});
  for (auto& w : out.field) w = w.valid() ? w * phi : phi;
  out.assoc = nu.assoc.times_fn_squared(phi);
  return out;
}

HValuedWhiteNoise transform_multiply_h(const HValuedWhiteNoise& nu,
                                       const BaseFn& phi) {
  if (!phi.valid())
    throw ValidationError("transform_multiply_h: invalid weight");
  if (phi.dim() != nu.space->measure().dim)
    throw DimensionError("transform_multiply_h: weight rank mismatch");
  if (phi.is_constant_one()) return nu;
  HValuedWhiteNoise out = nu;
  out.weight = out.weight.valid() ? out.weight * phi : phi;
  out.assoc = nu.assoc.times_fn_squared(phi);
  return out;
}

ScalarWhiteNoise transform_pair_vector(const HValuedWhiteNoise& nu,
                                       const Vector& x) {
  if (x.size() != nu.K)
    throw DimensionError("transform_pair_vector: vector length != K");
  if (!x.allFinite())
    throw ValidationError("transform_pair_vector: non-finite vector");
  ScalarWhiteNoise out;
  out.space = nu.space;
  out.g = nu.g;
  out.mix = x;
  if (nu.weight.valid())
    out.field.assign(static_cast<std::size_t>(nu.K), nu.weight);
  out.assoc = nu.assoc.times_scale(x.squaredNorm());
  out.seed = nu.seed;
  return out;
}

ScalarWhiteNoise transform_pair_field(const HValuedWhiteNoise& nu,
                                      std::vector<BaseFn> psi) {
  if (static_cast<int>(psi.size()) != nu.K)
    throw DimensionError("transform_pair_field: field rank != K");
  for (const auto& c : psi)
    if (!c.valid() || c.dim() != nu.space->measure().dim)
      throw ValidationError("transform_pair_field: invalid field component");
  // scalar auxiliary space: pairing with the field is plain multiplication
  if (nu.K == 1) return transform_multiply(scalar_view(nu), psi[0]);
  // constant field collapses to the vector pairing, bit for bit
  {
    Vector c(nu.K);
    bool all_const = true;
    for (int k = 0; k < nu.K; ++k) {
      const auto v = psi[static_cast<std::size_t>(k)].constant_value();
      if (!v) {
        all_const = false;
        break;
      }
      c[k] = *v;
    }
    if (all_const) return transform_pair_vector(nu, c);
  }
  ScalarWhiteNoise out;
  out.space = nu.space;
  out.g = nu.g;
  out.mix = Vector::Ones(nu.K);
  out.field.reserve(psi.size());
  for (const auto& c : psi)
    out.field.push_back(nu.weight.valid() ? c * nu.weight : c);
  out.assoc = nu.assoc.times_field_norm(std::move(psi));
  out.seed = nu.seed;
  return out;
}

VectorWhiteNoise sample_vector_wn(SpacePtr space,
                                  std::function<Matrix(const Vector&)> density,
                                  int p, uint64_t seed) {
  if (!space) throw ValidationError("sample_vector_wn: null space");
  if (p < 1) throw DimensionError("sample_vector_wn: need p >= 1");
  if (!density) throw ValidationError("sample_vector_wn: density required");
  space->verify_gram();
  // probe the density for shape and positivity on a deterministic sample
  {
    Rng rng(derive_seed(seed, 0xbadc0deULL));
    for (int t = 0; t < 64; ++t) {
      const Vector e = space->measure().sampler(rng);
      const Matrix rho = density(e);
      if (rho.rows() != p || rho.cols() != p)
        throw DimensionError("sample_vector_wn: density shape != p x p");
      check_psd(rho);
    }
  }
  VectorWhiteNoise nu;
  nu.p = p;
  nu.g = draw_wn_coeffs(p, space->truncation(), seed);
  nu.space = std::move(space);
  nu.density = std::move(density);
  nu.seed = seed;
  return nu;
}

VectorWhiteNoise sample_vector_wn(SpacePtr space, const Matrix& rho,
                                  uint64_t seed) {
  if (rho.rows() != rho.cols())
    throw DimensionError("sample_vector_wn: density must be square");
  check_psd(rho);
  const int p = static_cast<int>(rho.rows());
  const Matrix rho_copy = rho;
  VectorWhiteNoise nu = sample_vector_wn(
      std::move(space), [rho_copy](const Vector&) { return rho_copy; }, p,
      seed);
  nu.constant_density = true;
  try {
    nu.mixer = psd_sqrt(rho);
  } catch (const FactorizationError& e) {
    throw PositivityError(std::string("sample_vector_wn: ") + e.what());
  }
  return nu;
}

namespace {

// column i of the pointwise root M(e), M^T M = rho(e)
std::vector<BaseFn> root_column_field(const VectorWhiteNoise& nu, int i) {
  std::vector<BaseFn> field;
  field.reserve(static_cast<std::size_t>(nu.p));
  const auto density = nu.density;
  const int p = nu.p;
  for (int j = 0; j < p; ++j) {
    field.push_back(BaseFn::generic(
        nu.space->measure().dim, [density, i, j](const Vector& e) {
          const Matrix rho = density(e);
          check_psd(rho);
          return psd_sqrt(rho)(j, i);
        }));
  }
  return field;
}

}  // namespace

ScalarWhiteNoise vector_component(const VectorWhiteNoise& nu, int i) {
  if (i < 0 || i >= nu.p)
    throw DimensionError("vector_component: index out of range");
  if (nu.constant_density) {
    ScalarWhiteNoise out;
    out.space = nu.space;
    out.g = nu.g;
    out.mix = nu.mixer.col(i);
    out.assoc = AssociatedMeasure{}.times_scale(out.mix.squaredNorm());
    out.seed = nu.seed;
    return out;
  }
  ScalarWhiteNoise out;
  out.space = nu.space;
  out.g = nu.g;
  out.mix = Vector::Ones(nu.p);
  out.field = root_column_field(nu, i);
  out.assoc = AssociatedMeasure{}.times_field_norm(out.field);
  out.seed = nu.seed;
  return out;
}

ScalarWhiteNoise vector_pair(const VectorWhiteNoise& nu, const Vector& x) {
  if (x.size() != nu.p)
    throw DimensionError("vector_pair: vector length != p");
  if (nu.constant_density) {
    ScalarWhiteNoise out;
    out.space = nu.space;
    out.g = nu.g;
    out.mix = nu.mixer * x;
    out.assoc = AssociatedMeasure{}.times_scale(out.mix.squaredNorm());
    out.seed = nu.seed;
    return out;
  }
  const auto density = nu.density;
  const int p = nu.p;
  const Vector xc = x;
  std::vector<BaseFn> field;
  field.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    field.push_back(BaseFn::generic(
        nu.space->measure().dim, [density, xc, j](const Vector& e) {
          const Matrix rho = density(e);
          check_psd(rho);
          return (psd_sqrt(rho) * xc)(j);
        }));
  }
  ScalarWhiteNoise out;
  out.space = nu.space;
  out.g = nu.g;
  out.mix = Vector::Ones(p);
  out.field = field;
  out.assoc = AssociatedMeasure{}.times_field_norm(field);
  out.seed = nu.seed;
  return out;
}

PreparedPairing prepare_pairing(const ScalarWhiteNoise& nu, const BaseFn& f) {
  if (!nu.space) throw ValidationError("prepare_pairing: noise without a space");
  PreparedPairing pp;
  pp.coeff = Matrix::Zero(nu.rows(), nu.space->truncation());
  double acc = 0.0;
  for (int k = 0; k < nu.rows(); ++k) {
    if (nu.mix[k] == 0.0) continue;
    const BaseFn fk = row_integrand(nu, f, k);
    const CoeffExpansion ce = nu.space->expand(fk);
    check_budget(*nu.space, fk, ce.quad_stderr);
    pp.coeff.row(k) = nu.mix[k] * ce.coeff.transpose();
    acc += nu.mix[k] * nu.mix[k] * ce.quad_stderr * ce.quad_stderr;
    // mass of the integrand outside the truncated basis
    const double nsq = nu.space->norm_sq(fk).value;
    pp.defect += nu.mix[k] * nu.mix[k] *
                 std::max(0.0, nsq - ce.coeff.squaredNorm());
  }
  pp.quad_stderr = std::sqrt(acc);
  return pp;
}

MomentAccumulator realization_moments(const PreparedPairing& pp, long m,
                                      uint64_t seed, int workers) {
  const int rows = static_cast<int>(pp.coeff.rows());
  const int n = static_cast<int>(pp.coeff.cols());
  return run_blocks<MomentAccumulator>(
      m, seed, workers,
      [&pp, rows, n, seed](Rng&, long i, MomentAccumulator& acc) {
        const Matrix g =
            draw_wn_coeffs(rows, n, derive_seed(seed, static_cast<uint64_t>(i)));
        acc.add(pp.value(g));
      });
}

}  // namespace errcalc
