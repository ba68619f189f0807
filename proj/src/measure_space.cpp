#include <errcalc/measure_space.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include <errcalc/hermite.hpp>

namespace errcalc {

namespace {

// int_lo^hi p(x) dx for a 1-D polynomial, antiderivative term by term
double poly_integral_1d(const SparsePoly& p, double lo, double hi) {
  if (lo >= hi) return 0.0;
  double acc = 0.0;
  for (const auto& [k, c] : p.terms()) {
    const int e = k[0];
    acc += c / (e + 1) * (std::pow(hi, e + 1) - std::pow(lo, e + 1));
  }
  return acc;
}

double clip01(double t) { return std::min(1.0, std::max(0.0, t)); }

}  // namespace

BaseMeasure BaseMeasure::uniform01() {
  BaseMeasure m;
  m.kind = Kind::uniform01;
  m.dim = 1;
  m.total_mass = 1.0;
  m.sampler = [](Rng& rng) {
    Vector v(1);
    v[0] = rng.uniform();
    return v;
  };
  return m;
}

BaseMeasure BaseMeasure::gauss_product(int dim) {
  if (dim < 1) throw DimensionError("gauss_product measure: dim must be positive");
  BaseMeasure m;
  m.kind = Kind::gauss_product;
  m.dim = dim;
  m.total_mass = 1.0;
  m.sampler = [dim](Rng& rng) { return rng.normal_vector(dim); };
  return m;
}

BaseMeasure BaseMeasure::generic_measure(int dim, double mass,
                                         std::function<Vector(Rng&)> s) {
  if (dim < 1) throw DimensionError("generic measure: dim must be positive");
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw ValidationError("generic measure: total mass must be finite and positive");
  if (!s) throw ValidationError("generic measure: sampler required");
  BaseMeasure m;
  m.kind = Kind::generic;
  m.dim = dim;
  m.total_mass = mass;
  m.sampler = std::move(s);
  return m;
}

// --- HaarBasis --------------------------------------------------------------

HaarBasis::HaarBasis(int levels) : levels_(levels) {
  if (levels < 0 || levels > 12)
    throw ValidationError("HaarBasis: levels out of range [0, 12]");
  const int n = 1 << levels;
  fns_.reserve(static_cast<std::size_t>(n));
  fns_.push_back(BaseFn::indicator1d(0.0, 1.0));
  for (int i = 1; i < n; ++i) {
    int j = 0;
    while ((1 << (j + 1)) <= i) ++j;
    const int k = i - (1 << j);
    const double h = 1.0 / (1 << j);
    const double l = k * h, m = l + 0.5 * h, r = l + h;
    const double amp = std::sqrt(static_cast<double>(1 << j));
    fns_.push_back(BaseFn::lincomb({{amp, BaseFn::indicator1d(l, m)},
                                    {-amp, BaseFn::indicator1d(m, r)}}));
  }
}

BaseFn HaarBasis::fn(int n) const {
  if (n < 0 || n >= size()) throw BasisError("HaarBasis: index out of range");
  return fns_[static_cast<std::size_t>(n)];
}

std::optional<double> HaarBasis::inner_closed(const BaseFn& f, int n) const {
  if (f.dim() != 1) throw DimensionError("HaarBasis: f must be 1-D");
  if (f.is_lincomb()) {
    double acc = 0.0;
    for (const auto& t : f.terms()) {
      const auto v = inner_closed(t.fn, n);
      if (!v) return std::nullopt;
      acc += t.coeff * *v;
    }
    return acc;
  }
  if (!f.is_polybox()) return std::nullopt;
  const auto& pb = f.polybox();
  if (pb.rotated()) return std::nullopt;
  const double a = pb.box[0].lo, b = pb.box[0].hi;
  if (n == 0) return poly_integral_1d(pb.poly, clip01(a), clip01(b));
  int j = 0;
  while ((1 << (j + 1)) <= n) ++j;
  const int k = n - (1 << j);
  const double h = 1.0 / (1 << j);
  const double l = k * h, m = l + 0.5 * h, r = l + h;
  const double amp = std::sqrt(static_cast<double>(1 << j));
  const double left = poly_integral_1d(pb.poly, std::max(a, l), std::min(b, m));
  const double right = poly_integral_1d(pb.poly, std::max(a, m), std::min(b, r));
  return amp * (left - right);
}

std::string HaarBasis::label() const {
  std::ostringstream os;
  os << "haar[" << size() << "]";
  return os.str();
}

// --- HermiteProductBasis ----------------------------------------------------

HermiteProductBasis::HermiteProductBasis(int dim, int max_degree, int size_cap)
    : dim_(dim), max_degree_(max_degree) {
  if (dim < 1) throw DimensionError("HermiteProductBasis: dim must be positive");
  if (max_degree < 0)
    throw ValidationError("HermiteProductBasis: negative degree cap");
  // graded enumeration: total degree ascending, lexicographic within
  std::vector<int> alpha(static_cast<std::size_t>(dim), 0);
  for (int deg = 0; deg <= max_degree; ++deg) {
    std::function<void(int, int)> rec = [&](int pos, int left) {
      if (pos == dim - 1) {
        alpha[static_cast<std::size_t>(pos)] = left;
        idx_.push_back(alpha);
        if (static_cast<int>(idx_.size()) > size_cap) {
          std::ostringstream os;
          os << "HermiteProductBasis: dim " << dim << " degree " << max_degree
             << " exceeds size cap " << size_cap;
          throw SizeError(os.str());
        }
        return;
      }
      for (int e = left; e >= 0; --e) {
        alpha[static_cast<std::size_t>(pos)] = e;
        rec(pos + 1, left - e);
      }
    };
    rec(0, deg);
  }
  fns_.reserve(idx_.size());
  for (const auto& ix : idx_) {
    SparsePoly p = SparsePoly::constant(dim, 1.0);
    for (int d = 0; d < dim; ++d) {
      const int deg = ix[static_cast<std::size_t>(d)];
      if (deg == 0) continue;
      const SparsePoly h1 = hermite_orthonormal_poly(deg);
      SparsePoly lifted(dim);
      for (const auto& [k, c] : h1.terms()) {
        SparsePoly::Key key(static_cast<std::size_t>(dim), 0);
        key[static_cast<std::size_t>(d)] = k[0];
        lifted.add_term(key, c);
      }
      p = p * lifted;
    }
    fns_.push_back(BaseFn::poly(std::move(p)));
  }
}

BaseFn HermiteProductBasis::fn(int n) const {
  if (n < 0 || n >= size())
    throw BasisError("HermiteProductBasis: index out of range");
  return fns_[static_cast<std::size_t>(n)];
}

std::optional<double> HermiteProductBasis::inner_polybox(const PolyBoxData& pb,
                                                         int n) const {
  if (pb.rotated()) {
    // rotate the integrand instead of the box: with z = rot * w the
    // Gaussian is invariant and the box becomes axis-aligned
    const SparsePoly prod =
        pb.poly * fns_[static_cast<std::size_t>(n)].polybox().poly;
    const SparsePoly q = linear_image(prod, Matrix(pb.rot.transpose()));
    double acc = 0.0;
    for (const auto& [k, c] : q.terms()) {
      double term = c;
      for (int d = 0; d < dim_ && term != 0.0; ++d) {
        const auto& iv = pb.box[static_cast<std::size_t>(d)];
        const int p = k[static_cast<std::size_t>(d)];
        term *= iv.full() ? gaussian_monomial_mean(p)
                          : gaussian_interval_moment(p, iv.lo, iv.hi);
      }
      acc += term;
    }
    return acc;
  }
  const auto& alpha = idx_[static_cast<std::size_t>(n)];
  double acc = 0.0;
  for (const auto& [k, c] : pb.poly.terms()) {
    double term = c;
    for (int d = 0; d < dim_ && term != 0.0; ++d) {
      const int p = k[static_cast<std::size_t>(d)];
      const int a = alpha[static_cast<std::size_t>(d)];
      const auto& iv = pb.box[static_cast<std::size_t>(d)];
      if (iv.full()) {
        term *= monomial_hermite_coeffs_stable(p, a)[static_cast<std::size_t>(a)];
      } else {
        term *= monomial_hermite_coeff_interval(p, a, iv.lo, iv.hi);
      }
    }
    acc += term;
  }
  return acc;
}

std::optional<double> HermiteProductBasis::inner_closed(const BaseFn& f,
                                                        int n) const {
  if (f.dim() != dim_)
    throw DimensionError("HermiteProductBasis: f rank mismatch");
  if (f.is_lincomb()) {
    double acc = 0.0;
    for (const auto& t : f.terms()) {
      const auto v = inner_closed(t.fn, n);
      if (!v) return std::nullopt;
      acc += t.coeff * *v;
    }
    return acc;
  }
  if (!f.is_polybox()) return std::nullopt;
  return inner_polybox(f.polybox(), n);
}

std::string HermiteProductBasis::label() const {
  std::ostringstream os;
  os << "hermite[dim=" << dim_ << ",deg<=" << max_degree_ << ",N=" << size()
     << "]";
  return os.str();
}

// --- IndicatorBasis ---------------------------------------------------------

IndicatorBasis::IndicatorBasis(std::vector<double> cuts,
                               std::vector<double> masses) {
  if (masses.empty()) throw BasisError("IndicatorBasis: no cells");
  if (cuts.size() + 1 != masses.size())
    throw BasisError("IndicatorBasis: cuts and cells inconsistent");
  if (!std::is_sorted(cuts.begin(), cuts.end()))
    throw BasisError("IndicatorBasis: cell edges must be ascending");
  for (double m : masses)
    if (!(m > 0.0))
      throw EstimatorError("IndicatorBasis: empty cell in the refinement");
  cuts_ = std::move(cuts);
  masses_ = std::move(masses);
  fns_.reserve(masses_.size());
  for (std::size_t j = 0; j < masses_.size(); ++j) {
    const double lo = (j == 0) ? -kInf : cuts_[j - 1];
    const double hi = (j + 1 == masses_.size()) ? kInf : cuts_[j];
    const double amp = 1.0 / std::sqrt(masses_[j]);
    fns_.push_back(BaseFn::poly_box(SparsePoly::constant(1, amp),
                                    {Interval{lo, hi}}));
  }
}

BaseFn IndicatorBasis::fn(int n) const {
  if (n < 0 || n >= size())
    throw BasisError("IndicatorBasis: index out of range");
  return fns_[static_cast<std::size_t>(n)];
}

std::string IndicatorBasis::label() const {
  std::ostringstream os;
  os << "indicator[" << size() << "]";
  return os.str();
}

// --- BaseMeasureSpace -------------------------------------------------------

BaseMeasureSpace::BaseMeasureSpace(BaseMeasure mu,
                                   std::shared_ptr<const Basis> basis,
                                   uint64_t quad_seed, long quad_samples)
    : mu_(std::move(mu)),
      basis_(std::move(basis)),
      quad_seed_(quad_seed),
      n_quad_(quad_samples) {
  if (!basis_) throw ValidationError("BaseMeasureSpace: basis required");
  if (basis_->size() < 1) throw BasisError("BaseMeasureSpace: empty basis");
  if (!(mu_.total_mass > 0.0) || !std::isfinite(mu_.total_mass))
    throw ValidationError("BaseMeasureSpace: measure mass must be finite and positive");
  if (n_quad_ < 1000)
    throw ValidationError("BaseMeasureSpace: quadrature sample too small");
}

const Matrix& BaseMeasureSpace::quad_points() const {
  std::call_once(quad_once_, [this] {
    Rng rng(quad_seed_);
    quad_.resize(n_quad_, mu_.dim);
    for (long i = 0; i < n_quad_; ++i)
      quad_.row(i) = mu_.sampler(rng).transpose();
  });
  return quad_;
}

std::optional<double> BaseMeasureSpace::integrate_closed(const BaseFn& f) const {
  if (f.dim() != mu_.dim)
    throw DimensionError("integrate: integrand rank mismatch");
  if (f.is_lincomb()) {
    double acc = 0.0;
    for (const auto& t : f.terms()) {
      const auto v = integrate_closed(t.fn);
      if (!v) return std::nullopt;
      acc += t.coeff * *v;
    }
    return acc;
  }
  if (!f.is_polybox()) return std::nullopt;
  const auto& pb = f.polybox();
  switch (mu_.kind) {
    case BaseMeasure::Kind::uniform01:
      if (pb.rotated()) return std::nullopt;
      return poly_integral_1d(pb.poly, clip01(pb.box[0].lo),
                              clip01(pb.box[0].hi));
    case BaseMeasure::Kind::gauss_product: {
      const SparsePoly q = pb.rotated()
                               ? linear_image(pb.poly, Matrix(pb.rot.transpose()))
                               : pb.poly;
      double acc = 0.0;
      for (const auto& [k, c] : q.terms()) {
        double term = c;
        for (int d = 0; d < mu_.dim && term != 0.0; ++d) {
          const auto& iv = pb.box[static_cast<std::size_t>(d)];
          const int p = k[static_cast<std::size_t>(d)];
          term *= iv.full() ? gaussian_monomial_mean(p)
                            : gaussian_interval_moment(p, iv.lo, iv.hi);
        }
        acc += term;
      }
      return acc;
    }
    case BaseMeasure::Kind::generic:
      return std::nullopt;
  }
  return std::nullopt;
}

InnerResult BaseMeasureSpace::integrate(const BaseFn& f) const {
  if (auto v = integrate_closed(f)) return {*v, 0.0};
  const Matrix& q = quad_points();
  double s1 = 0.0, s2 = 0.0;
  for (long i = 0; i < n_quad_; ++i) {
    const double v = f.eval(q.row(i).transpose());
    s1 += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(n_quad_);
  const double mean = s1 / n;
  const double var = std::max(0.0, s2 / n - mean * mean);
  return {mu_.total_mass * mean, mu_.total_mass * std::sqrt(var / n)};
}

InnerResult BaseMeasureSpace::inner(const BaseFn& f, int n) const {
  if (auto v = basis_->inner_closed(f, n)) return {*v, 0.0};
  const BaseFn xi = basis_->fn(n);
  const Matrix& q = quad_points();
  double s1 = 0.0, s2 = 0.0;
  for (long i = 0; i < n_quad_; ++i) {
    const Vector e = q.row(i).transpose();
    const double v = f.eval(e) * xi.eval(e);
    s1 += v;
    s2 += v * v;
  }
  const double m = static_cast<double>(n_quad_);
  const double mean = s1 / m;
  const double var = std::max(0.0, s2 / m - mean * mean);
  return {mu_.total_mass * mean, mu_.total_mass * std::sqrt(var / m)};
}

CoeffExpansion BaseMeasureSpace::expand_quadrature(const BaseFn& f) const {
  const int nb = basis_->size();
  const Matrix& q = quad_points();
  std::vector<BaseFn> xi;
  xi.reserve(static_cast<std::size_t>(nb));
  for (int n = 0; n < nb; ++n) xi.push_back(basis_->fn(n));
  Vector s1 = Vector::Zero(nb), s2 = Vector::Zero(nb);
  for (long i = 0; i < n_quad_; ++i) {
    const Vector e = q.row(i).transpose();
    const double fv = f.eval(e);
    if (fv == 0.0) continue;
    for (int n = 0; n < nb; ++n) {
      const double v = fv * xi[static_cast<std::size_t>(n)].eval(e);
      s1[n] += v;
      s2[n] += v * v;
    }
  }
  const double m = static_cast<double>(n_quad_);
  CoeffExpansion out;
  out.coeff = mu_.total_mass / m * s1;
  double acc = 0.0;
  for (int n = 0; n < nb; ++n) {
    const double mean = s1[n] / m;
    const double var = std::max(0.0, s2[n] / m - mean * mean);
    acc += mu_.total_mass * mu_.total_mass * var / m;
  }
  out.quad_stderr = std::sqrt(acc);
  return out;
}

CoeffExpansion BaseMeasureSpace::expand(const BaseFn& f) const {
  const int nb = basis_->size();
  CoeffExpansion out;
  out.coeff = Vector::Zero(nb);
  for (int n = 0; n < nb; ++n) {
    const auto v = basis_->inner_closed(f, n);
    if (!v) return expand_quadrature(f);
    out.coeff[n] = *v;
  }
  out.quad_stderr = 0.0;
  return out;
}

InnerResult BaseMeasureSpace::norm_sq(const BaseFn& f) const {
  return integrate(f.squared());
}

double BaseMeasureSpace::truncation_defect(const BaseFn& f) const {
  const InnerResult n2 = norm_sq(f);
  const CoeffExpansion c = expand(f);
  return n2.value - c.coeff.squaredNorm();
}

Matrix BaseMeasureSpace::gram(double* max_defect, bool* closed_all) const {
  const int nb = basis_->size();
  Matrix g = Matrix::Zero(nb, nb);
  bool all_closed = true;
  std::vector<BaseFn> xi;
  xi.reserve(static_cast<std::size_t>(nb));
  for (int n = 0; n < nb; ++n) xi.push_back(basis_->fn(n));
  for (int i = 0; i < nb; ++i) {
    for (int j = i; j < nb; ++j) {
      const auto v = basis_->inner_closed(xi[static_cast<std::size_t>(i)], j);
      if (v) {
        g(i, j) = g(j, i) = *v;
      } else {
        all_closed = false;
      }
    }
    if (!all_closed) break;
  }
  if (!all_closed) {
    // one streaming pass over the shared quadrature sample
    const Matrix& q = quad_points();
    g.setZero();
    Vector vals(nb);
    for (long r = 0; r < n_quad_; ++r) {
      const Vector e = q.row(r).transpose();
      for (int n = 0; n < nb; ++n)
        vals[n] = xi[static_cast<std::size_t>(n)].eval(e);
      g.selfadjointView<Eigen::Lower>().rankUpdate(vals, 1.0);
    }
    g = mu_.total_mass / static_cast<double>(n_quad_) *
        Matrix(g.selfadjointView<Eigen::Lower>());
  }
  if (max_defect) {
    *max_defect = (g - Matrix::Identity(nb, nb)).cwiseAbs().maxCoeff();
  }
  if (closed_all) *closed_all = all_closed;
  return g;
}

void BaseMeasureSpace::verify_gram() const {
  std::call_once(gram_once_, [this] {
    try {
      double defect = 0.0;
      bool closed = false;
      gram(&defect, &closed);
      const double tol = closed ? 1e-12 : 1e-3;
      if (!(defect <= tol)) {
        std::ostringstream os;
        os << "basis " << basis_->label() << " fails orthonormality: max |G - I| = "
           << defect << " > " << tol;
        throw BasisError(os.str());
      }
    } catch (...) {
      gram_failure_ = std::current_exception();
    }
  });
  if (gram_failure_) std::rethrow_exception(gram_failure_);
}

// --- catalog factories ------------------------------------------------------

SpacePtr make_uniform_haar(int levels) {
  return std::make_shared<const BaseMeasureSpace>(
      BaseMeasure::uniform01(), std::make_shared<const HaarBasis>(levels));
}

SpacePtr make_gauss_hermite(int n_basis) {
  if (n_basis < 1) throw ValidationError("make_gauss_hermite: need n_basis >= 1");
  return std::make_shared<const BaseMeasureSpace>(
      BaseMeasure::gauss_product(1),
      std::make_shared<const HermiteProductBasis>(1, n_basis - 1, n_basis));
}

SpacePtr make_gauss_hermite_product(int dim, int max_degree, int size_cap) {
  return std::make_shared<const BaseMeasureSpace>(
      BaseMeasure::gauss_product(dim),
      std::make_shared<const HermiteProductBasis>(dim, max_degree, size_cap));
}

SpacePtr make_indicator_refined(BaseMeasure mu, int cells, uint64_t quad_seed,
                                long quad_samples) {
  if (mu.dim != 1)
    throw DimensionError("make_indicator_refined: only 1-D measures supported");
  if (cells < 1) throw ValidationError("make_indicator_refined: need cells >= 1");
  // one stream defines quantile edges and later serves as the shared
  // quadrature sample, so the empirical Gram is the identity
  Rng rng(quad_seed);
  std::vector<double> xs(static_cast<std::size_t>(quad_samples));
  for (auto& x : xs) x = mu.sampler(rng)[0];
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts;
  cuts.reserve(static_cast<std::size_t>(cells) - 1);
  for (int j = 1; j < cells; ++j) {
    const std::size_t pos =
        static_cast<std::size_t>((static_cast<long>(j) * quad_samples) / cells);
    cuts.push_back(sorted[pos]);
  }
  std::vector<double> masses(static_cast<std::size_t>(cells), 0.0);
  for (double x : xs) {
    const std::size_t cell = static_cast<std::size_t>(
        std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
    masses[cell] += 1.0;
  }
  for (auto& m : masses)
    m *= mu.total_mass / static_cast<double>(quad_samples);
  auto basis = std::make_shared<const IndicatorBasis>(std::move(cuts),
                                                      std::move(masses));
  return std::make_shared<const BaseMeasureSpace>(std::move(mu), basis,
                                                  quad_seed, quad_samples);
}

}  // namespace errcalc
