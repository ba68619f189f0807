#include <errcalc/image.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include <errcalc/mc.hpp>

namespace errcalc {

namespace {

int resolve_bins(const CondExpEstimator& est, long n) {
  if (est.bins > 0) return est.bins;
  return static_cast<int>(std::ceil(std::cbrt(static_cast<double>(n))));
}

int resolve_neighbors(const CondExpEstimator& est, long n) {
  if (est.neighbors > 0) return est.neighbors;
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
}

long flat_index(const std::vector<Vector>& cuts, const Vector& y) {
  long idx = 0;
  long stride = 1;
  for (std::size_t j = 0; j < cuts.size(); ++j) {
    const Vector& e = cuts[j];
    const double* lo = e.data();
    const double* hi = e.data() + e.size();
    const long b = std::upper_bound(lo, hi, y[static_cast<Index>(j)]) - lo;
    idx += b * stride;
    stride *= e.size() + 1;
  }
  return idx;
}

void build_cells(ImageStructure& im) {
  const long n = im.n_samples;
  const int d = im.image_dim();
  const int bins = im.estimator.bins;

  // equal-mass interior edges from the sorted marginals
  im.cuts.resize(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    std::vector<double> col(im.ys.col(j).data(), im.ys.col(j).data() + n);
    std::sort(col.begin(), col.end());
    Vector edges(bins - 1);
    for (int b = 1; b < bins; ++b)
      edges[b - 1] = col[static_cast<std::size_t>(
          (static_cast<long long>(b) * n) / bins)];
    im.cuts[static_cast<std::size_t>(j)] = edges;
  }

  long n_flat = 1;
  for (int j = 0; j < d; ++j) n_flat *= bins;

  struct Acc {
    long count = 0;
    Vector sy;
    Matrix sg, sg2;
  };
  std::vector<Acc> acc(static_cast<std::size_t>(n_flat));
  im.sample_cell.assign(static_cast<std::size_t>(n), -1);
  std::vector<long> flat(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const long fx = flat_index(im.cuts, im.ys.row(i));
    flat[static_cast<std::size_t>(i)] = fx;
    Acc& a = acc[static_cast<std::size_t>(fx)];
    if (a.count == 0) {
      a.sy = Vector::Zero(d);
      a.sg = Matrix::Zero(d, d);
      a.sg2 = Matrix::Zero(d, d);
    }
    a.sy += im.ys.row(i).transpose();
    const Matrix& g = im.gs[static_cast<std::size_t>(i)];
    a.sg += g;
    a.sg2 += g.cwiseProduct(g);
    ++a.count;
  }

  im.cell_pos.assign(static_cast<std::size_t>(n_flat), -1);
  for (long fx = 0; fx < n_flat; ++fx) {
    const Acc& a = acc[static_cast<std::size_t>(fx)];
    if (a.count == 0) continue;
    ImageCell c;
    c.index = fx;
    c.count = a.count;
    c.mass = static_cast<double>(a.count) / static_cast<double>(n);
    c.center = a.sy / static_cast<double>(a.count);
    c.mean = a.sg / static_cast<double>(a.count);
    c.se = Matrix::Zero(d, d);
    if (a.count > 1) {
      const Matrix var =
          (a.sg2 - static_cast<double>(a.count) * c.mean.cwiseProduct(c.mean)) /
          static_cast<double>(a.count - 1);
      c.se = (var.cwiseMax(0.0) / static_cast<double>(a.count)).cwiseSqrt();
    }
    im.cell_pos[static_cast<std::size_t>(fx)] =
        static_cast<long>(im.cells.size());
    im.cells.push_back(std::move(c));
  }
  for (long i = 0; i < n; ++i)
    im.sample_cell[static_cast<std::size_t>(i)] =
        im.cell_pos[static_cast<std::size_t>(flat[static_cast<std::size_t>(i)])];
}

}  // namespace

long ImageStructure::locate(const Vector& y) const {
  if (estimator.kind != CondExpEstimator::Kind::binning) return -1;
  if (y.size() != image_dim())
    throw DimensionError("locate: point rank does not match the image");
  return cell_pos[static_cast<std::size_t>(flat_index(cuts, y))];
}

const ImageCell& ImageStructure::cell_at(const Vector& y) const {
  if (estimator.kind != CondExpEstimator::Kind::binning)
    throw EstimatorError("cell_at: the neighbor estimator keeps no cells");
  const long pos = locate(y);
  if (pos < 0) {
    std::ostringstream os;
    os << "cell_at: no sample mass at [" << y.transpose() << "]";
    throw EstimatorError(os.str());
  }
  return cells[static_cast<std::size_t>(pos)];
}

Matrix ImageStructure::gammaX(const Vector& y) const {
  if (estimator.kind == CondExpEstimator::Kind::knn) {
    if (y.size() != image_dim())
      throw DimensionError("gammaX: point rank does not match the image");
    const long n = n_samples;
    const long k = std::min<long>(estimator.neighbors, n);
    std::vector<std::pair<double, long>> dist(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i)
      dist[static_cast<std::size_t>(i)] = {
          (ys.row(i).transpose() - y).squaredNorm(), i};
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    Matrix m = Matrix::Zero(image_dim(), image_dim());
    for (long i = 0; i < k; ++i)
      m += gs[static_cast<std::size_t>(dist[static_cast<std::size_t>(i)].second)];
    return psd_clamp(m / static_cast<double>(k));
  }
  return psd_clamp(cell_at(y).mean);
}

double ImageStructure::gammaF(const Vector& y, const Functional& f) const {
  if (f.min_dim() > image_dim())
    throw ArityError("gammaF: functional exceeds the image dimension");
  const auto [v, grad] = f.eval_grad(y);
  (void)v;
  return grad.dot(gammaX(y) * grad);
}

ImageStructure image_structure(const ErrorStructure& s,
                               std::vector<Functional> x, long n_samples,
                               std::uint64_t seed, CondExpEstimator est) {
  const int d = static_cast<int>(x.size());
  if (d == 0) throw ValidationError("image_structure: empty coordinate map");
  if (n_samples < 16)
    throw ValidationError("image_structure: sample too small to bin");
  for (const auto& xi : x)
    if (xi.min_dim() > s.dim)
      throw ArityError("image_structure: map uses coordinates beyond the source");

  ImageStructure im;
  im.source = s;
  im.X = std::move(x);
  im.n_samples = n_samples;
  im.seed = seed;

  CondExpEstimator e = est;
  if (e.kind == CondExpEstimator::Kind::auto_rule)
    e.kind = d <= 2 ? CondExpEstimator::Kind::binning
                    : CondExpEstimator::Kind::knn;
  if (e.kind == CondExpEstimator::Kind::binning) {
    if (d > 2)
      throw ValidationError("image_structure: binning stops at two image axes");
    e.bins = resolve_bins(e, n_samples);
    e.neighbors = 0;
  } else {
    e.neighbors = resolve_neighbors(e, n_samples);
    e.bins = 0;
  }
  im.estimator = e;

  Rng rng(seed);
  im.ws.resize(n_samples, s.dim);
  im.ys.resize(n_samples, d);
  im.gs.reserve(static_cast<std::size_t>(n_samples));
  for (long i = 0; i < n_samples; ++i) {
    const Vector w = s.sample(rng);
    im.ws.row(i) = w.transpose();
    for (int j = 0; j < d; ++j)
      im.ys(i, j) = im.X[static_cast<std::size_t>(j)].eval(w);
    im.gs.push_back(gamma_matrix(s, im.X, w));
  }
  if (!im.ws.allFinite() || !im.ys.allFinite())
    throw NonFiniteError("image_structure: non-finite sample");

  if (e.kind == CondExpEstimator::Kind::binning) build_cells(im);
  else im.sample_cell.assign(static_cast<std::size_t>(n_samples), -1);
  return im;
}

CellStats cell_vector_stats(const ImageStructure& im,
                            const std::function<Vector(const Vector&)>& f) {
  if (im.cells.empty())
    throw EstimatorError("cell_vector_stats: no cells to aggregate over");
  const Vector probe = f(im.ws.row(0));
  const Index p = probe.size();
  const std::size_t nc = im.cells.size();
  std::vector<Vector> s1(nc, Vector::Zero(p)), s2(nc, Vector::Zero(p));
  for (long i = 0; i < im.n_samples; ++i) {
    const Vector v = i == 0 ? probe : f(im.ws.row(i));
    const auto c = static_cast<std::size_t>(
        im.sample_cell[static_cast<std::size_t>(i)]);
    s1[c] += v;
    s2[c] += v.cwiseProduct(v);
  }
  CellStats out;
  out.mean.resize(nc);
  out.se.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const double cnt = static_cast<double>(im.cells[c].count);
    out.mean[c] = s1[c] / cnt;
    if (im.cells[c].count > 1) {
      const Vector var =
          (s2[c] - cnt * out.mean[c].cwiseProduct(out.mean[c])) / (cnt - 1.0);
      out.se[c] = (var.cwiseMax(0.0) / cnt).cwiseSqrt();
    } else {
      out.se[c] = Vector::Zero(p);
    }
  }
  return out;
}

double tower_residual(const ImageStructure& im, const Functional& g_source,
                      const std::function<double(long)>& h_cell) {
  if (im.cells.empty())
    throw EstimatorError("tower_residual: no cells to condition on");
  if (g_source.min_dim() > im.source.dim)
    throw ArityError("tower_residual: functional exceeds the source dimension");
  std::vector<double> sums(im.cells.size(), 0.0);
  double direct = 0.0;
  for (long i = 0; i < im.n_samples; ++i) {
    const double g = g_source.eval(im.ws.row(i));
    const long c = im.sample_cell[static_cast<std::size_t>(i)];
    sums[static_cast<std::size_t>(c)] += g;
    direct += g * h_cell(c);
  }
  direct /= static_cast<double>(im.n_samples);
  double projected = 0.0;
  for (std::size_t c = 0; c < im.cells.size(); ++c)
    projected += im.cells[c].mass *
                 (sums[c] / static_cast<double>(im.cells[c].count)) *
                 h_cell(static_cast<long>(c));
  return std::abs(direct - projected);
}

// --- pullback ---------------------------------------------------------------

namespace {

// c . w + e decomposition of a polynomial of degree at most one
std::optional<std::pair<Vector, double>> affine_of(const SparsePoly& p) {
  Vector c = Vector::Zero(p.dim());
  double e = 0.0;
  for (const auto& [k, coef] : p.terms()) {
    int deg = 0, axis = -1;
    for (int i = 0; i < p.dim(); ++i) {
      deg += k[static_cast<std::size_t>(i)];
      if (k[static_cast<std::size_t>(i)] > 0) axis = i;
    }
    if (deg == 0) e = coef;
    else if (deg == 1) c[axis] = coef;
    else return std::nullopt;
  }
  return std::make_pair(std::move(c), e);
}

struct Quad1 {
  int axis = -1;
  double a2 = 0.0, a1 = 0.0, a0 = 0.0;
};

// a2 t^2 + a1 t + a0 in a single variable, with a genuine square term
std::optional<Quad1> quad1_of(const SparsePoly& p) {
  Quad1 q;
  for (const auto& [k, coef] : p.terms()) {
    int deg = 0, axis = -1, used = 0;
    for (int i = 0; i < p.dim(); ++i) {
      const int e = k[static_cast<std::size_t>(i)];
      deg += e;
      if (e > 0) {
        axis = i;
        ++used;
      }
    }
    if (deg == 0) {
      q.a0 = coef;
      continue;
    }
    if (used > 1 || deg > 2) return std::nullopt;
    if (q.axis >= 0 && axis != q.axis) return std::nullopt;
    q.axis = axis;
    if (deg == 1) q.a1 = coef;
    else q.a2 = coef;
  }
  if (q.axis < 0 || q.a2 == 0.0) return std::nullopt;
  return q;
}

// {t : q(t) < c} for an upward parabola; empty or one open interval
std::optional<Interval> sublevel(double a2, double a1, double a0, double c) {
  if (c == kInf) return Interval{-kInf, kInf};
  if (c == -kInf) return std::nullopt;
  const double disc = a1 * a1 - 4.0 * a2 * (a0 - c);
  if (disc <= 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  return Interval{(-a1 - s) / (2.0 * a2), (-a1 + s) / (2.0 * a2)};
}

// {t : a2 t^2 + a1 t + a0 in iv} as up to two intervals. Endpoints keep
// the library's half-open convention only approximately; the slack sits
// on Lebesgue-null boundary sets.
std::vector<Interval> quad_preimage(double a2, double a1, double a0,
                                    Interval iv) {
  if (a2 < 0.0)
    return quad_preimage(-a2, -a1, -a0, Interval{-iv.hi, -iv.lo});
  std::vector<Interval> out;
  const auto outer = sublevel(a2, a1, a0, iv.hi);
  const auto inner = sublevel(a2, a1, a0, iv.lo);
  if (!outer) return out;
  if (!inner) {
    out.push_back(*outer);
    return out;
  }
  const Interval left{outer->lo, inner->lo};
  const Interval right{inner->hi, outer->hi};
  if (!left.empty()) out.push_back(left);
  if (!right.empty()) out.push_back(right);
  return out;
}

// orthogonal completion of orthonormal rows to a full basis, greedy over
// the standard directions
Matrix complete_basis(const std::vector<Vector>& rows, int dim) {
  Matrix q(dim, dim);
  int filled = 0;
  for (const auto& r : rows) q.row(filled++) = r.transpose();
  std::vector<bool> used(static_cast<std::size_t>(dim), false);
  while (filled < dim) {
    int best = -1;
    double best_norm = -1.0;
    Vector best_res;
    for (int a = 0; a < dim; ++a) {
      if (used[static_cast<std::size_t>(a)]) continue;
      Vector res = Vector::Unit(dim, a);
      for (int i = 0; i < filled; ++i)
        res -= q.row(i).dot(res) * q.row(i).transpose();
      const double nrm = res.norm();
      if (nrm > best_norm) {
        best_norm = nrm;
        best = a;
        best_res = std::move(res);
      }
    }
    // second projection pass for orthogonality at machine precision
    for (int i = 0; i < filled; ++i)
      best_res -= q.row(i).dot(best_res) * q.row(i).transpose();
    q.row(filled++) = best_res.normalized().transpose();
    used[static_cast<std::size_t>(best)] = true;
  }
  return q;
}

std::optional<BaseFn> pullback_constraints(SparsePoly comp,
                                           const std::vector<SparsePoly>& qs,
                                           const std::vector<Interval>& ivs,
                                           int dim_w) {
  // affine route first: orthogonal directions become a (rotated) box
  std::vector<Vector> rows;
  std::vector<Interval> scaled;
  bool affine = true;
  for (std::size_t j = 0; j < qs.size(); ++j) {
    const auto ae = affine_of(qs[j]);
    if (!ae) {
      affine = false;
      break;
    }
    const double nrm = ae->first.norm();
    if (nrm == 0.0) {
      // constant constraint: keeps everything or kills everything
      if (ivs[j].contains(ae->second)) continue;
      return BaseFn::constant(dim_w, 0.0);
    }
    rows.push_back(ae->first / nrm);
    scaled.push_back(
        {(ivs[j].lo - ae->second) / nrm, (ivs[j].hi - ae->second) / nrm});
  }
  if (affine) {
    if (rows.empty()) return BaseFn::poly(std::move(comp));
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = a + 1; b < rows.size(); ++b)
        if (std::abs(rows[a].dot(rows[b])) > 1e-12) return std::nullopt;
    bool aligned = true;
    for (const auto& r : rows) {
      int nz = 0, axis = -1;
      for (Index i = 0; i < r.size(); ++i)
        if (r[i] != 0.0) {
          ++nz;
          axis = static_cast<int>(i);
        }
      if (nz != 1 || std::abs(r[axis]) != 1.0) {
        aligned = false;
        break;
      }
    }
    std::vector<Interval> box(static_cast<std::size_t>(dim_w));
    if (aligned) {
      for (std::size_t j = 0; j < rows.size(); ++j) {
        int axis = 0;
        for (Index i = 0; i < rows[j].size(); ++i)
          if (rows[j][i] != 0.0) axis = static_cast<int>(i);
        Interval iv = scaled[j];
        if (rows[j][axis] < 0.0) iv = {-iv.hi, -iv.lo};
        auto& slot = box[static_cast<std::size_t>(axis)];
        slot = slot.intersect(iv);
        if (slot.empty()) return BaseFn::constant(dim_w, 0.0);
      }
      return BaseFn::poly_box(std::move(comp), std::move(box));
    }
    if (static_cast<int>(rows.size()) > dim_w) return std::nullopt;
    const Matrix q = complete_basis(rows, dim_w);
    for (std::size_t j = 0; j < scaled.size(); ++j) {
      if (scaled[j].empty()) return BaseFn::constant(dim_w, 0.0);
      box[j] = scaled[j];
    }
    return BaseFn::rotated_box(std::move(comp), std::move(box), q);
  }
  // one quadratic constraint in a single source variable
  if (qs.size() == 1) {
    const auto qd = quad1_of(qs[0]);
    if (qd) {
      const auto segs = quad_preimage(qd->a2, qd->a1, qd->a0, ivs[0]);
      if (segs.empty()) return BaseFn::constant(dim_w, 0.0);
      std::vector<WeightedBaseFn> ts;
      for (const auto& sg : segs) {
        std::vector<Interval> box(static_cast<std::size_t>(dim_w));
        box[static_cast<std::size_t>(qd->axis)] = sg;
        ts.push_back({1.0, BaseFn::poly_box(comp, std::move(box))});
      }
      if (ts.size() == 1) return ts.front().fn;
      return BaseFn::lincomb(std::move(ts));
    }
  }
  return std::nullopt;
}

}  // namespace

BaseFn pullback(const BaseFn& u, const std::vector<Functional>& x, int dim_w) {
  const int d = static_cast<int>(x.size());
  if (!u.valid()) throw ValidationError("pullback: invalid function");
  if (d == 0) throw ValidationError("pullback: empty coordinate map");
  if (u.dim() != d)
    throw DimensionError("pullback: function rank does not match the map");
  for (const auto& xi : x)
    if (xi.min_dim() > dim_w)
      throw ArityError("pullback: map uses coordinates beyond the source");
  if (u.is_lincomb()) {
    std::vector<WeightedBaseFn> ts;
    ts.reserve(u.terms().size());
    for (const auto& t : u.terms())
      ts.push_back({t.coeff, pullback(t.fn, x, dim_w)});
    return BaseFn::lincomb(std::move(ts));
  }
  if (u.is_polybox()) {
    std::vector<SparsePoly> xs;
    bool poly_map = true;
    for (const auto& xi : x) {
      auto p = xi.polynomial(dim_w);
      if (!p) {
        poly_map = false;
        break;
      }
      xs.push_back(std::move(*p));
    }
    if (poly_map) {
      const PolyBoxData& pb = u.polybox();
      SparsePoly comp = poly_compose(pb.poly, xs);
      std::vector<SparsePoly> qs;
      std::vector<Interval> ivs;
      for (std::size_t a = 0; a < pb.box.size(); ++a) {
        if (pb.box[a].full()) continue;
        if (pb.rotated()) {
          SparsePoly q(dim_w);
          for (int j = 0; j < d; ++j)
            if (pb.rot(static_cast<Index>(a), j) != 0.0)
              q = q +
                  xs[static_cast<std::size_t>(j)].scaled(
                      pb.rot(static_cast<Index>(a), j));
          qs.push_back(std::move(q));
        } else {
          qs.push_back(xs[a]);
        }
        ivs.push_back(pb.box[a]);
      }
      auto exact = pullback_constraints(std::move(comp), qs, ivs, dim_w);
      if (exact) return *exact;
    }
  }
  BaseFn uc = u;
  std::vector<Functional> xf = x;
  return BaseFn::generic(dim_w, [uc, xf, d](const Vector& w) {
    Vector y(d);
    for (int j = 0; j < d; ++j) y[j] = xf[static_cast<std::size_t>(j)].eval(w);
    return uc.eval(y);
  });
}

// --- pushforward gradient measure -------------------------------------------

ImageNoise image_mvg(MeasureValuedGradient dgx, std::vector<Functional> x,
                     int comp) {
  if (comp < 0 || comp >= static_cast<int>(dgx.X.size()))
    throw DimensionError("image_mvg: component out of range");
  if (x.empty()) throw ValidationError("image_mvg: empty coordinate map");
  for (const auto& xi : x)
    if (xi.min_dim() > dgx.D.structure.dim)
      throw ArityError("image_mvg: map uses coordinates beyond the source");
  return ImageNoise{std::move(dgx), std::move(x), comp};
}

double image_eval(const ImageNoise& noise, const BaseFn& u) {
  return mvg_eval(noise.dgx, pullback(u, noise.X, noise.dgx.D.structure.dim),
                  noise.comp);
}

std::vector<DensityRow> image_density_check(const MeasureValuedGradient& dgfx,
                                            const std::vector<Functional>& x,
                                            const std::vector<BaseFn>& sets,
                                            long m_realizations, long n_target,
                                            std::uint64_t seed) {
  if (m_realizations < 2 || n_target < 2)
    throw ValidationError("image_density_check: sample budgets too small");
  const int dim_w = dgfx.D.structure.dim;
  const Functional dens = mvg_density(dgfx);
  std::vector<DensityRow> rows;
  rows.reserve(sets.size());
  for (std::size_t t = 0; t < sets.size(); ++t) {
    const BaseFn uw = pullback(sets[t], x, dim_w);
    const PreparedPairing pp = prepare_pairing(dgfx.pairing(0), uw);
    DensityRow r;
    r.truncated = pp.variance();
    r.defect = pp.defect;
    const MomentAccumulator emp = realization_moments(
        pp, m_realizations, derive_seed(seed, 2 * t));
    r.empirical = emp.variance();
    r.emp_stderr = emp.stderr_variance();
    Rng rng(derive_seed(seed, 2 * t + 1));
    MomentAccumulator tgt;
    for (long i = 0; i < n_target; ++i) {
      const Vector w = dgfx.D.structure.sample(rng);
      const double uv = uw.eval(w);
      tgt.add(uv * uv * dens.eval(w));
    }
    r.target = tgt.mean();
    r.target_stderr = tgt.stderr_mean();
    const double se = std::hypot(r.emp_stderr, r.target_stderr);
    const double excess =
        std::max(0.0, std::abs(r.empirical - r.target) - r.defect);
    r.z = se > 0.0 ? excess / se
                   : (excess > 0.0 ? std::numeric_limits<double>::infinity()
                                   : 0.0);
    rows.push_back(r);
  }
  return rows;
}

std::vector<Functional> nabla_image(const Functional& f, int image_dim) {
  if (image_dim < 1) throw DimensionError("nabla_image: empty image space");
  if (f.min_dim() > image_dim)
    throw ArityError("nabla_image: functional exceeds the image dimension");
  std::vector<Functional> g;
  g.reserve(static_cast<std::size_t>(image_dim));
  for (int j = 0; j < image_dim; ++j) g.push_back(f.derivative(j));
  return g;
}

double image_gradient_distance(const ImageStructure& im,
                               const std::vector<Functional>& ga,
                               const std::vector<Functional>& gb) {
  const int d = im.image_dim();
  if (static_cast<int>(ga.size()) != d || static_cast<int>(gb.size()) != d)
    throw DimensionError("image_gradient_distance: field rank mismatch");
  if (im.cells.empty())
    throw EstimatorError("image_gradient_distance: no cells to integrate over");
  double acc = 0.0;
  for (const auto& c : im.cells) {
    Vector delta(d);
    for (int j = 0; j < d; ++j)
      delta[j] = ga[static_cast<std::size_t>(j)].eval(c.center) -
                 gb[static_cast<std::size_t>(j)].eval(c.center);
    acc += c.mass * delta.dot(psd_clamp(c.mean) * delta);
  }
  return std::sqrt(std::max(acc, 0.0));
}

ComposeReport compose_gradient_check(const ImageStructure& imx,
                                     const std::vector<Functional>& u_map,
                                     const std::vector<Functional>& v_fns) {
  const int d = imx.image_dim();
  const int p = static_cast<int>(u_map.size());
  if (p == 0) throw ValidationError("compose_gradient_check: empty middle map");
  for (const auto& ui : u_map)
    if (ui.min_dim() > d)
      throw ArityError("compose_gradient_check: middle map exceeds the image");
  for (const auto& v : v_fns)
    if (v.min_dim() > p)
      throw ArityError("compose_gradient_check: outer functional exceeds the middle image");
  if (imx.cells.empty())
    throw EstimatorError("compose_gradient_check: no cells to integrate over");
  ComposeReport rep;
  rep.cells = static_cast<long>(imx.cells.size());
  for (const auto& v : v_fns) {
    const Functional vu = v.substitute(u_map);
    std::vector<Functional> lhs, rhs;
    for (int j = 0; j < d; ++j) {
      lhs.push_back(vu.derivative(j));
      Functional r = Functional::constant(0.0);
      for (int b = 0; b < p; ++b)
        r = r + v.derivative(b).substitute(u_map) *
                    u_map[static_cast<std::size_t>(b)].derivative(j);
      rhs.push_back(r);
    }
    for (const auto& c : imx.cells) {
      Vector delta(d), left(d);
      for (int j = 0; j < d; ++j) {
        left[j] = lhs[static_cast<std::size_t>(j)].eval(c.center);
        delta[j] = left[j] - rhs[static_cast<std::size_t>(j)].eval(c.center);
      }
      const Matrix g = psd_clamp(c.mean);
      rep.residual += c.mass * delta.dot(g * delta);
      rep.scale += c.mass * left.dot(g * left);
    }
  }
  rep.residual = std::sqrt(std::max(rep.residual, 0.0));
  rep.scale = std::sqrt(std::max(rep.scale, 0.0));
  return rep;
}

Vector image_dirichlet_gradient(const ImageStructure& im, const Functional& f,
                                const Vector& y, SqrtMethod method) {
  if (f.min_dim() > im.image_dim())
    throw ArityError("image_dirichlet_gradient: functional exceeds the image");
  const auto [v, grad] = f.eval_grad(y);
  (void)v;
  return psd_sqrt(im.gammaX(y), method) * grad;
}

std::vector<StarRow> star_inequality_rows(const ImageStructure& im,
                                          const DGradientOp& d,
                                          const Functional& f) {
  if (im.cells.empty())
    throw EstimatorError("star_inequality_rows: no cells to condition on");
  if (d.structure.dim != im.source.dim)
    throw DimensionError("star_inequality_rows: gradient lives on a different source");
  if (f.min_dim() > im.image_dim())
    throw ArityError("star_inequality_rows: functional exceeds the image");
  const int K = d.K;
  const std::size_t nc = im.cells.size();
  std::vector<Vector> s1(nc, Vector::Zero(K)), s2(nc, Vector::Zero(K));
  std::vector<double> q1(nc, 0.0), q2(nc, 0.0);
  for (long i = 0; i < im.n_samples; ++i) {
    const Vector v = dgrad_apply(d, f, im.X, im.ws.row(i));
    const double s = v.squaredNorm();
    const auto c = static_cast<std::size_t>(
        im.sample_cell[static_cast<std::size_t>(i)]);
    s1[c] += v;
    s2[c] += v.cwiseProduct(v);
    q1[c] += s;
    q2[c] += s * s;
  }
  std::vector<StarRow> rows;
  rows.reserve(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const ImageCell& cell = im.cells[c];
    const double cnt = static_cast<double>(cell.count);
    StarRow r;
    r.center = cell.center;
    r.mass = cell.mass;
    r.count = cell.count;
    const Vector m = s1[c] / cnt;
    Vector se = Vector::Zero(K);
    double qse = 0.0;
    if (cell.count > 1) {
      const Vector var = (s2[c] - cnt * m.cwiseProduct(m)) / (cnt - 1.0);
      se = (var.cwiseMax(0.0) / cnt).cwiseSqrt();
      const double qvar =
          (q2[c] - cnt * (q1[c] / cnt) * (q1[c] / cnt)) / (cnt - 1.0);
      qse = std::sqrt(std::max(qvar, 0.0) / cnt);
    }
    r.lhs = m.squaredNorm();
    r.lhs_stderr = 2.0 * std::sqrt(m.cwiseProduct(se).squaredNorm());
    r.rhs = q1[c] / cnt;
    r.rhs_stderr = qse;
    r.gap = r.rhs - r.lhs;
    const double sse = std::hypot(r.lhs_stderr, r.rhs_stderr);
    r.z = sse > 0.0 ? r.gap / sse : 0.0;
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace errcalc
