#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <errcalc/mvg.hpp>
#include <errcalc/structure.hpp>

namespace errcalc {

// Conditional-expectation estimator for E[. | X = x]. Equal-mass binning
// serves image dimensions 1 and 2; k-nearest-neighbor averaging takes
// over above that. Zero parameters select the standard rules
// bins = ceil(n^(1/3)) per axis, neighbors = ceil(sqrt(n)).
struct CondExpEstimator {
  enum class Kind { auto_rule, binning, knn };
  Kind kind = Kind::auto_rule;
  int bins = 0;
  int neighbors = 0;
};

struct ImageCell {
  long index = 0;  // flat bin index
  long count = 0;
  double mass = 0.0;  // fraction of the sample in the cell
  Vector center;      // mean of the image points in the cell
  Matrix mean;        // cell mean of the Gamma matrix, not clamped
  Matrix se;          // entrywise standard error of that mean
};

// Image of an error structure under a map X: the pushforward sample of m
// together with a conditional-expectation estimate of the Gamma matrix
// field over the image coordinates, all frozen at construction.
struct ImageStructure {
  ErrorStructure source;
  std::vector<Functional> X;
  CondExpEstimator estimator;  // resolved kind and parameters
  long n_samples = 0;
  std::uint64_t seed = 0;

  Matrix ws;                    // n x source-dim sample of m
  Matrix ys;                    // n x d image of the sample
  std::vector<Matrix> gs;       // Gamma[X_i, X_j](w) at each sample
  std::vector<Vector> cuts;     // interior bin edges per image axis
  std::vector<ImageCell> cells; // populated cells in flat-index order
  std::vector<long> cell_pos;   // flat index -> cells position, -1 empty
  std::vector<long> sample_cell;  // cells position of each sample

  int image_dim() const { return static_cast<int>(X.size()); }

  // cells position for an image point; -1 outside any populated cell.
  // Only meaningful for the binning estimator.
  long locate(const Vector& y) const;
  // EstimatorError when the point falls in an empty or unknown cell
  const ImageCell& cell_at(const Vector& y) const;

  // estimated Gamma matrix of the image coordinates at y, clamped PSD
  Matrix gammaX(const Vector& y) const;
  // functional calculus on the image: grad F^T gammaX grad F at y
  double gammaF(const Vector& y, const Functional& f) const;
};

ImageStructure image_structure(const ErrorStructure& s,
                               std::vector<Functional> x, long n_samples,
                               std::uint64_t seed,
                               CondExpEstimator est = {});

// Per-cell mean and standard error of a vector statistic of the source
// sample, aligned with the cells vector.
struct CellStats {
  std::vector<Vector> mean;
  std::vector<Vector> se;
};
CellStats cell_vector_stats(const ImageStructure& im,
                            const std::function<Vector(const Vector&)>& f);

// E[E[g | X] h] - E[g h] for h measurable with respect to the cell
// partition (h given as a function of the cells position). Zero up to
// rounding by the projection property of the conditional mean.
double tower_residual(const ImageStructure& im, const Functional& g_source,
                      const std::function<double(long)>& h_cell);

// u(X(.)) on the source space. Exact closed-form result whenever u is
// polynomial-on-box and the active box constraints compose with X into
// axis-aligned or rotated boxes (affine constraints with orthogonal
// directions) or a single-variable quadratic constraint; otherwise a
// generic callable. Linear combinations pull back term by term.
BaseFn pullback(const BaseFn& u, const std::vector<Functional>& x, int dim_w);

// Gradient measure pushed forward to the image: evaluating on u means
// evaluating the source pairing on the pullback of u.
struct ImageNoise {
  MeasureValuedGradient dgx;
  std::vector<Functional> X;
  int comp = 0;
};
ImageNoise image_mvg(MeasureValuedGradient dgx, std::vector<Functional> x,
                     int comp = 0);
double image_eval(const ImageNoise& noise, const BaseFn& u);

// Variance audit of the pushforward gradient measure of a composite
// F(X) over a family of image sets: the realized variance of
// int 1_A(X) d_G F(X) against an independent estimate of
// int 1_A(X) Gamma[F(X)] dm. z discounts the truncation defect first.
struct DensityRow {
  double truncated = 0.0;  // variance of the prepared pairing
  double defect = 0.0;     // truncation defect bound of the pairing
  double empirical = 0.0;  // sample variance over realizations
  double emp_stderr = 0.0;
  double target = 0.0;  // Monte Carlo estimate of the density integral
  double target_stderr = 0.0;
  double z = 0.0;
};
std::vector<DensityRow> image_density_check(const MeasureValuedGradient& dgfx,
                                            const std::vector<Functional>& x,
                                            const std::vector<BaseFn>& sets,
                                            long m_realizations, long n_target,
                                            std::uint64_t seed);

// Gradient representative of a functional on the image space.
std::vector<Functional> nabla_image(const Functional& f, int image_dim);

// L2(gammaX . X_*m) distance between two gradient fields on the image,
// evaluated over the cell decomposition.
double image_gradient_distance(const ImageStructure& im,
                               const std::vector<Functional>& ga,
                               const std::vector<Functional>& gb);

// Chain rule for nested images: for each V, the gradient of V o U minus
// the composed gradients (nabla V) o U . jacobian(U), measured in the
// weighted L2 norm over the cells of the inner image. residual is
// rounding-level; scale carries the same norm of the left side.
struct ComposeReport {
  double residual = 0.0;
  double scale = 0.0;
  long cells = 0;
};
ComposeReport compose_gradient_check(const ImageStructure& imx,
                                     const std::vector<Functional>& u_map,
                                     const std::vector<Functional>& v_fns);

// Dirichlet gradient on the image: a root M(y) of the estimated Gamma
// matrix applied to grad F, so the squared norm reproduces gammaF.
Vector image_dirichlet_gradient(const ImageStructure& im, const Functional& f,
                                const Vector& y,
                                SqrtMethod method = SqrtMethod::cholesky);

// Conditional Jensen gap per cell: |E[D[F(X)] | X]|^2 against
// E[|D[F(X)]|^2 | X]. The gap is nonnegative in expectation and strictly
// positive wherever X folds distinct source points together.
struct StarRow {
  Vector center;
  double mass = 0.0;
  long count = 0;
  double lhs = 0.0;  // squared norm of the conditional mean gradient
  double lhs_stderr = 0.0;
  double rhs = 0.0;  // conditional mean squared gradient norm
  double rhs_stderr = 0.0;
  double gap = 0.0;
  double z = 0.0;
};
std::vector<StarRow> star_inequality_rows(const ImageStructure& im,
                                          const DGradientOp& d,
                                          const Functional& f);

}  // namespace errcalc
