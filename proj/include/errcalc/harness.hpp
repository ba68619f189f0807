#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <errcalc/expr.hpp>
#include <errcalc/structure.hpp>

namespace errcalc {

// Verdict thresholds shared by every statistical check. z_threshold
// gates |estimate - target| after the truncation defect is discounted;
// ks_level is the Kolmogorov-Smirnov rejection level; the truncation
// budget caps acceptable defects where a check enforces one.
struct TolerancePolicy {
  double z_threshold = 3.0;
  double ks_level = 0.01;
  double truncation_budget = 0.05;
};

// Catalog structure selector. gaussian_product uses dim alone;
// gaussian_aniso adds a constant PSD gamma matrix; wiener_ou reads dim
// as the number of path increments.
struct StructureSpec {
  std::string name = "gaussian_product";
  int dim = 2;
  Matrix gamma;
};

// Expansion family for the noise constructions: hermite (degree n on
// the Gaussian catalog structures) or haar (n dyadic levels on [0,1]).
// k is the auxiliary Hilbert truncation.
struct WhiteNoiseSpec {
  std::string basis = "hermite";
  int n = 8;
  int k = 4;
};

struct EstimatorSpec {
  std::string kind = "auto";  // auto | binning | knn
  int bins = 0;
  int neighbors = 0;
};

struct SampleSpec {
  long m_samples = 100000;
  long realizations = 10000;
};

struct WienerSpec {
  int increments = 16;
  int chaos_degree = 2;
  int copies = 0;  // 0 selects increments + 1
};

// Validated harness configuration. The seed is mandatory; every check
// derives its own stream from (seed, hash of the check name), so runs
// are reproducible and order-independent.
struct RunConfig {
  std::uint64_t seed = 0;
  StructureSpec structure;
  std::map<std::string, std::string> functional_text;
  std::map<std::string, Functional> functionals;
  WhiteNoiseSpec white_noise;
  EstimatorSpec estimator;
  SampleSpec samples;
  TolerancePolicy tolerance;
  WienerSpec wiener;
};

// JSON text in, validated config out, defaults applied. Throws
// ParseError with the location of a malformed document or expression,
// and ValidationError listing every schema violation at once.
RunConfig parse_config(const std::string& text);

ErrorStructure build_structure(const StructureSpec& spec);

struct CheckReport {
  std::string name;
  std::string suite;
  double target = 0.0;
  std::string provenance;  // analytic | oracle-estimated
  double estimate = 0.0;
  double std_error = 0.0;
  double defect = 0.0;
  double z = 0.0;
  bool pass = false;
  double wall_ms = 0.0;
  std::string detail;
};

const std::vector<std::string>& suite_names();

// Names of the checks a suite would run under this config, sorted.
std::vector<std::string> check_names(const RunConfig& cfg,
                                     const std::string& suite);

// Runs every check of the suite. Module errors become failing report
// entries instead of aborting the run. The report is sorted by check
// name and identical for any worker count.
std::vector<CheckReport> run_suite(const RunConfig& cfg,
                                   const std::string& suite, int workers = 1);

bool all_pass(const std::vector<CheckReport>& reports);

std::string report_json(const std::vector<CheckReport>& reports);
std::string report_csv(const std::vector<CheckReport>& reports);
// JSON with wall times zeroed: the byte-comparable payload.
std::string report_payload(const std::vector<CheckReport>& reports);

struct SensInput {
  std::string expr;
  double contribution = 0.0;
  double std_error = 0.0;
};

struct SensCell {
  Vector center;
  double mass = 0.0;
  Vector gradient;
  double gamma_f = 0.0;
};

// Error-propagation summary of a quantity: the total quadratic error
// rate int Gamma[q] dm, its decomposition over the inputs, and the
// image-space gradient field when the quantity factors through the
// inputs and the image is low-dimensional enough to estimate.
struct SensitivityReport {
  std::string quantity;
  double total = 0.0;
  double total_std_error = 0.0;
  std::string provenance;
  std::vector<SensInput> inputs;
  bool image_built = false;
  std::string image_note;
  std::vector<SensCell> cells;
};

SensitivityReport run_sensitivity(const RunConfig& cfg,
                                  const Functional& quantity,
                                  std::vector<Functional> inputs,
                                  std::vector<std::string> input_text = {});
std::string sensitivity_json(const SensitivityReport& rep);

}  // namespace errcalc
