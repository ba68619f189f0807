#include <errcalc/harness.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include <json.hpp>

#include <errcalc/errors.hpp>
#include <errcalc/image.hpp>
#include <errcalc/mc.hpp>
#include <errcalc/polynomial.hpp>
#include <errcalc/rng.hpp>
#include <errcalc/wiener.hpp>

#include "check_catalog.hpp"

namespace errcalc {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void locate(const std::string& text, std::size_t byte, int& line, int& col) {
  line = 1;
  col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

void check_keys(const json& obj, const std::string& where,
                const std::vector<std::string>& known,
                std::vector<std::string>& bad) {
  for (const auto& item : obj.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end())
      bad.push_back(where + ": unknown key '" + item.key() + "'");
  }
}

bool get_long(const json& obj, const char* key, const std::string& where,
              long& out, std::vector<std::string>& bad) {
  if (!obj.contains(key)) return false;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    bad.push_back(where + "." + key + ": must be an integer");
    return false;
  }
  out = v.get<long>();
  return true;
}

bool get_double(const json& obj, const char* key, const std::string& where,
                double& out, std::vector<std::string>& bad) {
  if (!obj.contains(key)) return false;
  const json& v = obj.at(key);
  if (!v.is_number()) {
    bad.push_back(where + "." + key + ": must be a number");
    return false;
  }
  out = v.get<double>();
  return true;
}

bool get_string(const json& obj, const char* key, const std::string& where,
                std::string& out, std::vector<std::string>& bad) {
  if (!obj.contains(key)) return false;
  const json& v = obj.at(key);
  if (!v.is_string()) {
    bad.push_back(where + "." + key + ": must be a string");
    return false;
  }
  out = v.get<std::string>();
  return true;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

ordered_json report_entry(const CheckReport& r, bool keep_wall) {
  ordered_json o;
  o["name"] = r.name;
  o["suite"] = r.suite;
  o["target"] = r.target;
  o["provenance"] = r.provenance;
  o["estimate"] = r.estimate;
  o["stderr"] = r.std_error;
  o["defect"] = r.defect;
  o["z"] = r.z;
  o["verdict"] = r.pass ? "pass" : "fail";
  o["wall_ms"] = keep_wall ? r.wall_ms : 0.0;
  o["detail"] = r.detail;
  return o;
}

std::string dump_reports(const std::vector<CheckReport>& reports,
                         bool keep_wall) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : reports) arr.push_back(report_entry(r, keep_wall));
  return arr.dump(2) + "\n";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += '"';
  return out;
}

double sane(double x) { return std::isfinite(x) ? x : 0.0; }

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 0, col = 0;
    locate(text, e.byte, line, col);
    throw ParseError("malformed config document", line, col);
  }

  std::vector<std::string> bad;
  RunConfig cfg;
  if (!j.is_object()) {
    throw ValidationError("invalid config: top level must be an object");
  }
  check_keys(j, "config",
             {"seed", "structure", "functionals", "white_noise", "estimator",
              "samples", "tolerance", "wiener"},
             bad);

  if (!j.contains("seed")) {
    bad.push_back("seed: required, no entropy defaults");
  } else if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0) {
    bad.push_back("seed: must be a nonnegative integer");
  } else {
    cfg.seed = j["seed"].get<std::uint64_t>();
  }

  if (j.contains("structure")) {
    const json& s = j["structure"];
    if (!s.is_object()) {
      bad.push_back("structure: must be an object");
    } else {
      check_keys(s, "structure", {"name", "dim", "gamma"}, bad);
      get_string(s, "name", "structure", cfg.structure.name, bad);
      long dim = cfg.structure.dim;
      if (get_long(s, "dim", "structure", dim, bad)) {
        if (dim < 1 || dim > 64)
          bad.push_back("structure.dim: must be in [1, 64]");
        else
          cfg.structure.dim = static_cast<int>(dim);
      }
      const bool aniso = cfg.structure.name == "gaussian_aniso";
      if (cfg.structure.name != "gaussian_product" && !aniso &&
          cfg.structure.name != "wiener_ou")
        bad.push_back("structure.name: unknown catalog entry '" +
                      cfg.structure.name + "'");
      if (s.contains("gamma")) {
        if (!aniso) {
          bad.push_back("structure.gamma: only valid for gaussian_aniso");
        } else if (!s["gamma"].is_array()) {
          bad.push_back("structure.gamma: must be an array of rows");
        } else {
          const auto& rows = s["gamma"];
          const int d = cfg.structure.dim;
          Matrix g(d, d);
          bool ok = static_cast<int>(rows.size()) == d;
          for (int a = 0; ok && a < d; ++a) {
            const auto& row = rows[static_cast<std::size_t>(a)];
            ok = row.is_array() && static_cast<int>(row.size()) == d;
            for (int b = 0; ok && b < d; ++b) {
              const auto& cell = row[static_cast<std::size_t>(b)];
              ok = cell.is_number();
              if (ok) g(a, b) = cell.get<double>();
            }
          }
          if (!ok)
            bad.push_back("structure.gamma: must be a dim x dim numeric matrix");
          else
            cfg.structure.gamma = g;
        }
      } else if (aniso) {
        bad.push_back("structure.gamma: required for gaussian_aniso");
      }
    }
  }

  if (j.contains("white_noise")) {
    const json& w = j["white_noise"];
    if (!w.is_object()) {
      bad.push_back("white_noise: must be an object");
    } else {
      check_keys(w, "white_noise", {"basis", "n", "k"}, bad);
      get_string(w, "basis", "white_noise", cfg.white_noise.basis, bad);
      if (cfg.white_noise.basis != "hermite" && cfg.white_noise.basis != "haar")
        bad.push_back("white_noise.basis: must be 'hermite' or 'haar'");
      long n = cfg.white_noise.n, k = cfg.white_noise.k;
      if (get_long(w, "n", "white_noise", n, bad)) {
        if (n < 1 || n > 64)
          bad.push_back("white_noise.n: must be in [1, 64]");
        else
          cfg.white_noise.n = static_cast<int>(n);
      }
      if (get_long(w, "k", "white_noise", k, bad)) {
        if (k < 1 || k > 256)
          bad.push_back("white_noise.k: must be in [1, 256]");
        else
          cfg.white_noise.k = static_cast<int>(k);
      }
    }
  }

  if (j.contains("estimator")) {
    const json& e = j["estimator"];
    if (!e.is_object()) {
      bad.push_back("estimator: must be an object");
    } else {
      check_keys(e, "estimator", {"kind", "bins", "neighbors"}, bad);
      get_string(e, "kind", "estimator", cfg.estimator.kind, bad);
      if (cfg.estimator.kind != "auto" && cfg.estimator.kind != "binning" &&
          cfg.estimator.kind != "knn")
        bad.push_back("estimator.kind: must be 'auto', 'binning' or 'knn'");
      long b = 0, k = 0;
      if (get_long(e, "bins", "estimator", b, bad)) {
        if (b < 0)
          bad.push_back("estimator.bins: must be nonnegative");
        else
          cfg.estimator.bins = static_cast<int>(b);
      }
      if (get_long(e, "neighbors", "estimator", k, bad)) {
        if (k < 0)
          bad.push_back("estimator.neighbors: must be nonnegative");
        else
          cfg.estimator.neighbors = static_cast<int>(k);
      }
    }
  }

  if (j.contains("samples")) {
    const json& s = j["samples"];
    if (!s.is_object()) {
      bad.push_back("samples: must be an object");
    } else {
      check_keys(s, "samples", {"m", "realizations"}, bad);
      long m = cfg.samples.m_samples, r = cfg.samples.realizations;
      if (get_long(s, "m", "samples", m, bad)) {
        if (m < 16)
          bad.push_back("samples.m: must be at least 16");
        else
          cfg.samples.m_samples = m;
      }
      if (get_long(s, "realizations", "samples", r, bad)) {
        if (r < 2)
          bad.push_back("samples.realizations: must be at least 2");
        else
          cfg.samples.realizations = r;
      }
    }
  }

  if (j.contains("tolerance")) {
    const json& t = j["tolerance"];
    if (!t.is_object()) {
      bad.push_back("tolerance: must be an object");
    } else {
      check_keys(t, "tolerance", {"z", "ks_level", "truncation_budget"}, bad);
      double z = cfg.tolerance.z_threshold, ks = cfg.tolerance.ks_level,
             tb = cfg.tolerance.truncation_budget;
      if (get_double(t, "z", "tolerance", z, bad)) {
        if (!(z > 0))
          bad.push_back("tolerance.z: must be positive");
        else
          cfg.tolerance.z_threshold = z;
      }
      if (get_double(t, "ks_level", "tolerance", ks, bad)) {
        if (!(ks > 0 && ks < 1))
          bad.push_back("tolerance.ks_level: must be in (0, 1)");
        else
          cfg.tolerance.ks_level = ks;
      }
      if (get_double(t, "truncation_budget", "tolerance", tb, bad)) {
        if (!(tb > 0))
          bad.push_back("tolerance.truncation_budget: must be positive");
        else
          cfg.tolerance.truncation_budget = tb;
      }
    }
  }

  if (j.contains("wiener")) {
    const json& w = j["wiener"];
    if (!w.is_object()) {
      bad.push_back("wiener: must be an object");
    } else {
      check_keys(w, "wiener", {"increments", "chaos_degree", "copies"}, bad);
      long inc = cfg.wiener.increments, deg = cfg.wiener.chaos_degree,
           cop = cfg.wiener.copies;
      if (get_long(w, "increments", "wiener", inc, bad)) {
        if (inc < 1 || inc > 64)
          bad.push_back("wiener.increments: must be in [1, 64]");
        else
          cfg.wiener.increments = static_cast<int>(inc);
      }
      if (get_long(w, "chaos_degree", "wiener", deg, bad)) {
        if (deg < 1 || deg > 6)
          bad.push_back("wiener.chaos_degree: must be in [1, 6]");
        else
          cfg.wiener.chaos_degree = static_cast<int>(deg);
      }
      if (get_long(w, "copies", "wiener", cop, bad)) {
        if (cop < 0 || cop > 256)
          bad.push_back("wiener.copies: must be in [0, 256]");
        else
          cfg.wiener.copies = static_cast<int>(cop);
      }
    }
  }

  if (j.contains("functionals")) {
    const json& f = j["functionals"];
    if (!f.is_object()) {
      bad.push_back("functionals: must be an object of name -> expression");
    } else {
      for (const auto& item : f.items()) {
        if (!item.value().is_string()) {
          bad.push_back("functionals." + item.key() + ": must be a string");
          continue;
        }
        const std::string expr = item.value().get<std::string>();
        const Functional fn = Functional::parse(expr);  // ParseError escapes
        if (fn.min_dim() > cfg.structure.dim)
          bad.push_back("functionals." + item.key() + ": uses coordinate x" +
                        std::to_string(fn.min_dim()) +
                        " beyond structure.dim = " +
                        std::to_string(cfg.structure.dim));
        cfg.functional_text[item.key()] = expr;
        cfg.functionals.emplace(item.key(), fn);
      }
    }
  }

  if (!bad.empty()) {
    std::string msg = "invalid config: ";
    for (std::size_t i = 0; i < bad.size(); ++i) {
      if (i) msg += "; ";
      msg += bad[i];
    }
    throw ValidationError(msg);
  }
  return cfg;
}

ErrorStructure build_structure(const StructureSpec& spec) {
  if (spec.name == "gaussian_product") return gaussian_product(spec.dim);
  if (spec.name == "gaussian_aniso")
    return gaussian_aniso(spec.dim, spec.gamma);
  if (spec.name == "wiener_ou") return ou_structure(spec.dim);
  throw ValidationError("unknown structure catalog entry '" + spec.name + "'");
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {
      "all",   "axioms", "prop1", "prop2", "prop3",
      "prop4", "prop5",  "corollary", "star", "wiener"};
  return names;
}

std::vector<std::string> check_names(const RunConfig& cfg,
                                     const std::string& suite) {
  std::vector<std::string> out;
  for (const auto& c : detail::check_catalog()) {
    if (suite != "all" && c.suite != suite) continue;
    if (c.enabled && !c.enabled(cfg)) continue;
    out.push_back(c.name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CheckReport> run_suite(const RunConfig& cfg,
                                   const std::string& suite, int workers) {
  const auto& names = suite_names();
  if (std::find(names.begin(), names.end(), suite) == names.end())
    throw ValidationError("unknown suite '" + suite + "'");
  if (cfg.samples.m_samples < 16 || cfg.samples.realizations < 2)
    throw ValidationError("sample counts too small to run any check");

  std::vector<const detail::CheckDef*> defs;
  for (const auto& c : detail::check_catalog()) {
    if (suite != "all" && c.suite != suite) continue;
    if (c.enabled && !c.enabled(cfg)) continue;
    defs.push_back(&c);
  }

  std::vector<CheckReport> out(defs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= defs.size()) return;
      const auto& d = *defs[i];
      CheckReport r;
      r.name = d.name;
      r.suite = d.suite;
      r.provenance = "analytic";
      const auto t0 = std::chrono::steady_clock::now();
      try {
        d.run(cfg, derive_seed(cfg.seed, detail::name_hash(d.name)), r);
      } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("error: ") + e.what();
      }
      r.target = sane(r.target);
      r.estimate = sane(r.estimate);
      r.std_error = sane(r.std_error);
      r.defect = sane(r.defect);
      r.z = std::isfinite(r.z) ? r.z : 1e9;
      r.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
      out[i] = std::move(r);
    }
  };

  workers = std::max(1, workers);
  if (workers == 1 || defs.size() <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    const int count =
        std::min<std::size_t>(static_cast<std::size_t>(workers), defs.size());
    pool.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::sort(out.begin(), out.end(),
            [](const CheckReport& a, const CheckReport& b) {
              return a.name < b.name;
            });
  return out;
}

bool all_pass(const std::vector<CheckReport>& reports) {
  return std::all_of(reports.begin(), reports.end(),
                     [](const CheckReport& r) { return r.pass; });
}

std::string report_json(const std::vector<CheckReport>& reports) {
  return dump_reports(reports, true);
}

std::string report_payload(const std::vector<CheckReport>& reports) {
  return dump_reports(reports, false);
}

std::string report_csv(const std::vector<CheckReport>& reports) {
  std::string out =
      "name,suite,target,provenance,estimate,stderr,defect,z,verdict,"
      "wall_ms,detail\n";
  for (const auto& r : reports) {
    out += csv_field(r.name) + "," + r.suite + "," + fmt(r.target) + "," +
           r.provenance + "," + fmt(r.estimate) + "," + fmt(r.std_error) +
           "," + fmt(r.defect) + "," + fmt(r.z) + "," +
           (r.pass ? "pass" : "fail") + "," + fmt(r.wall_ms) + "," +
           csv_field(r.detail) + "\n";
  }
  return out;
}

namespace {

bool coordinate_index(const Functional& f, int& idx) {
  const auto& r = f.root();
  if (r->kind != ExprKind::coordinate) return false;
  idx = r->coord;
  return true;
}

bool zero_constant(const Functional& f) {
  return f.root()->kind == ExprKind::constant && f.root()->value == 0.0;
}

struct IntegralValue {
  double value = 0.0;
  double std_error = 0.0;
  bool closed = false;
};

IntegralValue integrate_gamma(const ErrorStructure& s, const Functional& g,
                              long m, std::uint64_t seed) {
  IntegralValue out;
  if (const auto p = g.polynomial(s.dim)) {
    out.value = gaussian_mean(*p);
    out.closed = true;
    return out;
  }
  const auto mom = mc_moments(m, seed, 1, [&](Rng& rng) {
    const Vector w = s.sample(rng);
    return g.eval(w);
  });
  out.value = mom.mean();
  out.std_error = mom.stderr_mean();
  return out;
}

}  // namespace

SensitivityReport run_sensitivity(const RunConfig& cfg,
                                  const Functional& quantity,
                                  std::vector<Functional> inputs,
                                  std::vector<std::string> input_text) {
  const ErrorStructure s = build_structure(cfg.structure);
  if (quantity.min_dim() > s.dim)
    throw ValidationError("quantity uses coordinates beyond the structure");
  if (inputs.empty()) {
    for (int i = 0; i < s.dim; ++i) {
      inputs.push_back(Functional::coordinate(i));
      input_text.push_back("x" + std::to_string(i + 1));
    }
  }
  if (input_text.size() != inputs.size()) {
    input_text.clear();
    for (const auto& f : inputs) input_text.push_back(f.to_string());
  }
  for (const auto& f : inputs)
    if (f.min_dim() > s.dim)
      throw ValidationError("input uses coordinates beyond the structure");

  SensitivityReport rep;
  rep.quantity = quantity.to_string();

  const Functional gq = gamma_functional(s, quantity, quantity);
  const auto total = integrate_gamma(s, gq, cfg.samples.m_samples,
                                     derive_seed(cfg.seed, 0x5e5e5e5eull));
  rep.total = total.value;
  rep.total_std_error = total.std_error;
  rep.provenance = total.closed ? "analytic" : "oracle-estimated";

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Functional gi = gamma_functional(s, inputs[i], inputs[i]);
    const auto c = integrate_gamma(s, gi, cfg.samples.m_samples,
                                   derive_seed(cfg.seed, 0x600dull + i));
    rep.inputs.push_back({input_text[i], c.value, c.std_error});
  }

  // image step: only when every input is a plain coordinate and the
  // quantity references no other coordinate
  const int d = static_cast<int>(inputs.size());
  std::vector<int> slots(static_cast<std::size_t>(s.dim), -1);
  bool coords = true;
  for (int i = 0; i < d && coords; ++i) {
    int idx = -1;
    coords = coordinate_index(inputs[static_cast<std::size_t>(i)], idx) &&
             idx < s.dim && slots[static_cast<std::size_t>(idx)] < 0;
    if (coords) slots[static_cast<std::size_t>(idx)] = i;
  }
  bool covered = coords;
  for (int jc = 0; covered && jc < s.dim; ++jc) {
    if (slots[static_cast<std::size_t>(jc)] >= 0) continue;
    if (!zero_constant(quantity.derivative(jc))) covered = false;
  }
  if (!coords || !covered) {
    rep.image_note = "quantity does not factor through the inputs";
    return rep;
  }
  if (d > 2) {
    rep.image_note = "image step limited to one or two inputs";
    return rep;
  }

  std::vector<Functional> remap;
  for (int jc = 0; jc < s.dim; ++jc) {
    const int slot = slots[static_cast<std::size_t>(jc)];
    remap.push_back(slot >= 0 ? Functional::coordinate(slot)
                              : Functional::constant(0.0));
  }
  const Functional f_img = quantity.substitute(remap);

  CondExpEstimator est;
  if (cfg.estimator.kind == "binning") est.kind = CondExpEstimator::Kind::binning;
  if (cfg.estimator.kind == "knn") est.kind = CondExpEstimator::Kind::knn;
  est.bins = cfg.estimator.bins;
  est.neighbors = cfg.estimator.neighbors;
  const long n_img = std::min<long>(cfg.samples.m_samples, 50000);
  const auto im = image_structure(s, inputs, n_img,
                                  derive_seed(cfg.seed, 0x1ae5ull), est);
  const auto grads = nabla_image(f_img, d);
  for (const auto& cell : im.cells) {
    SensCell sc;
    sc.center = cell.center;
    sc.mass = cell.mass;
    sc.gradient.resize(d);
    for (int i = 0; i < d; ++i)
      sc.gradient[i] = grads[static_cast<std::size_t>(i)].eval(cell.center);
    sc.gamma_f = im.gammaF(cell.center, f_img);
    rep.cells.push_back(std::move(sc));
  }
  rep.image_built = true;
  return rep;
}

std::string sensitivity_json(const SensitivityReport& rep) {
  ordered_json o;
  o["quantity"] = rep.quantity;
  o["total"] = rep.total;
  o["total_stderr"] = rep.total_std_error;
  o["provenance"] = rep.provenance;
  ordered_json ins = ordered_json::array();
  for (const auto& i : rep.inputs) {
    ordered_json e;
    e["expr"] = i.expr;
    e["contribution"] = i.contribution;
    e["stderr"] = i.std_error;
    ins.push_back(e);
  }
  o["inputs"] = ins;
  o["image_built"] = rep.image_built;
  if (!rep.image_note.empty()) o["image_note"] = rep.image_note;
  if (rep.image_built) {
    ordered_json cells = ordered_json::array();
    for (const auto& c : rep.cells) {
      ordered_json e;
      e["center"] = std::vector<double>(c.center.begin(), c.center.end());
      e["mass"] = c.mass;
      e["gradient"] =
          std::vector<double>(c.gradient.begin(), c.gradient.end());
      e["gamma_f"] = c.gamma_f;
      cells.push_back(e);
    }
    o["cells"] = cells;
  }
  return o.dump(2) + "\n";
}

}  // namespace errcalc
