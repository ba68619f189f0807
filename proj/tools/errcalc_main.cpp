#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <errcalc/errors.hpp>
#include <errcalc/expr.hpp>
#include <errcalc/harness.hpp>

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw errcalc::ValidationError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_out(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw errcalc::ValidationError("cannot write report: " + path);
  f << text;
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

std::vector<double> parse_point(const std::string& text) {
  std::vector<double> v;
  for (const auto& tok : split_commas(text)) {
    try {
      std::size_t used = 0;
      const double x = std::stod(tok, &used);
      while (used < tok.size() && std::isspace(tok[used])) ++used;
      if (used != tok.size())
        throw errcalc::ValidationError("bad coordinate: " + tok);
      v.push_back(x);
    } catch (const std::logic_error&) {
      throw errcalc::ValidationError("bad coordinate: " + tok);
    }
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"error propagation checks over truncated Gaussian noise"};
  app.require_subcommand(1);

  std::string config_path, suite = "all", out_path, format = "json";
  std::uint64_t seed_override = 0;
  int workers = 1;
  auto* check = app.add_subcommand("check", "run a verification suite");
  check->add_option("--config", config_path, "config JSON document")
      ->required();
  check->add_option("--suite", suite, "suite name, default all");
  auto* seed_opt =
      check->add_option("--seed", seed_override, "override the config seed");
  check->add_option("--out", out_path, "report path, default stdout");
  check->add_option("--workers", workers, "worker threads");
  check->add_option("--format", format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));

  std::string sens_config, quantity, inputs_text, sens_out;
  auto* sens = app.add_subcommand("sens", "error budget of a quantity");
  sens->add_option("--config", sens_config, "config JSON document")
      ->required();
  sens->add_option("--quantity", quantity, "quantity expression")->required();
  sens->add_option("--inputs", inputs_text,
                   "comma-separated input expressions, default coordinates");
  sens->add_option("--out", sens_out, "report path, default stdout");

  std::string expr_text, at_text;
  auto* parse = app.add_subcommand("parse", "print AST and gradient");
  parse->add_option("--expr", expr_text, "expression")->required();
  parse->add_option("--at", at_text, "comma-separated point, default zeros");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (check->parsed()) {
      errcalc::RunConfig cfg = errcalc::parse_config(read_file(config_path));
      if (seed_opt->count() > 0) cfg.seed = seed_override;
      const auto reports =
          errcalc::run_suite(cfg, suite, std::max(1, workers));
      write_out(out_path, format == "csv" ? errcalc::report_csv(reports)
                                          : errcalc::report_json(reports));
      long failed = 0;
      for (const auto& r : reports)
        if (!r.pass) ++failed;
      std::cerr << reports.size() << " checks, " << failed << " failed\n";
      return failed == 0 ? 0 : 1;
    }
    if (sens->parsed()) {
      errcalc::RunConfig cfg = errcalc::parse_config(read_file(sens_config));
      const errcalc::Functional q = errcalc::Functional::parse(quantity);
      std::vector<errcalc::Functional> inputs;
      std::vector<std::string> texts;
      if (!inputs_text.empty())
        for (const auto& tok : split_commas(inputs_text)) {
          texts.push_back(tok);
          inputs.push_back(errcalc::Functional::parse(tok));
        }
      const auto rep = errcalc::run_sensitivity(cfg, q, inputs, texts);
      write_out(sens_out, errcalc::sensitivity_json(rep));
      return 0;
    }
    const errcalc::Functional f = errcalc::Functional::parse(expr_text);
    const int dim = std::max(1, f.min_dim());
    errcalc::Vector w = errcalc::Vector::Zero(dim);
    if (!at_text.empty()) {
      const auto pt = parse_point(at_text);
      if (static_cast<int>(pt.size()) < dim)
        throw errcalc::ValidationError(
            "point has fewer coordinates than the expression uses");
      w = Eigen::Map<const errcalc::Vector>(
          pt.data(), static_cast<Eigen::Index>(pt.size()));
    }
    const auto [value, grad] = f.eval_grad(w);
    std::cout.precision(12);
    std::cout << f.ast_string() << "\nvalue " << value << "\ngradient";
    for (Eigen::Index i = 0; i < grad.size(); ++i) std::cout << " " << grad(i);
    std::cout << "\n";
    return 0;
  } catch (const errcalc::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const errcalc::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
