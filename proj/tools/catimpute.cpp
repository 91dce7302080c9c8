#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "catimpute/report.hpp"
#include "catimpute/simulator.hpp"

namespace fs = std::filesystem;
using namespace catimpute;

namespace {

enum ExitCode { kOk = 0, kValidation = 2, kEngine = 3 };

struct ImputeArgs {
  std::string data;
  std::string codebook;
  std::string engine = "dpm";
  int imputations = 10;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  int cycles = 10;
  std::string ordering = "appearance";
  DpmConfig dpm;
  CartOptions cart;
  GlmOptions glm;
  std::string trace;
};

struct SimulateArgs {
  std::string config;
  std::string out;
  int jobs = 1;
};

struct ReportArgs {
  std::string report;
  std::string format = "text";
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("failed writing " + path.string());
}

std::string output_name(int l, int total) {
  const int width = std::max(2, static_cast<int>(std::to_string(total).size()));
  std::ostringstream s;
  s << "imputed_" << std::setw(width) << std::setfill('0') << l << ".csv";
  return s.str();
}

void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

int cmd_impute(const ImputeArgs& a) {
  auto cb = std::make_shared<const Codebook>(Codebook::load(a.codebook));
  const auto data = load_csv(a.data, cb);
  if (a.imputations < 2) throw ValidationError("--L must be at least 2");

  nlohmann::json config;
  config["imputations"] = a.imputations;
  nlohmann::json manifest = {{"engine", a.engine},
                             {"seed", a.seed},
                             {"data", a.data},
                             {"codebook", a.codebook},
                             {"rows", data.rows()},
                             {"variables", data.cols()},
                             {"missing_cells", data.missing_count()}};
  std::vector<std::string> warnings;
  if (data.complete()) warnings.push_back("no missing cells");

  std::vector<CategoricalDataset> completed;
  const fs::path out_dir(a.out_dir);
  fs::create_directories(out_dir);

  try {
    if (a.engine == "dpm") {
      DpmConfig cfg = a.dpm;
      cfg.imputations = a.imputations;
      cfg.validate();
      config["classes"] = cfg.classes;
      config["iterations"] = cfg.iterations;
      config["burn_in"] = cfg.burn_in;
      config["alpha_shape"] = cfg.alpha_prior.shape;
      config["alpha_rate"] = cfg.alpha_prior.rate;
      Rng rng = make_rng(a.seed);
      auto result = dpm_multiple_impute(data, cfg, rng);
      manifest["dpm"] = {{"max_occupied", result.max_occupied},
                         {"saturated", result.saturated},
                         {"capture_iterations", result.capture_iterations}};
      if (result.saturated)
        warnings.push_back("occupied classes reached K = " + std::to_string(cfg.classes) +
                           "; increase --k");
      if (!a.trace.empty()) {
        std::ofstream trace(a.trace);
        if (!trace) throw ValidationError("cannot write " + a.trace);
        write_dpm_trace(result, trace);
      }
      completed = std::move(result.completed);
    } else if (a.engine == "glm" || a.engine == "cart") {
      ChainedConfig cfg;
      cfg.cycles = a.cycles;
      cfg.imputations = a.imputations;
      if (a.ordering == "appearance") cfg.ordering = VariableOrdering::appearance;
      else if (a.ordering == "fewest_missing_first") cfg.ordering = VariableOrdering::fewest_missing_first;
      else throw ValidationError("unknown --ordering '" + a.ordering + "'");
      config["cycles"] = a.cycles;
      config["ordering"] = a.ordering;
      if (a.engine == "glm") {
        cfg.engine = std::make_shared<GlmEngine>(a.glm);
        config["ridge"] = a.glm.ridge;
        config["max_levels"] = a.glm.max_levels;
      } else {
        cfg.engine = std::make_shared<CartEngine>(a.cart);
        config["min_leaf"] = a.cart.min_leaf;
        config["cp"] = a.cart.cp;
      }
      cfg.validate();
      completed = multiple_impute(data, cfg, a.seed);
    } else {
      throw ValidationError("unknown engine '" + a.engine + "'");
    }
  } catch (const EngineError& e) {
    manifest["config"] = config;
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    if (const auto* u = dynamic_cast<const EngineUnsupported*>(&e)) manifest["failed_variable"] = u->variable();
    manifest["warnings"] = warnings;
    manifest["outputs"] = nlohmann::json::array();
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
    throw;
  }

  nlohmann::json outputs = nlohmann::json::array();
  for (std::size_t l = 0; l < completed.size(); ++l) {
    const auto name = output_name(static_cast<int>(l + 1), static_cast<int>(completed.size()));
    write_csv(completed[l], out_dir / name);
    outputs.push_back(name);
  }
  for (const auto& w : warnings) warn(w);
  manifest["config"] = config;
  manifest["status"] = "ok";
  manifest["warnings"] = warnings;
  manifest["outputs"] = outputs;
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return kOk;
}

int cmd_simulate(const SimulateArgs& a) {
  if (a.jobs < 1) throw ValidationError("--jobs must be at least 1");
  const auto cfg = SimulationConfig::load(a.config);
  const auto start = std::chrono::steady_clock::now();
  const auto report = run_simulation(cfg, a.jobs);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text(a.out, report_json_string(report));

  // Timing varies run to run, so it lives beside the report rather than in it.
  nlohmann::json timing = {{"jobs", a.jobs},
                           {"wall_seconds", elapsed},
                           {"replication_seconds", report.replication_seconds}};
  write_text(a.out + ".timing.json", timing.dump(2) + "\n");

  for (const auto& [name, st] : report.engine_stats) {
    if (st.failures > 0)
      warn(name + " failed in " + std::to_string(st.failures) + " replications: " + st.first_failure);
    for (const auto& [w, n] : st.warnings) warn(name + ": " + w + " (" + std::to_string(n) + " replications)");
    if (st.degenerate_b > 0)
      warn(name + ": " + std::to_string(st.degenerate_b) + " pooled estimates had zero between-imputation variance");
    if (st.boundary_intervals > 0)
      warn(name + ": " + std::to_string(st.boundary_intervals) + " intervals extend outside [0, 1]");
  }
  std::cerr << "simulated " << cfg.replications << " replications in " << elapsed << " s\n";
  return kOk;
}

int cmd_report(const ReportArgs& a) {
  std::ifstream in(a.report);
  if (!in) throw ValidationError("cannot open report " + a.report);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("report " + a.report + " is not valid JSON: " + e.what());
  }
  const auto report = report_from_json(doc);
  if (a.format == "csv") write_report_csv(report, std::cout);
  else write_report_text(report, std::cout);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple imputation of categorical survey data"};
  app.require_subcommand(1);

  ImputeArgs ia;
  auto* impute = app.add_subcommand("impute", "Impute a CSV file L times");
  impute->add_option("--data", ia.data, "Incomplete CSV file")->required()->check(CLI::ExistingFile);
  impute->add_option("--codebook", ia.codebook, "Codebook JSON")->required()->check(CLI::ExistingFile);
  impute->add_option("--engine", ia.engine, "Imputation engine")
      ->check(CLI::IsMember({"glm", "cart", "dpm"}))
      ->capture_default_str();
  impute->add_option("--L", ia.imputations, "Number of completed datasets")->capture_default_str();
  impute->add_option("--seed", ia.seed, "Master seed")->capture_default_str();
  impute->add_option("--out-dir", ia.out_dir, "Output directory")->capture_default_str();
  impute->add_option("--cycles", ia.cycles, "Chained-equation cycles")->capture_default_str();
  impute->add_option("--ordering", ia.ordering, "appearance or fewest_missing_first")
      ->capture_default_str();
  impute->add_option("--k", ia.dpm.classes, "DPM truncation level K")->capture_default_str();
  impute->add_option("--iterations", ia.dpm.iterations, "DPM sweeps")->capture_default_str();
  impute->add_option("--burn-in", ia.dpm.burn_in, "DPM burn-in sweeps")->capture_default_str();
  impute->add_option("--trace", ia.trace, "Write the DPM occupancy trace CSV here");
  impute->add_option("--min-leaf", ia.cart.min_leaf, "CART minimum leaf size")->capture_default_str();
  impute->add_option("--cp", ia.cart.cp, "CART complexity parameter")->capture_default_str();
  impute->add_option("--ridge", ia.glm.ridge, "GLM ridge penalty")->capture_default_str();
  impute->add_option("--max-levels", ia.glm.max_levels, "GLM maximum target levels")
      ->capture_default_str();

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Run a repeated-sampling study");
  simulate->add_option("--config", sa.config, "Simulation config JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sa.out, "Report JSON path")->required();
  simulate->add_option("--jobs", sa.jobs, "Worker threads")->capture_default_str();

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Print quantile tables from a report");
  report->add_option("--report", ra.report, "Report JSON")->required()->check(CLI::ExistingFile);
  report->add_option("--format", ra.format, "text or csv")
      ->check(CLI::IsMember({"text", "csv"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*impute) return cmd_impute(ia);
    if (*simulate) return cmd_simulate(sa);
    return cmd_report(ra);
  } catch (const EngineError& e) {
    std::cerr << "engine failure: " << e.what() << '\n';
    return kEngine;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kEngine;
  }
}
