#include "catimpute/simulator.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

namespace catimpute {

namespace {

constexpr double kProbabilityTolerance = 1e-9;

void check_distribution(std::span<const double> p, const std::string& what) {
  double total = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw ValidationError(what + " has a negative or NaN probability");
    total += x;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance)
    throw ValidationError(what + " does not sum to 1");
}

std::vector<Variable> default_variables(const std::vector<int>& levels) {
  std::vector<Variable> vars;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    Variable v;
    v.name = "V" + std::to_string(j + 1);
    for (int y = 1; y <= levels[j]; ++y) v.levels.push_back(std::to_string(y));
    vars.push_back(std::move(v));
  }
  return vars;
}

// Stable per-name stream id so adding an engine never shifts another's seeds.
std::uint64_t name_stream(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

enum Stream : std::uint64_t { kPopulation = 1, kSample = 2, kAmpute = 3 };

class ChainedImputer final : public Imputer {
 public:
  ChainedImputer(std::string name, std::shared_ptr<const ConditionalEngine> engine,
                 ChainedSettings settings)
      : name_(std::move(name)), engine_(std::move(engine)), settings_(settings) {}

  std::string name() const override { return name_; }

  ImputationOutput impute(const ImputationRequest& request) const override {
    ChainedConfig cfg;
    cfg.cycles = settings_.cycles;
    cfg.ordering = settings_.ordering;
    cfg.engine = engine_;
    cfg.imputations = request.imputations;
    ImputationOutput out;
    if (request.incomplete.complete()) out.warnings.push_back("no missing cells");
    out.completed = multiple_impute(request.incomplete, cfg, request.seed);
    return out;
  }

 private:
  std::string name_;
  std::shared_ptr<const ConditionalEngine> engine_;
  ChainedSettings settings_;
};

class DpmImputer final : public Imputer {
 public:
  explicit DpmImputer(DpmConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  std::string name() const override { return "dpm"; }

  ImputationOutput impute(const ImputationRequest& request) const override {
    DpmConfig cfg = cfg_;
    cfg.imputations = request.imputations;
    Rng rng = make_rng(request.seed);
    auto result = dpm_multiple_impute(request.incomplete, cfg, rng);
    ImputationOutput out;
    out.completed = std::move(result.completed);
    if (request.incomplete.complete()) out.warnings.push_back("no missing cells");
    if (result.saturated)
      out.warnings.push_back("occupied classes reached K; increase the number of classes");
    return out;
  }

 private:
  DpmConfig cfg_;
};

struct EngineOutcome {
  bool ok = false;
  std::string error;
  std::vector<double> q_bar;
  std::vector<std::uint8_t> covered;
  std::size_t degenerate_b = 0;
  std::size_t boundary = 0;
  std::vector<std::string> warnings;
};

struct ReplicationOutcome {
  std::vector<double> baseline_q;
  std::vector<std::uint8_t> baseline_covered;
  std::vector<EngineOutcome> engines;
  double seconds = 0.0;
};

ReplicationOutcome run_replication(const SimulationConfig& cfg, const CategoricalDataset& population,
                                   std::span<const Estimand> estimands,
                                   const MissingnessSpec& missingness,
                                   std::span<const std::shared_ptr<const Imputer>> imputers,
                                   std::uint64_t h) {
  const auto start = std::chrono::steady_clock::now();
  const PoolOptions pool_options{cfg.confidence_level, false};
  ReplicationOutcome out;

  Rng sample_rng = make_rng(derive_seed(cfg.master_seed, kSample, h));
  const auto rows = sample_without_replacement(population.rows(), cfg.n_sample, sample_rng);
  const CategoricalDataset sample = population.select_rows(rows);

  const auto baseline = estimate_all(sample, estimands);
  out.baseline_q.reserve(estimands.size());
  out.baseline_covered.reserve(estimands.size());
  for (std::size_t e = 0; e < estimands.size(); ++e) {
    out.baseline_q.push_back(baseline[e].q);
    const auto interval = single_estimate_interval(baseline[e], pool_options);
    out.baseline_covered.push_back(covers(interval, estimands[e].population_value) ? 1 : 0);
  }

  Rng ampute_rng = make_rng(derive_seed(cfg.master_seed, kAmpute, h));
  const CategoricalDataset incomplete = ampute(sample, missingness, ampute_rng);

  for (const auto& imputer : imputers) {
    EngineOutcome eo;
    try {
      const ImputationRequest request{incomplete, sample,
                                      derive_seed(cfg.master_seed, name_stream(imputer->name()), h),
                                      cfg.imputations};
      auto result = imputer->impute(request);
      if (result.completed.size() < 2)
        throw EngineError(imputer->name() + " produced fewer than two completed datasets");
      std::vector<std::vector<PointEstimate>> per_dataset;
      per_dataset.reserve(result.completed.size());
      for (const auto& d : result.completed) per_dataset.push_back(estimate_all(d, estimands));
      std::vector<PointEstimate> column(per_dataset.size());
      eo.q_bar.reserve(estimands.size());
      eo.covered.reserve(estimands.size());
      for (std::size_t e = 0; e < estimands.size(); ++e) {
        for (std::size_t l = 0; l < per_dataset.size(); ++l) column[l] = per_dataset[l][e];
        const auto pe = pool(column, pool_options);
        eo.q_bar.push_back(pe.q_bar);
        eo.covered.push_back(covers(pe, estimands[e].population_value) ? 1 : 0);
        eo.degenerate_b += pe.degenerate_b ? 1 : 0;
        eo.boundary += pe.boundary ? 1 : 0;
      }
      eo.warnings = std::move(result.warnings);
      eo.ok = true;
    } catch (const Error& err) {
      eo = EngineOutcome{};
      eo.error = err.what();
    }
    out.engines.push_back(std::move(eo));
  }
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void SyntheticSpec::validate() const {
  if (rows == 0) throw ValidationError("synthetic population needs at least one row");
  Codebook check(variables);  // validates names and levels
  (void)check;
  if (const auto* mix = std::get_if<MixtureGenerator>(&generator)) {
    if (mix->weights.empty()) throw ValidationError("mixture generator has no classes");
    check_distribution(mix->weights, "mixture weights");
    if (mix->lambda.size() != mix->weights.size())
      throw ValidationError("mixture lambda needs one entry per class");
    for (std::size_t k = 0; k < mix->lambda.size(); ++k) {
      if (mix->lambda[k].size() != variables.size())
        throw ValidationError("mixture class " + std::to_string(k + 1) +
                              " needs one distribution per variable");
      for (std::size_t j = 0; j < variables.size(); ++j) {
        if (mix->lambda[k][j].size() != variables[j].levels.size())
          throw ValidationError("mixture class " + std::to_string(k + 1) + ", variable '" +
                                variables[j].name + "' has the wrong number of levels");
        check_distribution(mix->lambda[k][j], "mixture class " + std::to_string(k + 1) +
                                                  ", variable '" + variables[j].name + "'");
      }
    }
  } else {
    const auto& joint = std::get<JointTableGenerator>(generator);
    std::size_t cells = 1;
    for (const auto& v : variables) cells *= v.levels.size();
    if (joint.probabilities.size() != cells)
      throw ValidationError("joint table has " + std::to_string(joint.probabilities.size()) +
                            " cells, expected " + std::to_string(cells));
    check_distribution(joint.probabilities, "joint table");
  }
}

std::shared_ptr<const Codebook> SyntheticSpec::codebook() const {
  return std::make_shared<const Codebook>(variables);
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& doc) {
  SyntheticSpec spec;
  try {
    spec.rows = doc.at("rows").get<std::size_t>();
    if (doc.contains("variables")) {
      for (const auto& v : doc.at("variables"))
        spec.variables.push_back({v.at("name").get<std::string>(),
                                  v.at("levels").get<std::vector<std::string>>()});
    } else {
      spec.variables = default_variables(doc.at("levels").get<std::vector<int>>());
    }
    if (doc.contains("mixture")) {
      MixtureGenerator mix;
      mix.weights = doc.at("mixture").at("weights").get<std::vector<double>>();
      mix.lambda = doc.at("mixture").at("lambda").get<std::vector<std::vector<std::vector<double>>>>();
      spec.generator = std::move(mix);
    } else {
      spec.generator = JointTableGenerator{doc.at("joint").get<std::vector<double>>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed synthetic population spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

nlohmann::json SyntheticSpec::to_json() const {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : variables) vars.push_back({{"name", v.name}, {"levels", v.levels}});
  nlohmann::json doc = {{"rows", rows}, {"variables", std::move(vars)}};
  if (const auto* mix = std::get_if<MixtureGenerator>(&generator))
    doc["mixture"] = {{"weights", mix->weights}, {"lambda", mix->lambda}};
  else
    doc["joint"] = std::get<JointTableGenerator>(generator).probabilities;
  return doc;
}

CategoricalDataset generate_population(const SyntheticSpec& spec, Rng& rng) {
  spec.validate();
  CategoricalDataset out(spec.codebook(), spec.rows);
  const std::size_t p = spec.variables.size();
  if (const auto* mix = std::get_if<MixtureGenerator>(&spec.generator)) {
    for (std::size_t i = 0; i < spec.rows; ++i) {
      const auto k = draw_categorical(mix->weights, rng);
      for (std::size_t j = 0; j < p; ++j)
        out.set(i, j, static_cast<Code>(draw_categorical(mix->lambda[k][j], rng)));
    }
    return out;
  }
  const auto& probs = std::get<JointTableGenerator>(spec.generator).probabilities;
  std::vector<double> cumulative(probs.size());
  std::partial_sum(probs.begin(), probs.end(), cumulative.begin());
  for (std::size_t i = 0; i < spec.rows; ++i) {
    std::size_t key = draw_from_cumulative(cumulative, rng);
    for (std::size_t j = p; j-- > 0;) {
      const auto d = spec.variables[j].levels.size();
      out.set(i, j, static_cast<Code>(key % d));
      key /= d;
    }
  }
  return out;
}

std::shared_ptr<const Imputer> make_chained_imputer(std::string name,
                                                    std::shared_ptr<const ConditionalEngine> engine,
                                                    ChainedSettings settings) {
  return std::make_shared<ChainedImputer>(std::move(name), std::move(engine), settings);
}

std::shared_ptr<const Imputer> make_dpm_imputer(DpmConfig config) {
  return std::make_shared<DpmImputer>(config);
}

// ---------------------------------------------------------------------------

namespace {

VariableOrdering parse_ordering(const std::string& s) {
  if (s == "appearance") return VariableOrdering::appearance;
  if (s == "fewest_missing_first") return VariableOrdering::fewest_missing_first;
  throw ValidationError("unknown variable ordering '" + s + "'");
}

std::string ordering_name(VariableOrdering o) {
  return o == VariableOrdering::appearance ? "appearance" : "fewest_missing_first";
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

SimulationConfig SimulationConfig::from_json(const nlohmann::json& doc,
                                             const std::filesystem::path& base_dir) {
  SimulationConfig cfg;
  try {
    const auto& pop = doc.at("population");
    if (pop.contains("synthetic")) {
      cfg.population.synthetic = SyntheticSpec::from_json(pop.at("synthetic"));
      if (pop.contains("seed")) cfg.population.seed = pop.at("seed").get<std::uint64_t>();
    } else {
      cfg.population.csv = resolve(base_dir, pop.at("csv").get<std::string>());
      cfg.population.codebook = resolve(base_dir, pop.at("codebook").get<std::string>());
    }
    cfg.n_sample = doc.at("n_sample").get<std::size_t>();
    cfg.replications = doc.at("replications").get<int>();
    if (doc.contains("missingness")) cfg.missingness = doc.at("missingness");
    cfg.engines = doc.at("engines").get<std::vector<std::string>>();
    cfg.imputations = doc.value("imputations", cfg.imputations);
    cfg.max_order = doc.value("max_order", cfg.max_order);
    cfg.master_seed = doc.value("master_seed", cfg.master_seed);
    cfg.confidence_level = doc.value("confidence_level", cfg.confidence_level);
    if (doc.contains("chained")) {
      const auto& c = doc.at("chained");
      cfg.chained.cycles = c.value("cycles", cfg.chained.cycles);
      cfg.chained.ordering = parse_ordering(c.value("ordering", std::string("appearance")));
    }
    if (doc.contains("glm")) {
      const auto& g = doc.at("glm");
      cfg.glm.ridge = g.value("ridge", cfg.glm.ridge);
      cfg.glm.max_levels = g.value("max_levels", cfg.glm.max_levels);
      cfg.glm.max_iterations = g.value("max_iterations", cfg.glm.max_iterations);
    }
    if (doc.contains("cart")) {
      const auto& c = doc.at("cart");
      cfg.cart.min_leaf = c.value("min_leaf", cfg.cart.min_leaf);
      cfg.cart.cp = c.value("cp", cfg.cart.cp);
      cfg.cart.exhaustive_cap = c.value("exhaustive_cap", cfg.cart.exhaustive_cap);
    }
    if (doc.contains("dpm")) {
      const auto& d = doc.at("dpm");
      cfg.dpm.classes = d.value("classes", cfg.dpm.classes);
      cfg.dpm.iterations = d.value("iterations", cfg.dpm.iterations);
      cfg.dpm.burn_in = d.value("burn_in", cfg.dpm.burn_in);
      cfg.dpm.alpha_prior.shape = d.value("alpha_shape", cfg.dpm.alpha_prior.shape);
      cfg.dpm.alpha_prior.rate = d.value("alpha_rate", cfg.dpm.alpha_prior.rate);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed simulation config: ") + e.what());
  }
  cfg.dpm.imputations = cfg.imputations;
  cfg.validate();
  return cfg;
}

SimulationConfig SimulationConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open simulation config " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("simulation config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(doc, path.parent_path());
}

nlohmann::json SimulationConfig::to_json() const {
  nlohmann::json pop;
  if (population.synthetic) {
    pop["synthetic"] = population.synthetic->to_json();
    if (population.seed) pop["seed"] = *population.seed;
  } else {
    pop["csv"] = population.csv ? population.csv->string() : "";
    pop["codebook"] = population.codebook ? population.codebook->string() : "";
  }
  return {
      {"population", std::move(pop)},
      {"n_sample", n_sample},
      {"replications", replications},
      {"missingness", missingness},
      {"engines", engines},
      {"imputations", imputations},
      {"max_order", max_order},
      {"master_seed", master_seed},
      {"confidence_level", confidence_level},
      {"chained", {{"cycles", chained.cycles}, {"ordering", ordering_name(chained.ordering)}}},
      {"glm",
       {{"ridge", glm.ridge}, {"max_levels", glm.max_levels}, {"max_iterations", glm.max_iterations}}},
      {"cart", {{"min_leaf", cart.min_leaf}, {"cp", cart.cp}, {"exhaustive_cap", cart.exhaustive_cap}}},
      {"dpm",
       {{"classes", dpm.classes},
        {"iterations", dpm.iterations},
        {"burn_in", dpm.burn_in},
        {"alpha_shape", dpm.alpha_prior.shape},
        {"alpha_rate", dpm.alpha_prior.rate}}},
  };
}

void SimulationConfig::validate() const {
  if (!population.synthetic && !(population.csv && population.codebook))
    throw ValidationError("population needs either a synthetic spec or csv + codebook");
  if (replications < 2) throw ValidationError("replications must be at least 2");
  if (n_sample < 1) throw ValidationError("n_sample must be positive");
  if (imputations < 2) throw ValidationError("imputations (L) must be at least 2");
  if (max_order < 1 || max_order > 3) throw ValidationError("max_order must be 1, 2 or 3");
  if (!(confidence_level > 0.0 && confidence_level < 1.0))
    throw ValidationError("confidence_level must be in (0, 1)");
  if (engines.empty()) throw ValidationError("simulation config lists no engines");
  for (std::size_t a = 0; a < engines.size(); ++a) {
    const auto& e = engines[a];
    if (e != "glm" && e != "cart" && e != "dpm") throw ValidationError("unknown engine '" + e + "'");
    for (std::size_t b = 0; b < a; ++b)
      if (engines[b] == e) throw ValidationError("engine '" + e + "' listed twice");
  }
  if (chained.cycles < 1) throw ValidationError("chained cycles must be at least 1");
  if (cart.min_leaf < 1) throw ValidationError("cart min_leaf must be at least 1");
  DpmConfig d = dpm;
  d.imputations = imputations;
  d.validate();
}

CategoricalDataset load_population(const SimulationConfig& cfg) {
  CategoricalDataset pop = [&] {
    if (cfg.population.synthetic) {
      Rng rng = make_rng(cfg.population.seed.value_or(derive_seed(cfg.master_seed, kPopulation)));
      return generate_population(*cfg.population.synthetic, rng);
    }
    auto cb = std::make_shared<const Codebook>(Codebook::load(*cfg.population.codebook));
    return load_csv(*cfg.population.csv, cb);
  }();
  if (!pop.complete()) throw ValidationError("population must be fully observed");
  return pop;
}

std::vector<std::shared_ptr<const Imputer>> make_imputers(const SimulationConfig& cfg) {
  std::vector<std::shared_ptr<const Imputer>> out;
  for (const auto& e : cfg.engines) {
    if (e == "glm") {
      out.push_back(make_chained_imputer("glm", std::make_shared<GlmEngine>(cfg.glm), cfg.chained));
    } else if (e == "cart") {
      out.push_back(make_chained_imputer("cart", std::make_shared<CartEngine>(cfg.cart), cfg.chained));
    } else if (e == "dpm") {
      DpmConfig d = cfg.dpm;
      d.imputations = cfg.imputations;
      out.push_back(make_dpm_imputer(d));
    } else {
      throw ValidationError("unknown engine '" + e + "'");
    }
  }
  return out;
}

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t n, Rng& rng) {
  if (n > population) throw ValidationError("sample size exceeds population size");
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < n; ++k) {
    const auto pick = k + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(population - k));
    std::swap(idx[k], idx[std::min(pick, population - 1)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

SimulationReport run_simulation(const SimulationConfig& cfg, int jobs) {
  cfg.validate();
  const auto population = load_population(cfg);
  const auto imputers = make_imputers(cfg);
  return run_simulation(cfg, population, imputers, jobs);
}

SimulationReport run_simulation(const SimulationConfig& cfg, const CategoricalDataset& population,
                                std::span<const std::shared_ptr<const Imputer>> imputers,
                                int jobs) {
  if (cfg.replications < 2) throw ValidationError("replications must be at least 2");
  if (imputers.empty()) throw ValidationError("no imputation engines configured");
  if (cfg.n_sample > population.rows())
    throw ValidationError("n_sample exceeds the population size");
  const auto missingness = MissingnessSpec::from_json(cfg.missingness, population.codebook());
  const auto estimands = enumerate_estimands(population, cfg.n_sample, cfg.max_order);
  if (estimands.empty())
    throw ValidationError("no estimand passes the n*p > 10 and n*(1-p) > 10 filter");

  const auto reps = static_cast<std::size_t>(cfg.replications);
  std::vector<ReplicationOutcome> outcomes(reps);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const auto h = next.fetch_add(1);
      if (h >= reps) return;
      try {
        outcomes[h] = run_replication(cfg, population, estimands, missingness, imputers, h);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = reps;
        return;
      }
    }
  };
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, reps); ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  SimulationReport report;
  report.codebook = population.codebook_ptr();
  report.replications = cfg.replications;
  report.n_sample = cfg.n_sample;
  report.population_rows = population.rows();
  report.config = cfg.to_json();
  for (const auto& imp : imputers) {
    report.engines.push_back(imp->name());
    report.engine_stats[imp->name()];
  }

  for (const auto& o : outcomes) {
    report.replication_seconds.push_back(o.seconds);
    for (std::size_t m = 0; m < imputers.size(); ++m) {
      auto& stats = report.engine_stats[imputers[m]->name()];
      const auto& eo = o.engines[m];
      if (!eo.ok) {
        if (stats.failures == 0) stats.first_failure = eo.error;
        ++stats.failures;
        continue;
      }
      stats.degenerate_b += eo.degenerate_b;
      stats.boundary_intervals += eo.boundary;
      for (const auto& w : eo.warnings) ++stats.warnings[w];
    }
  }

  report.estimands.reserve(estimands.size());
  for (std::size_t e = 0; e < estimands.size(); ++e) {
    const double truth = estimands[e].population_value;
    EstimandRecord rec;
    rec.estimand = estimands[e];

    double base_err = 0.0;
    std::size_t base_cover = 0;
    for (const auto& o : outcomes) {
      base_err += (o.baseline_q[e] - truth) * (o.baseline_q[e] - truth);
      base_cover += o.baseline_covered[e];
    }
    rec.baseline.replications = reps;
    rec.baseline.coverage = static_cast<double>(base_cover) / static_cast<double>(reps);
    rec.baseline.rel_mse = base_err > 0.0 ? base_err / base_err : std::nan("");

    for (std::size_t m = 0; m < imputers.size(); ++m) {
      double num = 0.0;
      double den = 0.0;
      std::size_t cover = 0;
      std::size_t used = 0;
      for (const auto& o : outcomes) {
        const auto& eo = o.engines[m];
        if (!eo.ok) continue;
        ++used;
        num += (eo.q_bar[e] - truth) * (eo.q_bar[e] - truth);
        den += (o.baseline_q[e] - truth) * (o.baseline_q[e] - truth);
        cover += eo.covered[e];
      }
      EngineMetrics metrics;
      metrics.replications = used;
      metrics.coverage = used ? static_cast<double>(cover) / static_cast<double>(used) : std::nan("");
      metrics.rel_mse = den > 0.0 ? num / den : std::nan("");
      rec.engines[imputers[m]->name()] = metrics;
    }
    report.estimands.push_back(std::move(rec));
  }
  return report;
}

}  // namespace catimpute
