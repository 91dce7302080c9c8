#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "catimpute/amputation.hpp"
#include "catimpute/cart.hpp"
#include "catimpute/chained.hpp"
#include "catimpute/data.hpp"
#include "catimpute/dpm.hpp"
#include "catimpute/glm.hpp"
#include "catimpute/pooling.hpp"

namespace catimpute {

// ---------------------------------------------------------------------------
// Synthetic populations

// Latent-class generator: weights[k], lambda[k][j][y].
struct MixtureGenerator {
  std::vector<double> weights;
  std::vector<std::vector<std::vector<double>>> lambda;
};

// Explicit joint table in mixed radix, first variable varying slowest.
struct JointTableGenerator {
  std::vector<double> probabilities;
};

struct SyntheticSpec {
  std::size_t rows = 0;
  std::vector<Variable> variables;
  std::variant<MixtureGenerator, JointTableGenerator> generator;

  void validate() const;
  std::shared_ptr<const Codebook> codebook() const;

  // {"rows": N, "levels": [D_1, ...] or "variables": [{name, levels}],
  //  "mixture": {"weights": [...], "lambda": [[[...]]]} | "joint": [...]}
  static SyntheticSpec from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

// N i.i.d. rows from the declared joint, fully observed.
CategoricalDataset generate_population(const SyntheticSpec& spec, Rng& rng);

// ---------------------------------------------------------------------------
// Imputers: anything that turns one incomplete sample into L completed ones.

struct ImputationRequest {
  const CategoricalDataset& incomplete;
  // The sample before amputation. Real engines ignore it; it lets tests plug
  // in oracle engines.
  const CategoricalDataset& complete_sample;
  std::uint64_t seed;
  int imputations;
};

struct ImputationOutput {
  std::vector<CategoricalDataset> completed;
  std::vector<std::string> warnings;
};

class Imputer {
 public:
  virtual ~Imputer() = default;
  virtual std::string name() const = 0;
  virtual ImputationOutput impute(const ImputationRequest& request) const = 0;
};

struct ChainedSettings {
  int cycles = 10;
  VariableOrdering ordering = VariableOrdering::appearance;
};

std::shared_ptr<const Imputer> make_chained_imputer(std::string name,
                                                    std::shared_ptr<const ConditionalEngine> engine,
                                                    ChainedSettings settings = {});
std::shared_ptr<const Imputer> make_dpm_imputer(DpmConfig config);

// ---------------------------------------------------------------------------
// Repeated-sampling study

struct PopulationSource {
  std::optional<std::filesystem::path> csv;
  std::optional<std::filesystem::path> codebook;
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::uint64_t> seed;  // synthetic generation seed
};

struct SimulationConfig {
  PopulationSource population;
  std::size_t n_sample = 1000;
  int replications = 200;
  nlohmann::json missingness = {{"mechanism", "mcar"}, {"rate", 0.3}};
  std::vector<std::string> engines = {"glm", "cart", "dpm"};
  int imputations = 10;
  int max_order = 3;
  std::uint64_t master_seed = 1;
  double confidence_level = 0.95;
  ChainedSettings chained;
  GlmOptions glm;
  CartOptions cart;
  DpmConfig dpm;

  // Relative population paths resolve against base_dir.
  static SimulationConfig from_json(const nlohmann::json& doc,
                                    const std::filesystem::path& base_dir = {});
  static SimulationConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // Checks that do not need the population.
  void validate() const;
};

CategoricalDataset load_population(const SimulationConfig& cfg);

// Builds the imputers named in cfg.engines ("glm", "cart", "dpm").
std::vector<std::shared_ptr<const Imputer>> make_imputers(const SimulationConfig& cfg);

struct EngineMetrics {
  double coverage = 0.0;
  double rel_mse = 0.0;  // NaN when the baseline error sum is zero
  std::size_t replications = 0;
};

struct EstimandRecord {
  Estimand estimand;
  EngineMetrics baseline;                  // pre-missing sample estimates
  std::map<std::string, EngineMetrics> engines;
};

struct EngineRunStats {
  std::size_t failures = 0;
  std::string first_failure;
  std::size_t degenerate_b = 0;            // pooled estimates with b == 0
  std::size_t boundary_intervals = 0;      // intervals reaching outside [0, 1]
  std::map<std::string, std::size_t> warnings;
};

struct SimulationReport {
  std::shared_ptr<const Codebook> codebook;
  std::vector<std::string> engines;
  int replications = 0;
  std::size_t n_sample = 0;
  std::size_t population_rows = 0;
  nlohmann::json config;
  std::vector<EstimandRecord> estimands;
  std::map<std::string, EngineRunStats> engine_stats;
  std::vector<double> replication_seconds;  // wall time per replication; not serialized
};

// Runs cfg.replications replications on `jobs` worker threads. The report is
// identical for any jobs value.
SimulationReport run_simulation(const SimulationConfig& cfg, int jobs = 1);
SimulationReport run_simulation(const SimulationConfig& cfg, const CategoricalDataset& population,
                                std::span<const std::shared_ptr<const Imputer>> imputers,
                                int jobs = 1);

// Row indices of a simple random sample without replacement, ascending.
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t n, Rng& rng);

}  // namespace catimpute
