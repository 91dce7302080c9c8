#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <mutex>

#include "../common/support.hpp"

using namespace catimpute;
using namespace testsupport;

namespace {

SimulationConfig small_config() {
  SimulationConfig cfg;
  SyntheticSpec spec;
  spec.rows = 3000;
  spec.variables = {{"A", {"1", "2"}}, {"B", {"1", "2", "3"}}, {"C", {"1", "2"}}};
  spec.generator = MixtureGenerator{
      {0.6, 0.4},
      {{{0.8, 0.2}, {0.6, 0.3, 0.1}, {0.7, 0.3}}, {{0.3, 0.7}, {0.2, 0.3, 0.5}, {0.2, 0.8}}}};
  cfg.population.synthetic = spec;
  cfg.population.seed = 11;
  cfg.n_sample = 300;
  cfg.replications = 6;
  cfg.imputations = 3;
  cfg.chained.cycles = 3;
  cfg.dpm.classes = 8;
  cfg.dpm.iterations = 60;
  cfg.dpm.burn_in = 30;
  return cfg;
}

class Recorder final : public Imputer {
 public:
  explicit Recorder(std::string name) : name_(std::move(name)) {}
  std::string name() const override { return name_; }
  ImputationOutput impute(const ImputationRequest& request) const override {
    {
      std::lock_guard lock(mutex_);
      seen.push_back(request.incomplete);
    }
    ImputationOutput out;
    auto filled = request.incomplete;
    Rng rng(request.seed);
    fill_from_observed_marginals(filled, rng);
    out.completed.assign(static_cast<std::size_t>(request.imputations), filled.completed());
    return out;
  }
  mutable std::vector<CategoricalDataset> seen;

 private:
  std::string name_;
  mutable std::mutex mutex_;
};

class Flaky final : public Imputer {
 public:
  std::string name() const override { return "flaky"; }
  ImputationOutput impute(const ImputationRequest& request) const override {
    if (request.seed % 2 == 1) throw EngineError("flaky engine gave up");
    ImputationOutput out;
    out.completed.assign(static_cast<std::size_t>(request.imputations), request.complete_sample);
    return out;
  }
};

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("explicit joint table population matches its cells") {
  SyntheticSpec spec;
  spec.rows = 100000;
  spec.variables = {{"A", {"a", "b"}}, {"B", {"a", "b"}}};
  spec.generator = JointTableGenerator{{0.4, 0.1, 0.1, 0.4}};
  Rng rng(1);
  const auto pop = generate_population(spec, rng);
  CHECK(pop.complete());
  double counts[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < pop.rows(); ++i) counts[pop.at(i, 0) * 2 + pop.at(i, 1)] += 1;
  const double target[4] = {0.4, 0.1, 0.1, 0.4};
  for (int c = 0; c < 4; ++c) CHECK(std::abs(counts[c] / 100000 - target[c]) < 0.005);
}

TEST_CASE("single-variable uniform spec gives uniform marginals") {
  SyntheticSpec spec;
  spec.rows = 60000;
  spec.variables = {{"A", {"1", "2", "3"}}};
  spec.generator = JointTableGenerator{{1.0 / 3, 1.0 / 3, 1.0 / 3}};
  Rng rng(2);
  const auto pop = generate_population(spec, rng);
  double counts[3] = {0, 0, 0};
  for (std::size_t i = 0; i < pop.rows(); ++i) counts[pop.at(i, 0)] += 1;
  for (double c : counts) CHECK(std::abs(c / 60000 - 1.0 / 3) < 0.01);
}

TEST_CASE("mixture population matches the implied joint") {
  const auto spec = two_class_spec(50000);
  Rng rng(3);
  const auto pop = generate_population(spec, rng);
  const auto joint = mixture_joint(spec);
  std::vector<double> counts(joint.size(), 0.0);
  for (std::size_t i = 0; i < pop.rows(); ++i) {
    std::size_t key = 0;
    for (std::size_t j = 0; j < 4; ++j) key = key * 3 + static_cast<std::size_t>(pop.at(i, j));
    counts[key] += 1.0;
  }
  for (std::size_t k = 0; k < joint.size(); ++k) CHECK(std::abs(counts[k] / 50000 - joint[k]) < 0.006);
}

TEST_CASE("invalid probability tables are rejected") {
  SyntheticSpec spec;
  spec.rows = 10;
  spec.variables = {{"A", {"a", "b"}}};
  spec.generator = JointTableGenerator{{0.5, 0.6}};
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec.generator = JointTableGenerator{{1.0}};
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec.generator = MixtureGenerator{{1.0}, {{{0.5, 0.4}}}};
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec.generator = MixtureGenerator{{0.5, 0.5}, {{{0.5, 0.5}}}};
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec.generator = MixtureGenerator{{1.0}, {{{-0.5, 1.5}}}};
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("synthetic spec json forms") {
  const auto a = SyntheticSpec::from_json(nlohmann::json::parse(
      R"({"rows": 5, "levels": [2, 3], "joint": [0.1, 0.1, 0.1, 0.2, 0.2, 0.3]})"));
  CHECK(a.variables[1].name == "V2");
  CHECK(a.variables[1].levels == std::vector<std::string>{"1", "2", "3"});
  const auto b = SyntheticSpec::from_json(a.to_json());
  CHECK(b.to_json() == a.to_json());
  CHECK_THROWS_AS(SyntheticSpec::from_json(nlohmann::json::parse(R"({"rows": 5, "levels": [2]})")),
                  ValidationError);
}

TEST_CASE("sampling without replacement") {
  Rng rng(4);
  const auto s = sample_without_replacement(1000, 200, rng);
  CHECK(s.size() == 200);
  CHECK(std::is_sorted(s.begin(), s.end()));
  CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  CHECK(s.back() < 1000);
  CHECK(sample_without_replacement(5, 5, rng) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK_THROWS_AS(sample_without_replacement(5, 6, rng), ValidationError);
}

TEST_CASE("truth-copy engine has Rel.MSE exactly 1 and baseline coverage") {
  const auto cfg = small_config();
  const auto pop = load_population(cfg);
  const std::vector<std::shared_ptr<const Imputer>> engines = {truth_copy_imputer()};
  const auto report = run_simulation(cfg, pop, engines);
  REQUIRE_FALSE(report.estimands.empty());
  for (const auto& rec : report.estimands) {
    const auto& m = rec.engines.at("truth");
    CHECK(m.rel_mse == 1.0);
    CHECK(m.coverage == rec.baseline.coverage);
    CHECK(m.replications == 6u);
    CHECK(rec.baseline.rel_mse == 1.0);
  }
  CHECK(report.engine_stats.at("truth").degenerate_b == report.estimands.size() * 6);
}

TEST_CASE("engines see the same sample and mask in each replication") {
  auto cfg = small_config();
  const auto pop = load_population(cfg);
  auto a = std::make_shared<Recorder>("a");
  auto b = std::make_shared<Recorder>("b");
  const std::vector<std::shared_ptr<const Imputer>> engines = {a, b};
  run_simulation(cfg, pop, engines, 1);
  REQUIRE(a->seen.size() == 6);
  REQUIRE(b->seen.size() == 6);
  for (std::size_t h = 0; h < 6; ++h) CHECK(a->seen[h] == b->seen[h]);
  CHECK_FALSE(a->seen[0] == a->seen[1]);
}

TEST_CASE("engine failures are counted and excluded") {
  auto cfg = small_config();
  cfg.replications = 10;
  const auto pop = load_population(cfg);
  const std::vector<std::shared_ptr<const Imputer>> engines = {std::make_shared<Flaky>(), truth_copy_imputer()};
  const auto report = run_simulation(cfg, pop, engines);
  const auto& stats = report.engine_stats.at("flaky");
  CHECK(stats.failures > 0);
  CHECK(stats.failures < 10);
  CHECK(stats.first_failure == "flaky engine gave up");
  for (const auto& rec : report.estimands) {
    CHECK(rec.engines.at("flaky").replications + stats.failures == 10);
    CHECK(rec.engines.at("truth").replications == 10);
  }
}

TEST_CASE("report is identical for any number of workers") {
  auto cfg = small_config();
  cfg.replications = 5;
  const auto one = report_json_string(run_simulation(cfg, 1));
  const auto three = report_json_string(run_simulation(cfg, 3));
  CHECK(one == three);
}

TEST_CASE("a population without qualifying estimands is an error") {
  auto cfg = small_config();
  cfg.n_sample = 15;  // needs 2/3 < p < 1/3
  CHECK_THROWS_AS(run_simulation(cfg, 1), ValidationError);
}

TEST_CASE("config parsing, defaults and validation") {
  const auto doc = nlohmann::json::parse(R"({
    "population": {"synthetic": {"rows": 100, "levels": [2, 2], "joint": [0.25, 0.25, 0.25, 0.25]}, "seed": 3},
    "n_sample": 50, "replications": 4, "engines": ["cart", "dpm"],
    "dpm": {"classes": 5, "iterations": 100, "burn_in": 50}
  })");
  const auto cfg = SimulationConfig::from_json(doc);
  CHECK(cfg.imputations == 10);
  CHECK(cfg.dpm.classes == 5);
  CHECK(cfg.engines == std::vector<std::string>{"cart", "dpm"});
  const auto again = SimulationConfig::from_json(cfg.to_json());
  CHECK(again.to_json() == cfg.to_json());

  auto no_engines = doc;
  no_engines["engines"] = nlohmann::json::array();
  CHECK_THROWS_AS(SimulationConfig::from_json(no_engines), ValidationError);
  auto unknown = doc;
  unknown["engines"] = {"forest"};
  CHECK_THROWS_AS(SimulationConfig::from_json(unknown), ValidationError);
  auto one_rep = doc;
  one_rep["replications"] = 1;
  CHECK_THROWS_AS(SimulationConfig::from_json(one_rep), ValidationError);
  auto malformed = doc;
  malformed["n_sample"] = "many";
  CHECK_THROWS_AS(SimulationConfig::from_json(malformed), ValidationError);
}

TEST_CASE("csv populations resolve relative to the config") {
  const auto dir = std::filesystem::temp_directory_path() / "catimpute_sim_test";
  std::filesystem::create_directories(dir);
  auto cb = numbered_codebook({2, 3});
  std::ofstream(dir / "cb.json") << cb->to_json().dump();
  Rng rng(5);
  write_csv(uniform_dataset(cb, 400, rng), dir / "pop.csv");
  std::ofstream(dir / "sim.json") << R"({"population": {"csv": "pop.csv", "codebook": "cb.json"},
      "n_sample": 100, "replications": 2, "engines": ["cart"], "imputations": 2})";
  const auto cfg = SimulationConfig::load(dir / "sim.json");
  const auto pop = load_population(cfg);
  CHECK(pop.rows() == 400);
  const auto report = run_simulation(cfg, 1);
  CHECK(report.population_rows == 400);
  std::filesystem::remove_all(dir);
}

}
