#include "catimpute/chained.hpp"

#include <algorithm>
#include <numeric>

namespace catimpute {

void ChainedConfig::validate() const {
  if (cycles < 1) throw ValidationError("chained cycles must be at least 1");
  if (imputations < 2) throw ValidationError("number of imputations must be at least 2");
  if (!engine) throw ValidationError("chained config has no conditional engine");
}

std::vector<std::size_t> imputation_order(const CategoricalDataset& data, VariableOrdering ordering) {
  std::vector<std::size_t> incomplete;
  std::vector<std::size_t> complete;
  std::vector<std::size_t> missing(data.cols());
  for (std::size_t j = 0; j < data.cols(); ++j) {
    missing[j] = data.missing_count(j);
    (missing[j] > 0 ? incomplete : complete).push_back(j);
  }
  if (ordering == VariableOrdering::fewest_missing_first)
    std::stable_sort(incomplete.begin(), incomplete.end(),
                     [&](std::size_t a, std::size_t b) { return missing[a] < missing[b]; });
  incomplete.insert(incomplete.end(), complete.begin(), complete.end());
  return incomplete;
}

void fill_from_observed_marginals(CategoricalDataset& work, Rng& rng) {
  for (std::size_t j = 0; j < work.cols(); ++j) {
    const auto missing = work.missing_rows(j);
    if (missing.empty()) continue;
    std::vector<double> counts(static_cast<std::size_t>(work.levels(j)), 0.0);
    std::size_t observed = 0;
    for (std::size_t i = 0; i < work.rows(); ++i) {
      if (work.missing(i, j)) continue;
      counts[static_cast<std::size_t>(work.at(i, j))] += 1.0;
      ++observed;
    }
    if (observed == 0)
      throw ValidationError("variable '" + work.codebook().variable(j).name +
                            "' has no observed values to impute from");
    auto column = work.column(j);
    for (auto i : missing) column[i] = static_cast<Code>(draw_categorical(counts, rng));
  }
}

CategoricalDataset initial_impute(const CategoricalDataset& data, Rng& rng) {
  CategoricalDataset work = data;
  fill_from_observed_marginals(work, rng);
  return work;
}

CategoricalDataset run_chain(const CategoricalDataset& data, const ChainedConfig& cfg, Rng& rng) {
  cfg.validate();
  if (data.complete()) return data;

  CategoricalDataset work = initial_impute(data, rng);
  const auto order = imputation_order(data, cfg.ordering);

  struct Target {
    std::size_t variable;
    std::vector<std::size_t> fit_rows;
    std::vector<std::size_t> impute_rows;
  };
  std::vector<Target> targets;
  for (auto j : order) {
    if (data.missing_count(j) == 0) break;  // complete variables are at the tail
    targets.push_back({j, data.observed_rows(j), data.missing_rows(j)});
  }

  for (int t = 0; t < cfg.cycles; ++t) {
    for (const auto& target : targets) {
      const auto draws =
          cfg.engine->fit_and_draw(work, target.variable, target.fit_rows, target.impute_rows, rng);
      if (draws.size() != target.impute_rows.size())
        throw EngineError(cfg.engine->name() + " engine returned " + std::to_string(draws.size()) +
                          " draws for " + std::to_string(target.impute_rows.size()) + " rows");
      auto column = work.column(target.variable);
      for (std::size_t r = 0; r < target.impute_rows.size(); ++r) {
        const Code c = draws[r];
        if (c < 0 || c >= work.levels(target.variable))
          throw EngineError(cfg.engine->name() + " engine returned an invalid level for '" +
                            work.codebook().variable(target.variable).name + "'");
        column[target.impute_rows[r]] = c;
      }
    }
  }
  return work.completed();
}

std::vector<CategoricalDataset> multiple_impute(const CategoricalDataset& data,
                                                const ChainedConfig& cfg,
                                                std::uint64_t master_seed) {
  cfg.validate();
  std::vector<CategoricalDataset> out;
  out.reserve(static_cast<std::size_t>(cfg.imputations));
  for (int l = 0; l < cfg.imputations; ++l) {
    Rng rng = make_rng(derive_seed(master_seed, static_cast<std::uint64_t>(l)));
    out.push_back(run_chain(data, cfg, rng));
  }
  return out;
}

}  // namespace catimpute
