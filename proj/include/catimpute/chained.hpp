#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "catimpute/data.hpp"
#include "catimpute/rng.hpp"

namespace catimpute {

// One univariate conditional model used inside a chained-equations cycle.
class ConditionalEngine {
 public:
  virtual ~ConditionalEngine() = default;

  virtual std::string name() const = 0;

  // Fits a model for column `target` on `fit_rows` (rows where target is
  // observed), using every other column of `work` as predictors, and returns
  // one draw per entry of `impute_rows`, in the same order.
  virtual std::vector<Code> fit_and_draw(const CategoricalDataset& work, std::size_t target,
                                         std::span<const std::size_t> fit_rows,
                                         std::span<const std::size_t> impute_rows,
                                         Rng& rng) const = 0;
};

enum class VariableOrdering { appearance, fewest_missing_first };

struct ChainedConfig {
  int cycles = 10;
  VariableOrdering ordering = VariableOrdering::appearance;
  std::shared_ptr<const ConditionalEngine> engine;
  int imputations = 10;

  void validate() const;
};

// Imputation order: variables with missing values per `ordering` (ties by
// appearance), then the fully observed variables.
std::vector<std::size_t> imputation_order(const CategoricalDataset& data, VariableOrdering ordering);

// Fills every missing cell in place with a draw from that column's observed
// marginal. The mask is left untouched.
void fill_from_observed_marginals(CategoricalDataset& work, Rng& rng);

// Copy of `data` with missing cells filled from observed marginals; the mask
// still marks which cells were imputed.
CategoricalDataset initial_impute(const CategoricalDataset& data, Rng& rng);

CategoricalDataset run_chain(const CategoricalDataset& data, const ChainedConfig& cfg, Rng& rng);

// cfg.imputations independent chains, chain l seeded by derive_seed(master_seed, l).
std::vector<CategoricalDataset> multiple_impute(const CategoricalDataset& data,
                                                const ChainedConfig& cfg,
                                                std::uint64_t master_seed);

}  // namespace catimpute
