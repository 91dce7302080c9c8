#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "catimpute/chained.hpp"

namespace catimpute {

struct CartOptions {
  int min_leaf = 4;
  double cp = 1e-4;          // minimum decrease relative to the root impurity
  int exhaustive_cap = 12;   // above this many levels, scan ordered cuts only
};

// 1 - sum p_c^2 over the class counts.
double gini(std::span<const double> counts);

struct Split {
  std::vector<std::uint8_t> left;  // per predictor level: 1 if the level goes left
  double decrease = 0.0;           // N*G(parent) - N_l*G(left) - N_r*G(right)
  std::size_t candidates = 0;      // partitions scanned
  std::size_t left_rows = 0;
  std::size_t right_rows = 0;
};

// Best binary partition of the levels of `predictor` present among `rows`
// (both columns indexed by row id). Exhaustive over 2^(m-1)-1 partitions when
// m <= exhaustive_cap, otherwise the m-1 cuts of the levels ordered by the
// share of the node's modal target class. Partitions leaving fewer than
// min_leaf rows on a side are skipped. nullopt if no feasible partition.
std::optional<Split> find_split(std::span<const Code> target, int target_levels,
                                std::span<const Code> predictor, int predictor_levels,
                                std::span<const std::size_t> rows, int min_leaf = 1,
                                int exhaustive_cap = 12);

class Tree {
 public:
  struct Node {
    int variable = -1;                      // split variable, -1 for a leaf
    std::vector<std::uint8_t> left_levels;  // levels seen at fit time that go left
    std::vector<std::uint8_t> route_left;   // all levels; unseen ones follow the larger child
    int left = -1;
    int right = -1;
    std::vector<std::size_t> rows;          // leaf only: fitting rows that landed here
    double impurity = 0.0;                  // N * Gini at fit time

    bool is_leaf() const noexcept { return variable < 0; }
  };

  Tree(int min_leaf, double cp) : min_leaf_(min_leaf), cp_(cp) {}

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::vector<std::size_t> leaves() const;
  int min_leaf() const noexcept { return min_leaf_; }
  double cp() const noexcept { return cp_; }

  // Leaf node index reached by `row` of `data`.
  std::size_t route(const CategoricalDataset& data, std::size_t row) const;

 private:
  friend Tree build_tree(const CategoricalDataset&, std::size_t, std::span<const std::size_t>,
                         std::span<const std::size_t>, const CartOptions&);

  int min_leaf_;
  double cp_;
  std::vector<Node> nodes_;
};

// Greedy Gini tree for column `target` grown on `fit_rows` over `predictors`.
// Deterministic: ties go to the earlier predictor and earlier partition.
Tree build_tree(const CategoricalDataset& data, std::size_t target,
                std::span<const std::size_t> predictors, std::span<const std::size_t> fit_rows,
                const CartOptions& options = {});

// Routes each impute row to its leaf and draws the target value of a fitting
// row in that leaf under Bayesian-bootstrap weights (one Dirichlet(1,...,1)
// draw per leaf per call).
std::vector<Code> impute_from_tree(const Tree& tree, std::span<const Code> target,
                                   const CategoricalDataset& data,
                                   std::span<const std::size_t> impute_rows, Rng& rng);

class CartEngine final : public ConditionalEngine {
 public:
  explicit CartEngine(CartOptions options = {}) : options_(options) {}

  std::string name() const override { return "cart"; }
  const CartOptions& options() const noexcept { return options_; }

  std::vector<Code> fit_and_draw(const CategoricalDataset& work, std::size_t target,
                                 std::span<const std::size_t> fit_rows,
                                 std::span<const std::size_t> impute_rows,
                                 Rng& rng) const override;

 private:
  CartOptions options_;
};

}  // namespace catimpute
