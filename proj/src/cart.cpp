#include "catimpute/cart.hpp"

#include <algorithm>
#include <numeric>

namespace catimpute {

double gini(std::span<const double> counts) {
  double total = 0.0;
  double sq = 0.0;
  for (double c : counts) {
    total += c;
    sq += c * c;
  }
  if (total <= 0.0) return 0.0;
  return 1.0 - sq / (total * total);
}

namespace {

// N * Gini(counts) = N - sum c^2 / N.
double weighted_impurity(std::span<const double> counts) {
  double total = 0.0;
  double sq = 0.0;
  for (double c : counts) {
    total += c;
    sq += c * c;
  }
  return total > 0.0 ? total - sq / total : 0.0;
}

std::vector<double> class_counts(std::span<const Code> target, int target_levels,
                                 std::span<const std::size_t> rows) {
  std::vector<double> counts(static_cast<std::size_t>(target_levels), 0.0);
  for (auto i : rows) counts[static_cast<std::size_t>(target[i])] += 1.0;
  return counts;
}

}  // namespace

std::optional<Split> find_split(std::span<const Code> target, int target_levels,
                                std::span<const Code> predictor, int predictor_levels,
                                std::span<const std::size_t> rows, int min_leaf,
                                int exhaustive_cap) {
  const auto classes = static_cast<std::size_t>(target_levels);
  const auto plevels = static_cast<std::size_t>(predictor_levels);
  std::vector<double> table(plevels * classes, 0.0);
  std::vector<double> level_total(plevels, 0.0);
  std::vector<double> node(classes, 0.0);
  for (auto i : rows) {
    const auto l = static_cast<std::size_t>(predictor[i]);
    const auto c = static_cast<std::size_t>(target[i]);
    table[l * classes + c] += 1.0;
    level_total[l] += 1.0;
    node[c] += 1.0;
  }
  std::vector<std::size_t> present;
  for (std::size_t l = 0; l < plevels; ++l)
    if (level_total[l] > 0.0) present.push_back(l);
  const std::size_t m = present.size();
  if (m < 2) return std::nullopt;

  const double n = static_cast<double>(rows.size());
  const double parent = weighted_impurity(node);
  std::vector<double> left(classes);
  std::vector<double> right(classes);

  std::optional<Split> best;
  std::size_t scanned = 0;
  auto consider = [&](const std::vector<std::uint8_t>& goes_left) {
    ++scanned;
    std::fill(left.begin(), left.end(), 0.0);
    double n_left = 0.0;
    for (auto l : present) {
      if (!goes_left[l]) continue;
      n_left += level_total[l];
      for (std::size_t c = 0; c < classes; ++c) left[c] += table[l * classes + c];
    }
    const double n_right = n - n_left;
    if (n_left < min_leaf || n_right < min_leaf) return;
    for (std::size_t c = 0; c < classes; ++c) right[c] = node[c] - left[c];
    const double decrease = parent - weighted_impurity(left) - weighted_impurity(right);
    if (!best || decrease > best->decrease) {
      best = Split{goes_left, decrease, 0, static_cast<std::size_t>(n_left),
                   static_cast<std::size_t>(n_right)};
    }
  };

  std::vector<std::uint8_t> goes_left(plevels, 0);
  if (static_cast<int>(m) <= exhaustive_cap) {
    // The first present level always goes left; the rest range over every
    // subset except "all of them".
    const std::uint64_t subsets = (std::uint64_t{1} << (m - 1)) - 1;
    for (std::uint64_t s = 0; s < subsets; ++s) {
      std::fill(goes_left.begin(), goes_left.end(), 0);
      goes_left[present[0]] = 1;
      for (std::size_t b = 0; b + 1 < m; ++b)
        if (s & (std::uint64_t{1} << b)) goes_left[present[b + 1]] = 1;
      consider(goes_left);
    }
  } else {
    const auto modal = static_cast<std::size_t>(
        std::max_element(node.begin(), node.end()) - node.begin());
    std::vector<std::size_t> order = present;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return table[a * classes + modal] / level_total[a] < table[b * classes + modal] / level_total[b];
    });
    std::fill(goes_left.begin(), goes_left.end(), 0);
    for (std::size_t k = 0; k + 1 < m; ++k) {
      goes_left[order[k]] = 1;
      consider(goes_left);
    }
  }
  if (best) best->candidates = scanned;
  return best;
}

std::vector<std::size_t> Tree::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < nodes_.size(); ++k)
    if (nodes_[k].is_leaf()) out.push_back(k);
  return out;
}

std::size_t Tree::route(const CategoricalDataset& data, std::size_t row) const {
  std::size_t k = 0;
  while (!nodes_[k].is_leaf()) {
    const auto& node = nodes_[k];
    const auto level = static_cast<std::size_t>(data.at(row, static_cast<std::size_t>(node.variable)));
    k = static_cast<std::size_t>(node.route_left[level] ? node.left : node.right);
  }
  return k;
}

Tree build_tree(const CategoricalDataset& data, std::size_t target,
                std::span<const std::size_t> predictors, std::span<const std::size_t> fit_rows,
                const CartOptions& options) {
  Tree tree(options.min_leaf, options.cp);
  const auto target_col = data.column(target);
  const int target_levels = data.levels(target);

  struct Pending {
    std::size_t node;
    std::vector<std::size_t> rows;
  };
  tree.nodes_.emplace_back();
  std::vector<Pending> stack;
  stack.push_back({0, std::vector<std::size_t>(fit_rows.begin(), fit_rows.end())});
  double root_impurity = -1.0;

  while (!stack.empty()) {
    Pending work = std::move(stack.back());
    stack.pop_back();
    const double impurity = weighted_impurity(class_counts(target_col, target_levels, work.rows));
    tree.nodes_[work.node].impurity = impurity;
    if (root_impurity < 0.0) root_impurity = impurity;

    std::optional<Split> best;
    std::size_t best_var = 0;
    if (impurity > 0.0 && work.rows.size() >= 2 * static_cast<std::size_t>(options.min_leaf)) {
      for (auto j : predictors) {
        auto split = find_split(target_col, target_levels, data.column(j), data.levels(j),
                                work.rows, options.min_leaf, options.exhaustive_cap);
        if (split && (!best || split->decrease > best->decrease)) {
          best = std::move(split);
          best_var = j;
        }
      }
    }
    if (!best || !(best->decrease > options.cp * root_impurity)) {
      tree.nodes_[work.node].rows = std::move(work.rows);
      continue;
    }

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    const auto pred = data.column(best_var);
    for (auto i : work.rows)
      (best->left[static_cast<std::size_t>(pred[i])] ? left_rows : right_rows).push_back(i);

    auto& node = tree.nodes_[work.node];
    node.variable = static_cast<int>(best_var);
    node.left_levels = best->left;
    node.route_left = best->left;
    const bool majority_left = left_rows.size() >= right_rows.size();
    std::vector<bool> seen(static_cast<std::size_t>(data.levels(best_var)), false);
    for (auto i : work.rows) seen[static_cast<std::size_t>(pred[i])] = true;
    for (std::size_t l = 0; l < seen.size(); ++l)
      if (!seen[l]) node.route_left[l] = majority_left ? 1 : 0;

    const auto left_id = tree.nodes_.size();
    tree.nodes_.emplace_back();
    tree.nodes_.emplace_back();
    tree.nodes_[work.node].left = static_cast<int>(left_id);
    tree.nodes_[work.node].right = static_cast<int>(left_id + 1);
    // Right pushed first so the left subtree is grown first.
    stack.push_back({left_id + 1, std::move(right_rows)});
    stack.push_back({left_id, std::move(left_rows)});
  }
  return tree;
}

std::vector<Code> impute_from_tree(const Tree& tree, std::span<const Code> target,
                                   const CategoricalDataset& data,
                                   std::span<const std::size_t> impute_rows, Rng& rng) {
  const auto& nodes = tree.nodes();
  std::vector<std::size_t> leaf_of(impute_rows.size());
  std::vector<bool> needed(nodes.size(), false);
  for (std::size_t r = 0; r < impute_rows.size(); ++r) {
    leaf_of[r] = tree.route(data, impute_rows[r]);
    needed[leaf_of[r]] = true;
  }

  // Cumulative Bayesian-bootstrap weights per needed leaf, drawn in node order.
  std::vector<std::vector<double>> cumulative(nodes.size());
  std::vector<double> ones;
  std::vector<double> weights;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (!needed[k]) continue;
    const auto& rows = nodes[k].rows;
    if (rows.empty()) throw EngineError("CART leaf without fitting rows");
    ones.assign(rows.size(), 1.0);
    weights.resize(rows.size());
    draw_dirichlet(ones, weights, rng);
    auto& cum = cumulative[k];
    cum.resize(rows.size());
    std::partial_sum(weights.begin(), weights.end(), cum.begin());
  }

  std::vector<Code> out(impute_rows.size());
  for (std::size_t r = 0; r < impute_rows.size(); ++r) {
    const auto k = leaf_of[r];
    const auto pick = draw_from_cumulative(cumulative[k], rng);
    out[r] = target[nodes[k].rows[pick]];
  }
  return out;
}

std::vector<Code> CartEngine::fit_and_draw(const CategoricalDataset& work, std::size_t target,
                                           std::span<const std::size_t> fit_rows,
                                           std::span<const std::size_t> impute_rows,
                                           Rng& rng) const {
  if (impute_rows.empty()) return {};
  if (fit_rows.empty())
    throw EngineError("no observed rows to fit '" + work.codebook().variable(target).name + "'");
  std::vector<std::size_t> predictors;
  for (std::size_t j = 0; j < work.cols(); ++j)
    if (j != target) predictors.push_back(j);
  const Tree tree = build_tree(work, target, predictors, fit_rows, options_);
  return impute_from_tree(tree, work.column(target), work, impute_rows, rng);
}

}  // namespace catimpute
