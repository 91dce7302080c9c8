#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "catimpute/chained.hpp"

namespace catimpute {

struct GlmOptions {
  double ridge = 1e-5;       // on every non-intercept coefficient
  int max_levels = 10;       // larger targets raise EngineUnsupported
  int max_iterations = 25;
  double tolerance = 1e-8;   // on the largest coefficient change
  int max_halvings = 5;
};

// Main-effects multinomial logit. Row c of `coefficients` holds the log-odds
// of outcome_levels[c + 1] against outcome_levels[0] (the reference, which is
// level 1 whenever level 1 is observed). Levels never observed in the fitting
// rows carry no equation and are never drawn.
struct LogisticFit {
  int target_levels = 0;
  std::vector<Code> outcome_levels;
  Eigen::MatrixXd coefficients;   // (outcomes - 1) x design columns
  Eigen::MatrixXd covariance;     // parameter index c * columns + p
  double ridge = 0.0;
  int iterations = 0;
  std::vector<double> objective_trace;

  Eigen::Index equations() const { return coefficients.rows(); }
  Eigen::Index columns() const { return coefficients.cols(); }
};

// Intercept plus treatment (first level = reference) dummies for every
// column except `target`, one design row per entry of `rows`.
Eigen::MatrixXd build_design(const CategoricalDataset& data, std::size_t target,
                             std::span<const std::size_t> rows);

LogisticFit fit_multinomial(const Eigen::MatrixXd& design, std::span<const Code> target,
                            int target_levels, const GlmOptions& options = {},
                            std::string_view target_name = "target");

// Softmax probabilities over fit.outcome_levels, one row per design row.
Eigen::MatrixXd class_probabilities(const Eigen::MatrixXd& coefficients,
                                    const Eigen::MatrixXd& design);

// Objective and gradient (flattened c * columns + p) used by the fit.
double penalized_log_likelihood(const LogisticFit& fit, const Eigen::MatrixXd& coefficients,
                                const Eigen::MatrixXd& design, std::span<const Code> target);
Eigen::VectorXd penalized_gradient(const LogisticFit& fit, const Eigen::MatrixXd& coefficients,
                                   const Eigen::MatrixXd& design, std::span<const Code> target);

// Draws one coefficient set from N(estimate, covariance), then one outcome
// per design row from the implied softmax.
std::vector<Code> draw_and_impute(const LogisticFit& fit, const Eigen::MatrixXd& design, Rng& rng);

class GlmEngine final : public ConditionalEngine {
 public:
  explicit GlmEngine(GlmOptions options = {}) : options_(options) {}

  std::string name() const override { return "glm"; }
  const GlmOptions& options() const noexcept { return options_; }

  std::vector<Code> fit_and_draw(const CategoricalDataset& work, std::size_t target,
                                 std::span<const std::size_t> fit_rows,
                                 std::span<const std::size_t> impute_rows,
                                 Rng& rng) const override;

 private:
  GlmOptions options_;
};

}  // namespace catimpute
