#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "catimpute/data.hpp"
#include "catimpute/rng.hpp"

namespace catimpute {

// Gamma(shape, rate) prior on the stick-breaking concentration.
struct AlphaPrior {
  double shape = 0.25;
  double rate = 0.25;
};

struct DpmConfig {
  int classes = 35;          // truncation level K
  int iterations = 10000;
  int burn_in = 2000;
  int imputations = 10;      // completed datasets captured after burn-in
  AlphaPrior alpha_prior;

  void validate() const;
};

// Truncated stick-breaking mixture of products of multinomials. Classes are
// zero-based. lambda is stored category-major so the K class probabilities
// of one (variable, level) pair are contiguous.
struct DpmState {
  int classes = 0;
  std::vector<int> levels;            // D_j
  std::vector<std::size_t> offsets;   // first stacked category of variable j
  std::vector<int> z;                 // class of each row
  std::vector<double> v;              // stick fractions, v[K-1] == 1
  std::vector<double> log_one_minus_v;
  std::vector<double> pi;
  std::vector<double> lambda;         // [(offsets[j] + y) * classes + k]
  double alpha = 1.0;
  double log_density = 0.0;           // complete-data log p(Y, z | lambda, pi) after the last sweep

  DpmState(std::span<const int> level_counts, std::size_t rows, int classes);

  double lam(int k, std::size_t j, Code y) const {
    return lambda[(offsets[j] + static_cast<std::size_t>(y)) * static_cast<std::size_t>(classes) +
                  static_cast<std::size_t>(k)];
  }
  double& lam(int k, std::size_t j, Code y) {
    return lambda[(offsets[j] + static_cast<std::size_t>(y)) * static_cast<std::size_t>(classes) +
                  static_cast<std::size_t>(k)];
  }

  // pi_k = v_k * prod_{h<k} (1 - v_h).
  void recompute_pi();
};

// Every row in the first class, then lambda, v and alpha drawn from their
// full conditionals given those labels and the current imputations in `work`.
DpmState initial_dpm_state(const CategoricalDataset& work, int classes, const AlphaPrior& prior,
                           Rng& rng);

// One sweep: z (missing cells marginalized), missing cells, lambda, v/pi,
// alpha. `work` holds the current imputations in its missing cells; observed
// cells are never written.
void gibbs_step(DpmState& state, CategoricalDataset& work, const AlphaPrior& prior, Rng& rng);

std::size_t occupied_classes(const DpmState& state);

// sum_k pi_k prod_{(j,y)} lambda[k][j][y]; variables must be distinct.
double joint_cell_probability(const DpmState& state, std::span<const EstimandCell> cells);

struct DpmResult {
  std::vector<CategoricalDataset> completed;
  std::vector<int> capture_iterations;  // 1-based sweep numbers
  std::vector<int> occupancy_trace;
  std::vector<double> alpha_trace;
  std::vector<double> log_density_trace;
  int max_occupied = 0;                 // post burn-in
  bool saturated = false;               // occupancy reached K after burn-in
};

// Called after every sweep with the 1-based sweep number.
using DpmObserver =
    std::function<void(int iteration, const DpmState& state, const CategoricalDataset& work)>;

// Missing cells start from observed marginals; completed datasets are taken
// at burn_in + s, burn_in + 2s, ... with s = floor((iterations - burn_in) / L).
DpmResult dpm_multiple_impute(const CategoricalDataset& data, const DpmConfig& cfg, Rng& rng,
                              const DpmObserver& observer = {});

// iteration,occupied,alpha,log_density
void write_dpm_trace(const DpmResult& result, std::ostream& out);

}  // namespace catimpute
