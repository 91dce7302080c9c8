#include "catimpute/dpm.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "catimpute/chained.hpp"

namespace catimpute {

void DpmConfig::validate() const {
  if (classes < 1) throw ValidationError("DPM needs at least one latent class");
  if (iterations < 1) throw ValidationError("DPM iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations)
    throw ValidationError("DPM burn-in must be non-negative and below the iteration count");
  if (imputations < 1) throw ValidationError("DPM must capture at least one dataset");
  if (iterations - burn_in < imputations)
    throw ValidationError("DPM post-burn-in iterations fewer than requested imputations");
  if (!(alpha_prior.shape > 0.0 && alpha_prior.rate > 0.0))
    throw ValidationError("alpha prior parameters must be positive");
}

DpmState::DpmState(std::span<const int> level_counts, std::size_t rows, int k)
    : classes(k), levels(level_counts.begin(), level_counts.end()) {
  if (k < 1) throw ValidationError("DPM needs at least one latent class");
  if (rows == 0) throw ValidationError("DPM state needs at least one row");
  std::size_t total = 0;
  for (int d : levels) {
    offsets.push_back(total);
    total += static_cast<std::size_t>(d);
  }
  const auto kk = static_cast<std::size_t>(k);
  z.assign(rows, 0);
  v.assign(kk, 0.0);
  v.back() = 1.0;
  log_one_minus_v.assign(kk, 0.0);
  pi.assign(kk, 0.0);
  lambda.assign(total * kk, 0.0);
  for (std::size_t j = 0; j < levels.size(); ++j)
    for (int y = 0; y < levels[j]; ++y)
      for (int c = 0; c < k; ++c) lam(c, j, y) = 1.0 / levels[j];
  recompute_pi();
}

void DpmState::recompute_pi() {
  double remaining = 1.0;
  for (std::size_t k = 0; k < pi.size(); ++k) {
    if (k + 1 == pi.size()) {
      pi[k] = remaining;
      break;
    }
    pi[k] = v[k] * remaining;
    remaining *= std::exp(log_one_minus_v[k]);
  }
}

namespace {

struct SufficientStats {
  std::vector<double> category;  // same layout as lambda
  std::vector<double> occupancy; // rows per class
};

SufficientStats collect(const DpmState& s, const CategoricalDataset& work) {
  const auto kk = static_cast<std::size_t>(s.classes);
  SufficientStats stats{std::vector<double>(s.lambda.size(), 0.0), std::vector<double>(kk, 0.0)};
  for (std::size_t i = 0; i < work.rows(); ++i) stats.occupancy[static_cast<std::size_t>(s.z[i])] += 1.0;
  for (std::size_t j = 0; j < work.cols(); ++j) {
    const auto col = work.column(j);
    for (std::size_t i = 0; i < work.rows(); ++i)
      stats.category[(s.offsets[j] + static_cast<std::size_t>(col[i])) * kk +
                     static_cast<std::size_t>(s.z[i])] += 1.0;
  }
  return stats;
}

void draw_lambda(DpmState& s, const SufficientStats& stats, Rng& rng) {
  const auto kk = static_cast<std::size_t>(s.classes);
  std::vector<double> g;
  for (std::size_t j = 0; j < s.levels.size(); ++j) {
    const auto d = static_cast<std::size_t>(s.levels[j]);
    g.resize(d);
    for (std::size_t k = 0; k < kk; ++k) {
      double total = 0.0;
      for (std::size_t y = 0; y < d; ++y) {
        std::gamma_distribution<double> dist(1.0 + stats.category[(s.offsets[j] + y) * kk + k], 1.0);
        g[y] = dist(rng);
        total += g[y];
      }
      if (!(total > 0.0)) {
        std::fill(g.begin(), g.end(), 1.0);
        total = static_cast<double>(d);
      }
      for (std::size_t y = 0; y < d; ++y) s.lambda[(s.offsets[j] + y) * kk + k] = g[y] / total;
    }
  }
}

void draw_sticks(DpmState& s, const SufficientStats& stats, Rng& rng) {
  const auto kk = static_cast<std::size_t>(s.classes);
  double beyond = 0.0;  // rows in classes after k
  for (std::size_t k = kk; k-- > 0;) {
    if (k + 1 == kk) {
      s.v[k] = 1.0;
      s.log_one_minus_v[k] = 0.0;
    } else {
      const auto draw = draw_beta(1.0 + stats.occupancy[k], s.alpha + beyond, rng);
      s.v[k] = draw.value;
      s.log_one_minus_v[k] = draw.log_complement;
    }
    beyond += stats.occupancy[k];
  }
  s.recompute_pi();
}

void draw_alpha(DpmState& s, const AlphaPrior& prior, Rng& rng) {
  double sum_log = 0.0;
  for (std::size_t k = 0; k + 1 < s.v.size(); ++k) sum_log += s.log_one_minus_v[k];
  s.alpha = draw_gamma(prior.shape + s.classes - 1, prior.rate - sum_log, rng);
}

double log_density(const DpmState& s, const SufficientStats& stats) {
  double out = 0.0;
  for (std::size_t k = 0; k < stats.occupancy.size(); ++k)
    if (stats.occupancy[k] > 0.0) out += stats.occupancy[k] * std::log(s.pi[k]);
  for (std::size_t c = 0; c < stats.category.size(); ++c)
    if (stats.category[c] > 0.0) out += stats.category[c] * std::log(s.lambda[c]);
  return out;
}

void update_parameters(DpmState& s, const CategoricalDataset& work, const AlphaPrior& prior,
                       Rng& rng) {
  const auto stats = collect(s, work);
  draw_lambda(s, stats, rng);
  draw_sticks(s, stats, rng);
  draw_alpha(s, prior, rng);
  s.log_density = log_density(s, stats);
}

void check_shape(const DpmState& s, const CategoricalDataset& work) {
  if (s.z.size() != work.rows() || s.levels.size() != work.cols())
    throw ValidationError("DPM state does not match the dataset shape");
  for (std::size_t j = 0; j < work.cols(); ++j)
    if (s.levels[j] != work.levels(j)) throw ValidationError("DPM state level counts differ");
}

// Below this, a product of probabilities is recomputed in log space.
constexpr double kUnderflowGuard = 1e-280;

}  // namespace

DpmState initial_dpm_state(const CategoricalDataset& work, int classes, const AlphaPrior& prior,
                           Rng& rng) {
  std::vector<int> levels(work.cols());
  for (std::size_t j = 0; j < work.cols(); ++j) levels[j] = work.levels(j);
  DpmState s(levels, work.rows(), classes);
  std::fill(s.z.begin(), s.z.end(), 0);
  update_parameters(s, work, prior, rng);
  return s;
}

void gibbs_step(DpmState& s, CategoricalDataset& work, const AlphaPrior& prior, Rng& rng) {
  check_shape(s, work);
  const auto kk = static_cast<std::size_t>(s.classes);
  const std::size_t n = work.rows();
  const std::size_t p = work.cols();

  // (a) classes, with missing cells integrated out.
  std::vector<double> prob(kk);
  std::vector<double> logp(kk);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(s.pi.begin(), s.pi.end(), prob.begin());
    for (std::size_t j = 0; j < p; ++j) {
      if (work.missing(i, j)) continue;
      const double* col = &s.lambda[(s.offsets[j] + static_cast<std::size_t>(work.at(i, j))) * kk];
      for (std::size_t k = 0; k < kk; ++k) prob[k] *= col[k];
    }
    double total = 0.0;
    for (double w : prob) total += w;
    if (!(total > kUnderflowGuard)) {
      for (std::size_t k = 0; k < kk; ++k) logp[k] = std::log(s.pi[k]);
      for (std::size_t j = 0; j < p; ++j) {
        if (work.missing(i, j)) continue;
        const double* col = &s.lambda[(s.offsets[j] + static_cast<std::size_t>(work.at(i, j))) * kk];
        for (std::size_t k = 0; k < kk; ++k) logp[k] += std::log(col[k]);
      }
      const double top = *std::max_element(logp.begin(), logp.end());
      for (std::size_t k = 0; k < kk; ++k) prob[k] = std::exp(logp[k] - top);
    }
    s.z[i] = static_cast<int>(draw_categorical(prob, rng));
  }

  // (b) missing cells given their class.
  std::vector<double> w;
  for (std::size_t j = 0; j < p; ++j) {
    const auto d = static_cast<std::size_t>(s.levels[j]);
    w.resize(d);
    auto column = work.column(j);
    for (std::size_t i = 0; i < n; ++i) {
      if (!work.missing(i, j)) continue;
      const auto k = static_cast<std::size_t>(s.z[i]);
      for (std::size_t y = 0; y < d; ++y) w[y] = s.lambda[(s.offsets[j] + y) * kk + k];
      column[i] = static_cast<Code>(draw_categorical(w, rng));
    }
  }

  // (c)-(e)
  update_parameters(s, work, prior, rng);
}

std::size_t occupied_classes(const DpmState& state) {
  std::vector<bool> used(static_cast<std::size_t>(state.classes), false);
  std::size_t count = 0;
  for (int k : state.z) {
    if (!used[static_cast<std::size_t>(k)]) {
      used[static_cast<std::size_t>(k)] = true;
      ++count;
    }
  }
  return count;
}

double joint_cell_probability(const DpmState& state, std::span<const EstimandCell> cells) {
  for (std::size_t a = 0; a < cells.size(); ++a)
    for (std::size_t b = a + 1; b < cells.size(); ++b)
      if (cells[a].variable == cells[b].variable)
        throw ValidationError("joint cell probability needs distinct variables");
  double out = 0.0;
  for (int k = 0; k < state.classes; ++k) {
    double term = state.pi[static_cast<std::size_t>(k)];
    for (const auto& c : cells) term *= state.lam(k, c.variable, c.level);
    out += term;
  }
  return out;
}

DpmResult dpm_multiple_impute(const CategoricalDataset& data, const DpmConfig& cfg, Rng& rng,
                              const DpmObserver& observer) {
  cfg.validate();
  DpmResult result;
  if (data.complete()) {
    result.completed.assign(static_cast<std::size_t>(cfg.imputations), data);
    return result;
  }

  CategoricalDataset work = data;
  fill_from_observed_marginals(work, rng);
  DpmState state = initial_dpm_state(work, cfg.classes, cfg.alpha_prior, rng);

  const int spacing = (cfg.iterations - cfg.burn_in) / cfg.imputations;
  const auto iters = static_cast<std::size_t>(cfg.iterations);
  result.occupancy_trace.reserve(iters);
  result.alpha_trace.reserve(iters);
  result.log_density_trace.reserve(iters);
  for (int it = 1; it <= cfg.iterations; ++it) {
    gibbs_step(state, work, cfg.alpha_prior, rng);
    const int occupied = static_cast<int>(occupied_classes(state));
    result.occupancy_trace.push_back(occupied);
    result.alpha_trace.push_back(state.alpha);
    result.log_density_trace.push_back(state.log_density);
    if (it > cfg.burn_in) {
      result.max_occupied = std::max(result.max_occupied, occupied);
      if (occupied >= cfg.classes) result.saturated = true;
    }
    if (observer) observer(it, state, work);
    if (it > cfg.burn_in && (it - cfg.burn_in) % spacing == 0 &&
        static_cast<int>(result.completed.size()) < cfg.imputations) {
      result.completed.push_back(work.completed());
      result.capture_iterations.push_back(it);
    }
  }
  return result;
}

void write_dpm_trace(const DpmResult& result, std::ostream& out) {
  out << "iteration,occupied,alpha,log_density\n";
  out.precision(17);
  for (std::size_t t = 0; t < result.occupancy_trace.size(); ++t)
    out << (t + 1) << ',' << result.occupancy_trace[t] << ',' << result.alpha_trace[t] << ','
        << result.log_density_trace[t] << '\n';
}

}  // namespace catimpute
