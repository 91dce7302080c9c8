#include "support.hpp"

#include <cmath>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>

namespace testsupport {

std::filesystem::path source_dir() { return CATIMPUTE_SOURCE_DIR; }

std::shared_ptr<const Codebook> numbered_codebook(const std::vector<int>& levels) {
  std::vector<Variable> vars;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    Variable v{"V" + std::to_string(j + 1), {}};
    for (int y = 1; y <= levels[j]; ++y) v.levels.push_back(std::to_string(y));
    vars.push_back(std::move(v));
  }
  return std::make_shared<const Codebook>(std::move(vars));
}

CategoricalDataset uniform_dataset(std::shared_ptr<const Codebook> cb, std::size_t rows, Rng& rng) {
  CategoricalDataset d(cb, rows);
  for (std::size_t j = 0; j < d.cols(); ++j)
    for (std::size_t i = 0; i < rows; ++i)
      d.set(i, j, static_cast<Code>(rng() % static_cast<std::uint64_t>(d.levels(j))));
  return d;
}

CategoricalDataset skewed_dataset(std::shared_ptr<const Codebook> cb, std::size_t rows, Rng& rng) {
  CategoricalDataset d(cb, rows);
  for (std::size_t j = 0; j < d.cols(); ++j) {
    std::vector<double> alpha(static_cast<std::size_t>(d.levels(j)), 0.7);
    std::vector<double> w(alpha.size());
    draw_dirichlet(alpha, w, rng);
    for (std::size_t i = 0; i < rows; ++i) d.set(i, j, static_cast<Code>(draw_categorical(w, rng)));
  }
  return d;
}

CategoricalDataset with_mcar(const CategoricalDataset& data, double rate, Rng& rng) {
  CategoricalDataset out = data;
  for (std::size_t j = 0; j < out.cols(); ++j) {
    for (std::size_t i = 0; i < out.rows(); ++i)
      if (uniform01(rng) < rate) out.set_missing(i, j, true);
    if (out.missing_count(j) == out.rows()) out.set_missing(0, j, false);
  }
  return out;
}

CategoricalDataset tree_example_fixture() {
  auto cb = std::make_shared<const Codebook>(std::vector<Variable>{
      {"gender", {"F", "M"}}, {"race", {"A", "C", "H"}}, {"class", {"1", "2", "3", "4", "5"}}});
  struct Cell {
    Code gender, race, cls;
    int rows;
  };
  const Cell cells[] = {{0, 0, 0, 40}, {1, 0, 1, 40}, {0, 1, 2, 40},
                        {1, 1, 3, 40}, {0, 2, 4, 80}, {1, 2, 4, 80}};
  std::size_t n = 0;
  for (const auto& c : cells) n += static_cast<std::size_t>(c.rows);
  CategoricalDataset d(cb, n);
  std::size_t i = 0;
  for (const auto& c : cells) {
    for (int r = 0; r < c.rows; ++r, ++i) {
      d.set(i, 0, c.gender);
      d.set(i, 1, c.race);
      d.set(i, 2, c.cls);
    }
  }
  return d;
}

std::vector<int> tree_example_expected_leaves(const CategoricalDataset& data) {
  std::vector<int> out(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const Code g = data.at(i, 0);
    const Code r = data.at(i, 1);
    // L1 female A, L2 male A, L3 female C, L4 male C, L5 H.
    out[i] = r == 2 ? 4 : static_cast<int>(r) * 2 + static_cast<int>(g);
  }
  return out;
}

SyntheticSpec two_class_spec(std::size_t rows) {
  SyntheticSpec spec;
  spec.rows = rows;
  for (int j = 0; j < 4; ++j) spec.variables.push_back({"X" + std::to_string(j + 1), {"a", "b", "c"}});
  MixtureGenerator mix;
  mix.weights = {0.6, 0.4};
  mix.lambda = {
      {{0.85, 0.10, 0.05}, {0.80, 0.15, 0.05}, {0.85, 0.05, 0.10}, {0.10, 0.85, 0.05}},
      {{0.05, 0.10, 0.85}, {0.05, 0.15, 0.80}, {0.10, 0.05, 0.85}, {0.05, 0.10, 0.85}},
  };
  spec.generator = mix;
  return spec;
}

std::vector<double> mixture_joint(const SyntheticSpec& spec) {
  const auto& mix = std::get<MixtureGenerator>(spec.generator);
  std::size_t cells = 1;
  for (const auto& v : spec.variables) cells *= v.levels.size();
  std::vector<double> out(cells, 0.0);
  std::vector<std::size_t> digit(spec.variables.size());
  for (std::size_t key = 0; key < cells; ++key) {
    std::size_t rest = key;
    for (std::size_t j = spec.variables.size(); j-- > 0;) {
      digit[j] = rest % spec.variables[j].levels.size();
      rest /= spec.variables[j].levels.size();
    }
    for (std::size_t k = 0; k < mix.weights.size(); ++k) {
      double term = mix.weights[k];
      for (std::size_t j = 0; j < digit.size(); ++j) term *= mix.lambda[k][j][digit[j]];
      out[key] += term;
    }
  }
  return out;
}

double dirichlet_multinomial_log_marginal(std::span<const double> counts) {
  double n = 0.0;
  double out = 0.0;
  for (double c : counts) {
    n += c;
    out += std::lgamma(1.0 + c);
  }
  const double d = static_cast<double>(counts.size());
  return out + std::lgamma(d) - std::lgamma(d + n);
}

double two_class_assignment_probability(int n1, int n2, const AlphaPrior& prior) {
  // alpha = t^4 removes the alpha^(shape - 1) endpoint singularity.
  auto integrand = [&](double t) {
    if (t <= 0.0) return 0.0;
    const double alpha = t * t * t * t;
    if (!(alpha > 0.0) || !std::isfinite(alpha)) return 0.0;
    const double log_beta = std::lgamma(1.0 + n1) + std::lgamma(alpha + n2) - std::lgamma(1.0 + n1 + alpha + n2);
    const double log_prior = prior.shape * std::log(prior.rate) + (prior.shape - 1.0) * std::log(alpha) -
                             prior.rate * alpha - std::lgamma(prior.shape);
    return std::exp(std::log(alpha) + log_beta + log_prior + std::log(4.0) + 3.0 * std::log(t));
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(integrand, 0.0, std::numeric_limits<double>::infinity());
}

std::array<double, 2> exact_two_class_predictive(const CategoricalDataset& data, const AlphaPrior& prior) {
  const std::size_t n = data.rows();
  const std::size_t p = data.cols();
  std::size_t mi = n, mj = p;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (data.missing(i, j)) {
        mi = i;
        mj = j;
      }
  std::vector<double> assignment(n + 1);
  for (std::size_t n1 = 0; n1 <= n; ++n1)
    assignment[n1] = two_class_assignment_probability(static_cast<int>(n1), static_cast<int>(n - n1), prior);

  std::array<double, 2> mass{0.0, 0.0};
  for (std::uint64_t zbits = 0; zbits < (std::uint64_t{1} << n); ++zbits) {
    int n2 = 0;
    for (std::size_t i = 0; i < n; ++i) n2 += static_cast<int>((zbits >> i) & 1U);
    const double pz = assignment[n - static_cast<std::size_t>(n2)];
    for (Code y = 0; y < 2; ++y) {
      double log_lik = 0.0;
      for (int k = 0; k < 2; ++k) {
        for (std::size_t j = 0; j < p; ++j) {
          double counts[2] = {0.0, 0.0};
          for (std::size_t i = 0; i < n; ++i) {
            if (static_cast<int>((zbits >> i) & 1U) != k) continue;
            const Code v = (i == mi && j == mj) ? y : data.at(i, j);
            counts[v] += 1.0;
          }
          log_lik += dirichlet_multinomial_log_marginal(counts);
        }
      }
      mass[static_cast<std::size_t>(y)] += pz * std::exp(log_lik);
    }
  }
  const double total = mass[0] + mass[1];
  return {mass[0] / total, mass[1] / total};
}

Eigen::VectorXd numeric_gradient(const LogisticFit& fit, const Eigen::MatrixXd& coefficients,
                                 const Eigen::MatrixXd& design, std::span<const Code> target, double h) {
  const Eigen::Index eqs = coefficients.rows();
  const Eigen::Index cols = coefficients.cols();
  Eigen::VectorXd g(eqs * cols);
  for (Eigen::Index c = 0; c < eqs; ++c) {
    for (Eigen::Index q = 0; q < cols; ++q) {
      Eigen::MatrixXd up = coefficients;
      Eigen::MatrixXd down = coefficients;
      up(c, q) += h;
      down(c, q) -= h;
      g(c * cols + q) = (penalized_log_likelihood(fit, up, design, target) -
                         penalized_log_likelihood(fit, down, design, target)) /
                        (2.0 * h);
    }
  }
  return g;
}

namespace {

class TruthCopy final : public Imputer {
 public:
  std::string name() const override { return "truth"; }
  ImputationOutput impute(const ImputationRequest& request) const override {
    ImputationOutput out;
    out.completed.assign(static_cast<std::size_t>(request.imputations), request.complete_sample);
    return out;
  }
};

}  // namespace

std::shared_ptr<const Imputer> truth_copy_imputer() { return std::make_shared<TruthCopy>(); }

}  // namespace testsupport
