#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "catimpute/report.hpp"
#include "catimpute/simulator.hpp"

namespace testsupport {

using namespace catimpute;

std::filesystem::path source_dir();

// Variables V1..Vp with labels "1".."D".
std::shared_ptr<const Codebook> numbered_codebook(const std::vector<int>& levels);

// Every cell uniform over its levels.
CategoricalDataset uniform_dataset(std::shared_ptr<const Codebook> cb, std::size_t rows, Rng& rng);

// Random levels, random (possibly lopsided) marginals per column.
CategoricalDataset skewed_dataset(std::shared_ptr<const Codebook> cb, std::size_t rows, Rng& rng);

// Blanks each cell with probability `rate`, never emptying a column.
CategoricalDataset with_mcar(const CategoricalDataset& data, double rate, Rng& rng);

// gender (F, M) x race (A, C, H) with a class fully determined by the cell:
// FA->1, MA->2, FC->3, MC->4, H->5. 40 rows per A/C cell, 80 per H cell.
CategoricalDataset tree_example_fixture();

// Expected leaf membership for tree_example_fixture(): leaf id per row, 0..4.
std::vector<int> tree_example_expected_leaves(const CategoricalDataset& data);

// Two well separated latent classes over four 3-level variables.
SyntheticSpec two_class_spec(std::size_t rows);

// Exact joint table of a mixture spec, mixed radix with the first variable slowest.
std::vector<double> mixture_joint(const SyntheticSpec& spec);

// Dirichlet(1, ..., 1)-multinomial log marginal likelihood of a count vector.
double dirichlet_multinomial_log_marginal(std::span<const double> counts);

// E[V^n1 (1-V)^n2] under V ~ Beta(1, alpha), alpha ~ Gamma(shape, rate), by
// quadrature over alpha. This is the prior probability of one labelled
// assignment with n1 rows in class 1 and n2 in class 2 for K = 2.
double two_class_assignment_probability(int n1, int n2, const AlphaPrior& prior);

// Exact posterior predictive of the single missing cell of an all-binary
// dataset under the K = 2 truncated model, by enumerating all assignments.
std::array<double, 2> exact_two_class_predictive(const CategoricalDataset& data,
                                                 const AlphaPrior& prior);

// Central finite-difference gradient of the penalized log-likelihood.
Eigen::VectorXd numeric_gradient(const LogisticFit& fit, const Eigen::MatrixXd& coefficients,
                                 const Eigen::MatrixXd& design, std::span<const Code> target,
                                 double h = 1e-5);

// Imputer that fills every missing cell with its pre-amputation value.
std::shared_ptr<const Imputer> truth_copy_imputer();

}  // namespace testsupport
