#include <doctest.h>

#include <cmath>

#include "../common/criteria.hpp"
#include "../common/support.hpp"

using namespace catimpute;
using namespace testsupport;

namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = i;
  return r;
}

// Two columns, predictor first. counts[x][y] rows of each combination.
CategoricalDataset from_counts(const std::vector<std::vector<int>>& counts) {
  const int ylevels = static_cast<int>(counts[0].size());
  auto cb = numbered_codebook({static_cast<int>(counts.size()), ylevels});
  std::size_t n = 0;
  for (const auto& row : counts)
    for (int c : row) n += static_cast<std::size_t>(c);
  CategoricalDataset d(cb, n);
  std::size_t i = 0;
  for (std::size_t x = 0; x < counts.size(); ++x)
    for (int y = 0; y < ylevels; ++y)
      for (int k = 0; k < counts[x][static_cast<std::size_t>(y)]; ++k, ++i) {
        d.set(i, 0, static_cast<Code>(x));
        d.set(i, 1, y);
      }
  return d;
}

}  // namespace

TEST_SUITE("glm") {

TEST_CASE("design matrix uses treatment dummies with an intercept") {
  auto cb = numbered_codebook({3, 2, 2});
  CategoricalDataset d(cb, 2);
  d.set(0, 0, 2);
  d.set(1, 2, 1);
  const std::size_t rows[] = {0, 1};
  const auto x = build_design(d, 1, rows);
  REQUIRE(x.cols() == 1 + 2 + 1);
  CHECK(x(0, 0) == 1.0);
  CHECK(x(0, 1) == 0.0);
  CHECK(x(0, 2) == 1.0);
  CHECK(x(0, 3) == 0.0);
  CHECK(x(1, 3) == 1.0);
}

TEST_CASE("binary fit matches the closed-form saturated MLE") {
  // x=1: 30 of 100 successes; x=2: 70 of 140.
  const auto d = from_counts({{70, 30}, {70, 70}});
  const auto design = build_design(d, 1, all_rows(d.rows()));
  const auto fit = fit_multinomial(design, d.column(1), 2);
  CHECK(fit.coefficients(0, 0) == doctest::Approx(std::log(30.0 / 70.0)).epsilon(1e-6));
  CHECK(fit.coefficients(0, 1) == doctest::Approx(std::log(70.0 / 70.0) - std::log(30.0 / 70.0)).epsilon(1e-5));
  // Saturated-model variance of the intercept: 1/30 + 1/70.
  CHECK(fit.covariance(0, 0) == doctest::Approx(1.0 / 30 + 1.0 / 70).epsilon(1e-4));
}

TEST_CASE("multinomial fit matches closed-form log ratios") {
  const auto d = from_counts({{50, 20, 30}, {10, 40, 25}});
  const auto design = build_design(d, 1, all_rows(d.rows()));
  const auto fit = fit_multinomial(design, d.column(1), 3);
  REQUIRE(fit.equations() == 2);
  CHECK(fit.coefficients(0, 0) == doctest::Approx(std::log(20.0 / 50)).epsilon(1e-6));
  CHECK(fit.coefficients(1, 0) == doctest::Approx(std::log(30.0 / 50)).epsilon(1e-6));
  CHECK(fit.coefficients(0, 1) == doctest::Approx(std::log(40.0 / 10) - std::log(20.0 / 50)).epsilon(1e-5));
  CHECK(fit.coefficients(1, 1) == doctest::Approx(std::log(25.0 / 10) - std::log(30.0 / 50)).epsilon(1e-5));
  // objective never decreases
  for (std::size_t t = 1; t < fit.objective_trace.size(); ++t)
    CHECK(fit.objective_trace[t] >= fit.objective_trace[t - 1]);
}

TEST_CASE("analytic gradient agrees with finite differences") {
  Rng rng(12);
  auto cb = numbered_codebook({3, 2, 4});
  const auto d = skewed_dataset(cb, 300, rng);
  const auto design = build_design(d, 2, all_rows(d.rows()));
  const auto fit = fit_multinomial(design, d.column(2), 4);
  Eigen::MatrixXd away = fit.coefficients;
  for (Eigen::Index a = 0; a < away.rows(); ++a)
    for (Eigen::Index b = 0; b < away.cols(); ++b) away(a, b) += 0.3 * draw_standard_normal(rng);
  const auto analytic = penalized_gradient(fit, away, design, d.column(2));
  const auto numeric = numeric_gradient(fit, away, design, d.column(2));
  CHECK((analytic - numeric).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, analytic.cwiseAbs().maxCoeff()));
  CHECK(penalized_gradient(fit, fit.coefficients, design, d.column(2)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("unobserved target levels get no equation and are never drawn") {
  const auto d = from_counts({{10, 0, 15}, {12, 0, 5}});
  const auto design = build_design(d, 1, all_rows(d.rows()));
  const auto fit = fit_multinomial(design, d.column(1), 3);
  CHECK(fit.outcome_levels == std::vector<Code>{0, 2});
  Rng rng(3);
  for (int t = 0; t < 20; ++t)
    for (Code c : draw_and_impute(fit, design, rng)) CHECK(c != 1);

  const auto no_first = from_counts({{0, 10, 15}, {0, 12, 5}});
  const auto fit2 = fit_multinomial(build_design(no_first, 1, all_rows(no_first.rows())), no_first.column(1), 3);
  CHECK(fit2.outcome_levels.front() == 1);
}

TEST_CASE("separated data still yields a finite fit") {
  const auto d = from_counts({{40, 0}, {0, 40}});
  const auto design = build_design(d, 1, all_rows(d.rows()));
  const auto fit = fit_multinomial(design, d.column(1), 2);
  CHECK(fit.coefficients.allFinite());
  CHECK(fit.coefficients(0, 1) > 5.0);
}

TEST_CASE("zero covariance gives the plug-in softmax draw") {
  const auto d = from_counts({{90, 10}, {10, 90}});
  const auto design = build_design(d, 1, all_rows(d.rows()));
  auto fit = fit_multinomial(design, d.column(1), 2);
  fit.coefficients << -50.0, 100.0;
  fit.covariance.setZero();
  Rng rng(4);
  const auto draws = draw_and_impute(fit, design, rng);
  for (std::size_t i = 0; i < draws.size(); ++i) CHECK(draws[i] == d.at(i, 0));
}

TEST_CASE("engine refuses wide targets by name and handles single-level targets") {
  GlmEngine engine;
  auto cb = std::make_shared<const Codebook>(std::vector<Variable>{
      {"PUMA", {"1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "12"}}, {"SEX", {"M", "F"}}});
  Rng rng(5);
  auto d = uniform_dataset(cb, 50, rng);
  const std::vector<std::size_t> fit_rows = {0, 1, 2, 3, 4, 5};
  const std::vector<std::size_t> imp = {10};
  try {
    engine.fit_and_draw(d, 0, fit_rows, imp, rng);
    FAIL("expected EngineUnsupported");
  } catch (const EngineUnsupported& e) {
    CHECK(e.variable() == "PUMA");
    CHECK(std::string(e.what()).find("PUMA") != std::string::npos);
  }
  GlmEngine wide(GlmOptions{.max_levels = 12});
  CHECK_NOTHROW(wide.fit_and_draw(d, 0, all_rows(50), imp, rng));

  for (std::size_t i = 0; i < 50; ++i) d.set(i, 1, 1);
  const auto draws = engine.fit_and_draw(d, 1, fit_rows, imp, rng);
  CHECK(draws == std::vector<Code>{1});
}

TEST_CASE("GLM acceptance fixture with 20 fits") {
  const auto r = check_glm_correctness(20);
  INFO(r.detail);
  CHECK(r.pass);
}

}
