#include "catimpute/glm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace catimpute {

namespace {

// Position of each target code within outcome_levels, -1 if absent.
std::vector<int> outcome_index(const std::vector<Code>& outcome_levels, int target_levels) {
  std::vector<int> idx(static_cast<std::size_t>(target_levels), -1);
  for (std::size_t c = 0; c < outcome_levels.size(); ++c)
    idx[static_cast<std::size_t>(outcome_levels[c])] = static_cast<int>(c);
  return idx;
}

// Per-row softmax including the reference column 0 (linear predictor 0).
// Returns the log normalizer of each row through `log_norm`.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& eta, Eigen::VectorXd* log_norm) {
  const Eigen::Index n = eta.rows();
  const Eigen::Index eqs = eta.cols();
  Eigen::MatrixXd prob(n, eqs + 1);
  if (log_norm) log_norm->resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double top = 0.0;
    for (Eigen::Index c = 0; c < eqs; ++c) top = std::max(top, eta(i, c));
    double sum = std::exp(-top);
    prob(i, 0) = sum;
    for (Eigen::Index c = 0; c < eqs; ++c) {
      const double e = std::exp(eta(i, c) - top);
      prob(i, c + 1) = e;
      sum += e;
    }
    prob.row(i) /= sum;
    if (log_norm) (*log_norm)(i) = top + std::log(sum);
  }
  return prob;
}

double ridge_penalty(const Eigen::MatrixXd& coef, double ridge) {
  if (coef.cols() <= 1) return 0.0;
  return 0.5 * ridge * coef.rightCols(coef.cols() - 1).squaredNorm();
}

struct Evaluation {
  double objective;
  Eigen::MatrixXd prob;  // n x outcomes
};

Evaluation evaluate(const Eigen::MatrixXd& coef, const Eigen::MatrixXd& design,
                    std::span<const int> y, double ridge) {
  const Eigen::MatrixXd eta = design * coef.transpose();
  Eigen::VectorXd log_norm;
  Evaluation ev{0.0, softmax_rows(eta, &log_norm)};
  double ll = 0.0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    const int yi = y[static_cast<std::size_t>(i)];
    ll += (yi > 0 ? eta(i, yi - 1) : 0.0) - log_norm(i);
  }
  ev.objective = ll - ridge_penalty(coef, ridge);
  return ev;
}

Eigen::VectorXd gradient_from(const Eigen::MatrixXd& coef, const Eigen::MatrixXd& design,
                              std::span<const int> y, const Eigen::MatrixXd& prob, double ridge) {
  const Eigen::Index eqs = coef.rows();
  const Eigen::Index cols = coef.cols();
  Eigen::MatrixXd resid = -prob.rightCols(eqs);
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    const int yi = y[static_cast<std::size_t>(i)];
    if (yi > 0) resid(i, yi - 1) += 1.0;
  }
  Eigen::MatrixXd g = resid.transpose() * design;  // eqs x cols
  g.rightCols(cols - 1) -= ridge * coef.rightCols(cols - 1);
  Eigen::VectorXd flat(eqs * cols);
  for (Eigen::Index c = 0; c < eqs; ++c) flat.segment(c * cols, cols) = g.row(c).transpose();
  return flat;
}

// Penalized observed information (negative Hessian of the objective).
Eigen::MatrixXd information(const Eigen::MatrixXd& design, const Eigen::MatrixXd& prob,
                            Eigen::Index eqs, double ridge) {
  const Eigen::Index cols = design.cols();
  Eigen::MatrixXd info(eqs * cols, eqs * cols);
  for (Eigen::Index c = 0; c < eqs; ++c) {
    for (Eigen::Index d = c; d < eqs; ++d) {
      Eigen::VectorXd w = -prob.col(c + 1).cwiseProduct(prob.col(d + 1));
      if (c == d) w += prob.col(c + 1);
      const Eigen::MatrixXd block =
          (design.array().colwise() * w.array()).matrix().transpose() * design;
      info.block(c * cols, d * cols, cols, cols) = block;
      if (c != d) info.block(d * cols, c * cols, cols, cols) = block.transpose();
    }
  }
  for (Eigen::Index c = 0; c < eqs; ++c)
    for (Eigen::Index p = 1; p < cols; ++p) info(c * cols + p, c * cols + p) += ridge;
  return info;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& flat, Eigen::Index eqs, Eigen::Index cols) {
  Eigen::MatrixXd m(eqs, cols);
  for (Eigen::Index c = 0; c < eqs; ++c) m.row(c) = flat.segment(c * cols, cols).transpose();
  return m;
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  return a.completeOrthogonalDecomposition().solve(b);
}

Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  Eigen::MatrixXd inv = llt.info() == Eigen::Success
                            ? Eigen::MatrixXd(llt.solve(eye))
                            : Eigen::MatrixXd(a.completeOrthogonalDecomposition().pseudoInverse());
  return 0.5 * (inv + inv.transpose());
}

std::vector<int> encode_target(const LogisticFit& fit, std::span<const Code> target) {
  const auto idx = outcome_index(fit.outcome_levels, fit.target_levels);
  std::vector<int> y(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const int k = idx.at(static_cast<std::size_t>(target[i]));
    if (k < 0) throw ValidationError("target value outside the fitted outcome levels");
    y[i] = k;
  }
  return y;
}

}  // namespace

Eigen::MatrixXd build_design(const CategoricalDataset& data, std::size_t target,
                             std::span<const std::size_t> rows) {
  Eigen::Index cols = 1;
  for (std::size_t j = 0; j < data.cols(); ++j)
    if (j != target) cols += data.levels(j) - 1;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), cols);
  x.col(0).setOnes();
  Eigen::Index offset = 1;
  for (std::size_t j = 0; j < data.cols(); ++j) {
    if (j == target) continue;
    const auto column = data.column(j);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Code c = column[rows[r]];
      if (c > 0) x(static_cast<Eigen::Index>(r), offset + c - 1) = 1.0;
    }
    offset += data.levels(j) - 1;
  }
  return x;
}

LogisticFit fit_multinomial(const Eigen::MatrixXd& design, std::span<const Code> target,
                            int target_levels, const GlmOptions& options,
                            std::string_view target_name) {
  if (target_levels > options.max_levels) {
    std::ostringstream msg;
    msg << "multinomial logit for '" << target_name << "' has " << target_levels
        << " levels, more than the supported " << options.max_levels;
    throw EngineUnsupported(std::string(target_name), msg.str());
  }
  if (static_cast<std::size_t>(design.rows()) != target.size())
    throw ValidationError("design rows and target length differ");

  LogisticFit fit;
  fit.target_levels = target_levels;
  fit.ridge = options.ridge;
  std::vector<bool> present(static_cast<std::size_t>(target_levels), false);
  for (Code c : target) present.at(static_cast<std::size_t>(c)) = true;
  for (int k = 0; k < target_levels; ++k)
    if (present[static_cast<std::size_t>(k)]) fit.outcome_levels.push_back(k);
  if (fit.outcome_levels.size() < 2)
    throw ValidationError("target '" + std::string(target_name) +
                          "' needs at least two observed levels to fit");

  const auto y = encode_target(fit, target);
  const Eigen::Index eqs = static_cast<Eigen::Index>(fit.outcome_levels.size()) - 1;
  const Eigen::Index cols = design.cols();

  Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(eqs, cols);
  Evaluation ev = evaluate(coef, design, y, options.ridge);
  fit.objective_trace.push_back(ev.objective);

  bool converged = false;
  int iter = 0;
  while (iter < options.max_iterations) {
    ++iter;
    const Eigen::VectorXd grad = gradient_from(coef, design, y, ev.prob, options.ridge);
    const Eigen::MatrixXd info = information(design, ev.prob, eqs, options.ridge);
    const Eigen::MatrixXd step = unflatten(solve_spd(info, grad), eqs, cols);

    double scale = 1.0;
    Eigen::MatrixXd trial = coef + step;
    Evaluation trial_ev = evaluate(trial, design, y, options.ridge);
    int halvings = 0;
    while (!(trial_ev.objective >= ev.objective) && halvings < options.max_halvings) {
      scale *= 0.5;
      ++halvings;
      trial = coef + scale * step;
      trial_ev = evaluate(trial, design, y, options.ridge);
    }
    if (!(trial_ev.objective >= ev.objective)) {
      // No ascent direction left at working precision.
      converged = true;
      break;
    }
    const double change = (scale * step).cwiseAbs().maxCoeff();
    coef = std::move(trial);
    ev = std::move(trial_ev);
    fit.objective_trace.push_back(ev.objective);
    if (change < options.tolerance) {
      converged = true;
      break;
    }
  }
  fit.iterations = iter;
  if (!converged) {
    std::ostringstream msg;
    msg << "multinomial logit for '" << target_name << "' did not converge in "
        << options.max_iterations << " iterations";
    throw ConvergenceError(msg.str(), fit.objective_trace);
  }

  fit.coefficients = std::move(coef);
  fit.covariance = invert_spd(information(design, ev.prob, eqs, options.ridge));
  return fit;
}

Eigen::MatrixXd class_probabilities(const Eigen::MatrixXd& coefficients,
                                    const Eigen::MatrixXd& design) {
  return softmax_rows(design * coefficients.transpose(), nullptr);
}

double penalized_log_likelihood(const LogisticFit& fit, const Eigen::MatrixXd& coefficients,
                                const Eigen::MatrixXd& design, std::span<const Code> target) {
  return evaluate(coefficients, design, encode_target(fit, target), fit.ridge).objective;
}

Eigen::VectorXd penalized_gradient(const LogisticFit& fit, const Eigen::MatrixXd& coefficients,
                                   const Eigen::MatrixXd& design, std::span<const Code> target) {
  const auto y = encode_target(fit, target);
  const auto ev = evaluate(coefficients, design, y, fit.ridge);
  return gradient_from(coefficients, design, y, ev.prob, fit.ridge);
}

std::vector<Code> draw_and_impute(const LogisticFit& fit, const Eigen::MatrixXd& design, Rng& rng) {
  const Eigen::Index eqs = fit.equations();
  const Eigen::Index cols = fit.columns();
  const Eigen::Index dim = eqs * cols;

  Eigen::VectorXd z(dim);
  for (Eigen::Index k = 0; k < dim; ++k) z(k) = draw_standard_normal(rng);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.covariance);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::VectorXd delta = eig.eigenvectors() * root.cwiseProduct(z);
  const Eigen::MatrixXd coef = fit.coefficients + unflatten(delta, eqs, cols);

  const Eigen::MatrixXd prob = class_probabilities(coef, design);
  std::vector<Code> out(static_cast<std::size_t>(design.rows()));
  std::vector<double> row(static_cast<std::size_t>(prob.cols()));
  for (Eigen::Index i = 0; i < prob.rows(); ++i) {
    for (Eigen::Index c = 0; c < prob.cols(); ++c) row[static_cast<std::size_t>(c)] = prob(i, c);
    out[static_cast<std::size_t>(i)] = fit.outcome_levels[draw_categorical(row, rng)];
  }
  return out;
}

std::vector<Code> GlmEngine::fit_and_draw(const CategoricalDataset& work, std::size_t target,
                                          std::span<const std::size_t> fit_rows,
                                          std::span<const std::size_t> impute_rows,
                                          Rng& rng) const {
  const auto& name = work.codebook().variable(target).name;
  const int levels = work.levels(target);
  if (levels > options_.max_levels) {
    std::ostringstream msg;
    msg << "GLM engine cannot model '" << name << "': " << levels
        << " levels exceeds max_levels " << options_.max_levels;
    throw EngineUnsupported(name, msg.str());
  }
  if (impute_rows.empty()) return {};
  if (fit_rows.empty()) throw EngineError("no observed rows to fit '" + name + "'");

  const auto column = work.column(target);
  std::vector<Code> y(fit_rows.size());
  for (std::size_t r = 0; r < fit_rows.size(); ++r) y[r] = column[fit_rows[r]];
  if (std::all_of(y.begin(), y.end(), [&](Code c) { return c == y.front(); }))
    return std::vector<Code>(impute_rows.size(), y.front());

  const LogisticFit fit =
      fit_multinomial(build_design(work, target, fit_rows), y, levels, options_, name);
  return draw_and_impute(fit, build_design(work, target, impute_rows), rng);
}

}  // namespace catimpute
