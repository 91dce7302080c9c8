#include "catimpute/data.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace catimpute {

Codebook::Codebook(std::vector<Variable> variables, std::string na_token)
    : variables_(std::move(variables)), na_token_(std::move(na_token)) {
  if (variables_.empty()) throw ValidationError("codebook declares no variables");
  std::set<std::string_view> names;
  for (const auto& v : variables_) {
    if (v.name.empty()) throw ValidationError("codebook has a variable with an empty name");
    if (!names.insert(v.name).second)
      throw ValidationError("duplicate variable name '" + v.name + "' in codebook");
    if (v.levels.size() < 2)
      throw ValidationError("variable '" + v.name + "' must declare at least two levels");
    std::set<std::string_view> labels;
    for (const auto& label : v.levels) {
      if (!labels.insert(label).second)
        throw ValidationError("variable '" + v.name + "' repeats level '" + label + "'");
      if (label == na_token_)
        throw ValidationError("variable '" + v.name + "' uses the missing-value token '" +
                              na_token_ + "' as a level");
    }
  }
}

Codebook Codebook::from_json(const nlohmann::json& doc) {
  try {
    std::string na = doc.value("na_token", std::string("NA"));
    std::vector<Variable> vars;
    for (const auto& v : doc.at("variables")) {
      Variable var;
      var.name = v.at("name").get<std::string>();
      var.levels = v.at("levels").get<std::vector<std::string>>();
      vars.push_back(std::move(var));
    }
    return Codebook(std::move(vars), std::move(na));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed codebook: ") + e.what());
  }
}

Codebook Codebook::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open codebook " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("codebook " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

nlohmann::json Codebook::to_json() const {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : variables_) vars.push_back({{"name", v.name}, {"levels", v.levels}});
  return {{"na_token", na_token_}, {"variables", std::move(vars)}};
}

std::optional<std::size_t> Codebook::find(std::string_view name) const {
  for (std::size_t j = 0; j < variables_.size(); ++j)
    if (variables_[j].name == name) return j;
  return std::nullopt;
}

std::optional<Code> Codebook::find_level(std::size_t j, std::string_view label) const {
  const auto& levels = variables_.at(j).levels;
  for (std::size_t k = 0; k < levels.size(); ++k)
    if (levels[k] == label) return static_cast<Code>(k);
  return std::nullopt;
}

// ---------------------------------------------------------------------------

CategoricalDataset::CategoricalDataset(std::shared_ptr<const Codebook> codebook, std::size_t rows)
    : codebook_(std::move(codebook)), rows_(rows) {
  if (!codebook_) throw ValidationError("dataset requires a codebook");
  if (rows_ == 0) throw ValidationError("dataset must have at least one row");
  cells_.assign(rows_ * codebook_->size(), 0);
  mask_.assign(rows_ * codebook_->size(), 0);
}

void CategoricalDataset::set(std::size_t i, std::size_t j, Code code) {
  if (code < 0 || code >= levels(j))
    throw ValidationError("code " + std::to_string(code) + " out of range for variable '" +
                          codebook_->variable(j).name + "'");
  cells_[j * rows_ + i] = code;
}

void CategoricalDataset::set_missing(std::size_t i, std::size_t j, bool is_missing) {
  auto& m = mask_[j * rows_ + i];
  if (m && !is_missing) --missing_total_;
  if (!m && is_missing) ++missing_total_;
  m = is_missing ? 1 : 0;
}

std::size_t CategoricalDataset::missing_count(std::size_t j) const {
  auto first = mask_.begin() + static_cast<std::ptrdiff_t>(j * rows_);
  return static_cast<std::size_t>(std::count(first, first + static_cast<std::ptrdiff_t>(rows_), 1));
}

std::vector<std::size_t> CategoricalDataset::observed_rows(std::size_t j) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows_; ++i)
    if (!missing(i, j)) out.push_back(i);
  return out;
}

std::vector<std::size_t> CategoricalDataset::missing_rows(std::size_t j) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows_; ++i)
    if (missing(i, j)) out.push_back(i);
  return out;
}

CategoricalDataset CategoricalDataset::completed() const {
  CategoricalDataset out(*this);
  std::fill(out.mask_.begin(), out.mask_.end(), 0);
  out.missing_total_ = 0;
  return out;
}

CategoricalDataset CategoricalDataset::select_rows(std::span<const std::size_t> rows) const {
  CategoricalDataset out(codebook_, rows.size());
  for (std::size_t j = 0; j < cols(); ++j) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.cells_[j * out.rows_ + r] = at(rows[r], j);
      if (missing(rows[r], j)) out.set_missing(r, j, true);
    }
  }
  return out;
}

bool CategoricalDataset::operator==(const CategoricalDataset& other) const {
  return rows_ == other.rows_ && *codebook_ == *other.codebook_ && cells_ == other.cells_ &&
         mask_ == other.mask_;
}

// ---------------------------------------------------------------------------

std::string_view to_string(EstimandKind kind) {
  switch (kind) {
    case EstimandKind::marginal: return "marginal";
    case EstimandKind::bivariate: return "bivariate";
    case EstimandKind::trivariate: return "trivariate";
  }
  return "unknown";
}

std::string Estimand::describe(const Codebook& codebook) const {
  std::string out;
  for (const auto& c : cells) {
    if (!out.empty()) out += ", ";
    const auto& var = codebook.variable(c.variable);
    out += var.name + "=" + var.levels.at(static_cast<std::size_t>(c.level));
  }
  return out;
}

bool passes_normality_filter(double p, std::size_t n_sample) {
  const double n = static_cast<double>(n_sample);
  const double np = n * p;
  return np > 10.0 && n - np > 10.0;
}

namespace {

// All strictly increasing index tuples of length `order` over [0, p).
std::vector<std::vector<std::size_t>> combinations(std::size_t p, int order) {
  std::vector<std::vector<std::size_t>> out;
  if (order < 1 || static_cast<std::size_t>(order) > p) return out;
  std::vector<std::size_t> idx(static_cast<std::size_t>(order));
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  while (true) {
    out.push_back(idx);
    int k = order - 1;
    while (k >= 0 && idx[static_cast<std::size_t>(k)] == p - static_cast<std::size_t>(order) +
                                                                static_cast<std::size_t>(k))
      --k;
    if (k < 0) break;
    ++idx[static_cast<std::size_t>(k)];
    for (auto m = static_cast<std::size_t>(k) + 1; m < idx.size(); ++m) idx[m] = idx[m - 1] + 1;
  }
  return out;
}

// Joint counts over the listed variables, indexed in mixed radix with the
// first variable varying slowest.
std::vector<std::size_t> contingency_table(const CategoricalDataset& data,
                                           std::span<const std::size_t> vars) {
  std::size_t cells = 1;
  for (auto v : vars) cells *= static_cast<std::size_t>(data.levels(v));
  std::vector<std::size_t> counts(cells, 0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    std::size_t key = 0;
    for (auto v : vars) key = key * static_cast<std::size_t>(data.levels(v)) +
                              static_cast<std::size_t>(data.at(i, v));
    ++counts[key];
  }
  return counts;
}

}  // namespace

std::size_t count_candidate_cells(const Codebook& codebook, int order) {
  std::size_t total = 0;
  for (const auto& combo : combinations(codebook.size(), order)) {
    std::size_t cells = 1;
    for (auto v : combo) cells *= static_cast<std::size_t>(codebook.levels(v));
    total += cells;
  }
  return total;
}

std::vector<Estimand> enumerate_estimands(const CategoricalDataset& population,
                                          std::size_t n_sample, int max_order) {
  if (max_order < 1 || max_order > 3)
    throw ValidationError("estimand order must be between 1 and 3");
  if (!population.complete()) throw ValidationError("population must be fully observed");

  std::vector<Estimand> out;
  const double n_pop = static_cast<double>(population.rows());
  for (int order = 1; order <= max_order; ++order) {
    for (const auto& vars : combinations(population.cols(), order)) {
      const auto counts = contingency_table(population, vars);
      for (std::size_t key = 0; key < counts.size(); ++key) {
        const double p = static_cast<double>(counts[key]) / n_pop;
        if (!passes_normality_filter(p, n_sample)) continue;
        Estimand e;
        e.population_value = p;
        e.cells.resize(vars.size());
        std::size_t rest = key;
        for (std::size_t m = vars.size(); m-- > 0;) {
          const auto d = static_cast<std::size_t>(population.levels(vars[m]));
          e.cells[m] = {vars[m], static_cast<Code>(rest % d)};
          rest /= d;
        }
        out.push_back(std::move(e));
      }
    }
  }
  return out;
}

PointEstimate estimate(const CategoricalDataset& completed, const Estimand& e) {
  if (!completed.complete()) throw ValidationError("estimate requires a completed dataset");
  std::size_t matches = 0;
  for (std::size_t i = 0; i < completed.rows(); ++i) {
    bool hit = true;
    for (const auto& c : e.cells) {
      if (completed.at(i, c.variable) != c.level) {
        hit = false;
        break;
      }
    }
    matches += hit ? 1 : 0;
  }
  const double n = static_cast<double>(completed.rows());
  const double q = static_cast<double>(matches) / n;
  return {q, q * (1.0 - q) / n};
}

std::vector<PointEstimate> estimate_all(const CategoricalDataset& completed,
                                        std::span<const Estimand> estimands) {
  if (!completed.complete()) throw ValidationError("estimate requires a completed dataset");
  std::map<std::vector<std::size_t>, std::vector<std::size_t>> tables;
  std::vector<PointEstimate> out;
  out.reserve(estimands.size());
  const double n = static_cast<double>(completed.rows());
  std::vector<std::size_t> vars;
  for (const auto& e : estimands) {
    vars.clear();
    for (const auto& c : e.cells) vars.push_back(c.variable);
    auto it = tables.find(vars);
    if (it == tables.end()) it = tables.emplace(vars, contingency_table(completed, vars)).first;
    std::size_t key = 0;
    for (const auto& c : e.cells)
      key = key * static_cast<std::size_t>(completed.levels(c.variable)) +
            static_cast<std::size_t>(c.level);
    const double q = static_cast<double>(it->second[key]) / n;
    out.push_back({q, q * (1.0 - q) / n});
  }
  return out;
}

}  // namespace catimpute
