#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "catimpute/error.hpp"

namespace catimpute {

// Zero-based index into a variable's level list. Labels are the external
// contract; codes are an in-memory detail.
using Code = std::int32_t;

struct Variable {
  std::string name;
  std::vector<std::string> levels;

  bool operator==(const Variable&) const = default;
};

class Codebook {
 public:
  Codebook() = default;
  explicit Codebook(std::vector<Variable> variables, std::string na_token = "NA");

  static Codebook from_json(const nlohmann::json& doc);
  static Codebook load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  std::size_t size() const noexcept { return variables_.size(); }
  const Variable& variable(std::size_t j) const { return variables_.at(j); }
  std::span<const Variable> variables() const noexcept { return variables_; }
  int levels(std::size_t j) const { return static_cast<int>(variables_[j].levels.size()); }
  const std::string& na_token() const noexcept { return na_token_; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::optional<Code> find_level(std::size_t j, std::string_view label) const;

  bool operator==(const Codebook&) const = default;

 private:
  std::vector<Variable> variables_;
  std::string na_token_ = "NA";
};

// n x p matrix of level codes plus a missingness mask, stored column-major.
// Missing cells still hold a valid code: either a placeholder (0) or the
// current imputation while an engine is working on the data.
class CategoricalDataset {
 public:
  CategoricalDataset(std::shared_ptr<const Codebook> codebook, std::size_t rows);

  const Codebook& codebook() const noexcept { return *codebook_; }
  const std::shared_ptr<const Codebook>& codebook_ptr() const noexcept { return codebook_; }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return codebook_->size(); }
  int levels(std::size_t j) const { return codebook_->levels(j); }

  Code at(std::size_t i, std::size_t j) const noexcept { return cells_[j * rows_ + i]; }
  void set(std::size_t i, std::size_t j, Code code);

  bool missing(std::size_t i, std::size_t j) const noexcept { return mask_[j * rows_ + i] != 0; }
  void set_missing(std::size_t i, std::size_t j, bool is_missing);

  std::span<const Code> column(std::size_t j) const noexcept {
    return {cells_.data() + j * rows_, rows_};
  }
  std::span<Code> column(std::size_t j) noexcept { return {cells_.data() + j * rows_, rows_}; }

  std::size_t missing_count() const noexcept { return missing_total_; }
  std::size_t missing_count(std::size_t j) const;
  bool complete() const noexcept { return missing_total_ == 0; }

  // Row indices with an observed / missing value in column j, ascending.
  std::vector<std::size_t> observed_rows(std::size_t j) const;
  std::vector<std::size_t> missing_rows(std::size_t j) const;

  // Copy with the mask cleared; missing cells keep whatever code they hold.
  CategoricalDataset completed() const;
  CategoricalDataset select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const CategoricalDataset& other) const;

 private:
  std::shared_ptr<const Codebook> codebook_;
  std::size_t rows_ = 0;
  std::vector<Code> cells_;
  std::vector<std::uint8_t> mask_;
  std::size_t missing_total_ = 0;
};

// ---------------------------------------------------------------------------
// CSV

CategoricalDataset read_csv(std::istream& in, std::shared_ptr<const Codebook> codebook);
CategoricalDataset load_csv(const std::filesystem::path& path,
                            std::shared_ptr<const Codebook> codebook);
void write_csv(const CategoricalDataset& data, std::ostream& out);
void write_csv(const CategoricalDataset& data, const std::filesystem::path& path);

// Splits one CSV record; handles quoted fields with doubled quotes.
std::vector<std::string> split_csv_record(std::string_view line);

// ---------------------------------------------------------------------------
// Estimands

enum class EstimandKind { marginal = 1, bivariate = 2, trivariate = 3 };

std::string_view to_string(EstimandKind kind);

struct EstimandCell {
  std::size_t variable;
  Code level;

  bool operator==(const EstimandCell&) const = default;
};

struct Estimand {
  std::vector<EstimandCell> cells;
  double population_value = 0.0;

  EstimandKind kind() const { return static_cast<EstimandKind>(cells.size()); }
  std::string describe(const Codebook& codebook) const;
};

struct PointEstimate {
  double q = 0.0;
  double u = 0.0;
};

// Every cell probability of order 1..max_order whose population proportion p
// satisfies n_sample * p > 10 and n_sample * (1 - p) > 10.
std::vector<Estimand> enumerate_estimands(const CategoricalDataset& population,
                                          std::size_t n_sample, int max_order);

// Number of cells of each order before the normality filter is applied.
std::size_t count_candidate_cells(const Codebook& codebook, int order);

bool passes_normality_filter(double p, std::size_t n_sample);

// Sample proportion of rows matching all cells, with variance q(1-q)/n.
PointEstimate estimate(const CategoricalDataset& completed, const Estimand& e);

// Same as calling estimate() for each estimand.
std::vector<PointEstimate> estimate_all(const CategoricalDataset& completed,
                                        std::span<const Estimand> estimands);

}  // namespace catimpute
