#pragma once

#include <set>
#include <variant>
#include <vector>

#include "catimpute/data.hpp"
#include "catimpute/rng.hpp"

namespace catimpute {

struct McarMechanism {
  double rate = 0.0;
};

// One fully observed anchor variable; rates[level] is the probability that a
// non-exempt cell in a row with that anchor level is blanked.
struct MarAnchor {
  std::size_t variable = 0;
  std::vector<double> rates;
};

// Each anchor fires independently per cell; the cell is missing if any fires.
struct MarMechanism {
  std::vector<MarAnchor> anchors;
};

struct MissingnessSpec {
  std::variant<McarMechanism, MarMechanism> mechanism;
  std::set<std::size_t> exempt_variables;

  // Throws ValidationError if the spec does not fit the codebook.
  void validate(const Codebook& codebook) const;

  static MissingnessSpec from_json(const nlohmann::json& doc, const Codebook& codebook);
  nlohmann::json to_json(const Codebook& codebook) const;
};

// Blanks cells of a fully observed dataset. Only the mask changes.
CategoricalDataset ampute(const CategoricalDataset& data, const MissingnessSpec& spec, Rng& rng);

}  // namespace catimpute
