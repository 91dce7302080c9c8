#include "catimpute/amputation.hpp"

namespace catimpute {

namespace {

void check_rate(double r, const std::string& what) {
  if (!(r >= 0.0 && r <= 1.0)) throw ValidationError(what + " must lie in [0, 1]");
}

std::size_t variable_index(const nlohmann::json& v, const Codebook& codebook) {
  if (v.is_string()) {
    auto j = codebook.find(v.get<std::string>());
    if (!j) throw ValidationError("missingness spec names unknown variable '" +
                                  v.get<std::string>() + "'");
    return *j;
  }
  return v.get<std::size_t>();
}

}  // namespace

void MissingnessSpec::validate(const Codebook& codebook) const {
  for (auto j : exempt_variables)
    if (j >= codebook.size())
      throw ValidationError("exempt variable index " + std::to_string(j) + " outside codebook");
  if (const auto* mcar = std::get_if<McarMechanism>(&mechanism)) {
    check_rate(mcar->rate, "MCAR rate");
    return;
  }
  const auto& mar = std::get<MarMechanism>(mechanism);
  if (mar.anchors.empty()) throw ValidationError("MAR mechanism needs at least one anchor");
  for (const auto& a : mar.anchors) {
    if (a.variable >= codebook.size())
      throw ValidationError("MAR anchor index " + std::to_string(a.variable) + " outside codebook");
    const auto& name = codebook.variable(a.variable).name;
    if (!exempt_variables.contains(a.variable))
      throw ValidationError("MAR anchor '" + name + "' must be exempt from missingness");
    if (a.rates.size() != static_cast<std::size_t>(codebook.levels(a.variable)))
      throw ValidationError("MAR anchor '" + name + "' needs one rate per level");
    for (double r : a.rates) check_rate(r, "MAR rate for '" + name + "'");
  }
}

MissingnessSpec MissingnessSpec::from_json(const nlohmann::json& doc, const Codebook& codebook) {
  MissingnessSpec spec;
  try {
    const auto mech = doc.at("mechanism").get<std::string>();
    if (doc.contains("exempt"))
      for (const auto& v : doc.at("exempt")) spec.exempt_variables.insert(variable_index(v, codebook));
    if (mech == "mcar") {
      spec.mechanism = McarMechanism{doc.at("rate").get<double>()};
    } else if (mech == "mar") {
      MarMechanism mar;
      for (const auto& a : doc.at("anchors")) {
        MarAnchor anchor;
        anchor.variable = variable_index(a.at("variable"), codebook);
        anchor.rates = a.at("rates").get<std::vector<double>>();
        spec.exempt_variables.insert(anchor.variable);
        mar.anchors.push_back(std::move(anchor));
      }
      spec.mechanism = std::move(mar);
    } else {
      throw ValidationError("unknown missingness mechanism '" + mech + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed missingness spec: ") + e.what());
  }
  spec.validate(codebook);
  return spec;
}

nlohmann::json MissingnessSpec::to_json(const Codebook& codebook) const {
  nlohmann::json doc;
  nlohmann::json exempt = nlohmann::json::array();
  for (auto j : exempt_variables) exempt.push_back(codebook.variable(j).name);
  if (const auto* mcar = std::get_if<McarMechanism>(&mechanism)) {
    doc["mechanism"] = "mcar";
    doc["rate"] = mcar->rate;
  } else {
    doc["mechanism"] = "mar";
    nlohmann::json anchors = nlohmann::json::array();
    for (const auto& a : std::get<MarMechanism>(mechanism).anchors)
      anchors.push_back({{"variable", codebook.variable(a.variable).name}, {"rates", a.rates}});
    doc["anchors"] = std::move(anchors);
  }
  doc["exempt"] = std::move(exempt);
  return doc;
}

CategoricalDataset ampute(const CategoricalDataset& data, const MissingnessSpec& spec, Rng& rng) {
  spec.validate(data.codebook());
  if (!data.complete()) throw ValidationError("ampute expects a fully observed dataset");
  CategoricalDataset out = data;

  if (const auto* mcar = std::get_if<McarMechanism>(&spec.mechanism)) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      if (spec.exempt_variables.contains(j)) continue;
      for (std::size_t i = 0; i < data.rows(); ++i)
        if (uniform01(rng) < mcar->rate) out.set_missing(i, j, true);
    }
    return out;
  }

  const auto& anchors = std::get<MarMechanism>(spec.mechanism).anchors;
  for (std::size_t j = 0; j < data.cols(); ++j) {
    if (spec.exempt_variables.contains(j)) continue;
    for (std::size_t i = 0; i < data.rows(); ++i) {
      bool fired = false;
      // Every anchor consumes one uniform so the stream layout is fixed.
      for (const auto& a : anchors) {
        const double r = a.rates[static_cast<std::size_t>(data.at(i, a.variable))];
        fired = (uniform01(rng) < r) || fired;
      }
      if (fired) out.set_missing(i, j, true);
    }
  }
  return out;
}

}  // namespace catimpute
