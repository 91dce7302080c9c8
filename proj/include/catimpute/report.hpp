#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "catimpute/simulator.hpp"

namespace catimpute {

// Linear-interpolation sample quantile (R type 7). `values` need not be sorted.
double quantile_type7(std::vector<double> values, double prob);

struct QuantileSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::size_t count = 0;  // finite Rel.MSE values summarized
};

struct OrderSummary {
  std::optional<QuantileSummary> rel_mse;  // empty when no finite values
  double median_coverage = 0.0;
  std::size_t estimands = 0;
};

// Baseline is keyed "pre-missing"; engines by name.
struct ReportSummary {
  std::vector<std::string> columns;  // baseline first, then engines in run order
  std::map<int, std::map<std::string, OrderSummary>> by_order;
};

inline const std::string kBaselineColumn = "pre-missing";

ReportSummary summarize(const SimulationReport& report);

nlohmann::json report_to_json(const SimulationReport& report);
SimulationReport report_from_json(const nlohmann::json& doc);

// Serialized with a fixed layout so equal reports give equal bytes.
std::string report_json_string(const SimulationReport& report);

void write_report_text(const SimulationReport& report, std::ostream& out);
void write_report_csv(const SimulationReport& report, std::ostream& out);

}  // namespace catimpute
