#include "catimpute/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace catimpute {

namespace {

const char* const kStatLabels[] = {"Min.", "1st Qu.", "Median", "3rd Qu.", "Max."};

double stat(const QuantileSummary& q, int i) {
  switch (i) {
    case 0: return q.min;
    case 1: return q.q1;
    case 2: return q.median;
    case 3: return q.q3;
    default: return q.max;
  }
}

std::string order_title(int order) {
  std::string s(to_string(static_cast<EstimandKind>(order)));
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string column_title(const std::string& name) {
  if (name == kBaselineColumn) return "NO";
  std::string s = name;
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

nlohmann::json number(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

double number_from(const nlohmann::json& j) {
  return j.is_null() ? std::nan("") : j.get<double>();
}

nlohmann::json metrics_to_json(const EngineMetrics& m) {
  return {{"coverage", number(m.coverage)},
          {"rel_mse", number(m.rel_mse)},
          {"replications", m.replications}};
}

EngineMetrics metrics_from_json(const nlohmann::json& j) {
  EngineMetrics m;
  m.coverage = number_from(j.at("coverage"));
  m.rel_mse = number_from(j.at("rel_mse"));
  m.replications = j.at("replications").get<std::size_t>();
  return m;
}

std::string fixed(double x, int digits = 3) {
  if (!std::isfinite(x)) return "NA";
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

}  // namespace

double quantile_type7(std::vector<double> values, double prob) {
  if (values.empty()) throw ValidationError("quantile of an empty set");
  if (!(prob >= 0.0 && prob <= 1.0)) throw ValidationError("quantile probability must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ReportSummary summarize(const SimulationReport& report) {
  ReportSummary out;
  out.columns.push_back(kBaselineColumn);
  out.columns.insert(out.columns.end(), report.engines.begin(), report.engines.end());

  std::map<int, std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>> values;
  for (const auto& rec : report.estimands) {
    const int order = static_cast<int>(rec.estimand.cells.size());
    auto add = [&](const std::string& col, const EngineMetrics& m) {
      auto& [rel, cov] = values[order][col];
      if (std::isfinite(m.rel_mse)) rel.push_back(m.rel_mse);
      if (std::isfinite(m.coverage)) cov.push_back(m.coverage);
    };
    add(kBaselineColumn, rec.baseline);
    for (const auto& e : report.engines) {
      auto it = rec.engines.find(e);
      if (it != rec.engines.end()) add(e, it->second);
    }
  }

  for (auto& [order, cols] : values) {
    for (const auto& col : out.columns) {
      auto& [rel, cov] = cols[col];
      OrderSummary s;
      s.estimands = std::max(rel.size(), cov.size());
      if (!rel.empty()) {
        QuantileSummary q;
        q.min = *std::min_element(rel.begin(), rel.end());
        q.q1 = quantile_type7(rel, 0.25);
        q.median = quantile_type7(rel, 0.5);
        q.q3 = quantile_type7(rel, 0.75);
        q.max = *std::max_element(rel.begin(), rel.end());
        q.count = rel.size();
        s.rel_mse = q;
      }
      s.median_coverage = cov.empty() ? std::nan("") : quantile_type7(cov, 0.5);
      out.by_order[order][col] = s;
    }
  }
  return out;
}

nlohmann::json report_to_json(const SimulationReport& report) {
  const auto& cb = *report.codebook;
  nlohmann::json estimands = nlohmann::json::array();
  for (const auto& rec : report.estimands) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : rec.estimand.cells)
      cells.push_back({{"variable", cb.variable(c.variable).name},
                       {"level", cb.variable(c.variable).levels[static_cast<std::size_t>(c.level)]}});
    nlohmann::json engines = nlohmann::json::object();
    for (const auto& [name, m] : rec.engines) engines[name] = metrics_to_json(m);
    estimands.push_back({{"order", rec.estimand.cells.size()},
                         {"cells", std::move(cells)},
                         {"population_value", rec.estimand.population_value},
                         {"baseline", metrics_to_json(rec.baseline)},
                         {"engines", std::move(engines)}});
  }
  nlohmann::json stats = nlohmann::json::object();
  for (const auto& [name, s] : report.engine_stats) {
    stats[name] = {{"failures", s.failures},
                   {"first_failure", s.first_failure},
                   {"degenerate_b", s.degenerate_b},
                   {"boundary_intervals", s.boundary_intervals},
                   {"warnings", s.warnings}};
  }
  return {{"codebook", cb.to_json()},
          {"engines", report.engines},
          {"replications", report.replications},
          {"n_sample", report.n_sample},
          {"population_rows", report.population_rows},
          {"config", report.config},
          {"engine_stats", std::move(stats)},
          {"estimands", std::move(estimands)}};
}

SimulationReport report_from_json(const nlohmann::json& doc) {
  SimulationReport r;
  try {
    r.codebook = std::make_shared<const Codebook>(Codebook::from_json(doc.at("codebook")));
    const auto& cb = *r.codebook;
    r.engines = doc.at("engines").get<std::vector<std::string>>();
    r.replications = doc.at("replications").get<int>();
    r.n_sample = doc.at("n_sample").get<std::size_t>();
    r.population_rows = doc.at("population_rows").get<std::size_t>();
    r.config = doc.value("config", nlohmann::json::object());
    for (const auto& [name, s] : doc.at("engine_stats").items()) {
      EngineRunStats st;
      st.failures = s.at("failures").get<std::size_t>();
      st.first_failure = s.at("first_failure").get<std::string>();
      st.degenerate_b = s.at("degenerate_b").get<std::size_t>();
      st.boundary_intervals = s.at("boundary_intervals").get<std::size_t>();
      st.warnings = s.at("warnings").get<std::map<std::string, std::size_t>>();
      r.engine_stats[name] = std::move(st);
    }
    for (const auto& e : doc.at("estimands")) {
      EstimandRecord rec;
      for (const auto& c : e.at("cells")) {
        const auto name = c.at("variable").get<std::string>();
        const auto j = cb.find(name);
        if (!j) throw ValidationError("report names unknown variable '" + name + "'");
        const auto label = c.at("level").get<std::string>();
        const auto y = cb.find_level(*j, label);
        if (!y) throw ValidationError("report names unknown level '" + label + "' of '" + name + "'");
        rec.estimand.cells.push_back({*j, *y});
      }
      if (rec.estimand.cells.empty() || rec.estimand.cells.size() > 3)
        throw ValidationError("report estimand must have one to three cells");
      rec.estimand.population_value = e.at("population_value").get<double>();
      rec.baseline = metrics_from_json(e.at("baseline"));
      for (const auto& [name, m] : e.at("engines").items()) rec.engines[name] = metrics_from_json(m);
      r.estimands.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string report_json_string(const SimulationReport& report) {
  return report_to_json(report).dump(2) + "\n";
}

void write_report_text(const SimulationReport& report, std::ostream& out) {
  const auto summary = summarize(report);
  const int width = 9;
  const int label_width = 10;

  out << "Relative MSE by estimand order (" << report.replications << " replications, n = "
      << report.n_sample << ")\n\n";
  std::vector<int> orders;
  for (const auto& [order, cols] : summary.by_order) orders.push_back(order);
  const auto& engines = report.engines;

  out << std::setw(label_width) << "";
  for (int order : orders) {
    const auto span = static_cast<int>(engines.size()) * width;
    std::string title = order_title(order);
    const int pad = std::max(0, (span - static_cast<int>(title.size())) / 2);
    out << std::string(static_cast<std::size_t>(pad), ' ') << title
        << std::string(static_cast<std::size_t>(std::max(0, span - pad - static_cast<int>(title.size()))), ' ');
  }
  out << '\n' << std::setw(label_width) << std::left << "" << std::right;
  for (std::size_t o = 0; o < orders.size(); ++o)
    for (const auto& e : engines) out << std::setw(width) << column_title(e);
  out << '\n';
  for (int i = 0; i < 5; ++i) {
    out << std::setw(label_width) << std::left << kStatLabels[i] << std::right;
    for (int order : orders) {
      for (const auto& e : engines) {
        const auto& s = summary.by_order.at(order).at(e);
        out << std::setw(width) << (s.rel_mse ? fixed(stat(*s.rel_mse, i), 2) : "NA");
      }
    }
    out << '\n';
  }

  out << "\nMedian coverage of " << fixed(report.config.value("confidence_level", 0.95) * 100, 0)
      << "% intervals\n\n"
      << std::setw(label_width) << std::left << "Order" << std::right;
  for (const auto& c : summary.columns) out << std::setw(width) << column_title(c);
  out << std::setw(width) << "count" << '\n';
  for (int order : orders) {
    out << std::setw(label_width) << std::left << order_title(order) << std::right;
    std::size_t count = 0;
    for (const auto& c : summary.columns) {
      const auto& s = summary.by_order.at(order).at(c);
      out << std::setw(width) << fixed(s.median_coverage, 3);
      count = std::max(count, s.estimands);
    }
    out << std::setw(width) << count << '\n';
  }

  bool header = false;
  for (const auto& e : engines) {
    auto it = report.engine_stats.find(e);
    if (it == report.engine_stats.end()) continue;
    const auto& st = it->second;
    if (st.failures == 0 && st.warnings.empty()) continue;
    if (!header) {
      out << "\nEngine notes\n";
      header = true;
    }
    if (st.failures > 0)
      out << "  " << column_title(e) << ": failed in " << st.failures << " of "
          << report.replications << " replications (first: " << st.first_failure << ")\n";
    for (const auto& [w, n] : st.warnings)
      out << "  " << column_title(e) << ": " << w << " (" << n << " replications)\n";
  }
}

void write_report_csv(const SimulationReport& report, std::ostream& out) {
  const auto summary = summarize(report);
  static const char* const kStatKeys[] = {"min", "q1", "median", "q3", "max"};
  out << "order,statistic,engine,value\n";
  out.precision(17);
  for (const auto& [order, cols] : summary.by_order) {
    const std::string order_name(to_string(static_cast<EstimandKind>(order)));
    for (int i = 0; i < 5; ++i) {
      for (const auto& e : report.engines) {
        const auto& s = cols.at(e);
        out << order_name << ",rel_mse_" << kStatKeys[i] << ',' << e << ',';
        if (s.rel_mse) out << stat(*s.rel_mse, i);
        else out << "NA";
        out << '\n';
      }
    }
    for (const auto& c : summary.columns) {
      const auto& s = cols.at(c);
      out << order_name << ",median_coverage," << c << ',';
      if (std::isfinite(s.median_coverage)) out << s.median_coverage;
      else out << "NA";
      out << '\n';
    }
  }
}

}  // namespace catimpute
