#include <CLI11.hpp>

#include <chrono>
#include <functional>
#include <iostream>
#include <set>

#include "../common/criteria.hpp"
#include "../common/support.hpp"

using namespace testsupport;

namespace {

struct Criterion {
  int id;
  std::string title;
  std::function<CheckResult()> run;
};

void print(int id, const std::string& title, const CheckResult& r, double seconds) {
  std::cout << (r.pass ? "PASS" : "FAIL") << "  criterion " << id << "  " << title << "  (" << r.detail
            << "; " << std::fixed << std::setprecision(1) << seconds << " s)" << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks, one line per criterion"};
  std::vector<int> only;
  std::string config = (source_dir() / "configs" / "desk_scale.json").string();
  std::string out_dir = "acceptance_out";
  int jobs_a = 1;
  int jobs_b = 2;
  int cases = 100;
  app.add_option("criteria", only, "Criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--config", config, "Study config for criteria 7 and 8")->capture_default_str();
  app.add_option("--out-dir", out_dir, "Where study reports are written")->capture_default_str();
  app.add_option("--jobs-a", jobs_a, "Worker threads for the first study run")->capture_default_str();
  app.add_option("--jobs-b", jobs_b, "Worker threads for the second study run")->capture_default_str();
  app.add_option("--cases", cases, "Randomized cases per invariant")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const std::set<int> wanted(only.begin(), only.end());
  auto selected = [&](int id) { return wanted.empty() || wanted.contains(id); };

  const std::vector<Criterion> simple = {
      {1, "Rubin's rules example", [] { return check_rubin_example(); }},
      {2, "DPM small-instance oracle", [] { return check_dpm_small_oracle(); }},
      {3, "DPM model recovery", [] { return check_dpm_recovery(); }},
      {4, "CART worked tree example", [] { return check_cart_tree_example(); }},
      {5, "GLM correctness", [] { return check_glm_correctness(); }},
      {6, "amputation calibration", [] { return check_amputation_calibration(); }},
  };

  bool all_pass = true;
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t) {
    return std::chrono::duration<double>(clock::now() - t).count();
  };

  for (const auto& c : simple) {
    if (!selected(c.id)) continue;
    const auto start = clock::now();
    CheckResult r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    all_pass = all_pass && r.pass;
    print(c.id, c.title, r, seconds_since(start));
  }

  if (selected(7) || selected(8)) {
    const auto start = clock::now();
    StudyChecks s;
    try {
      s = check_desk_study(config, jobs_a, jobs_b, out_dir);
    } catch (const std::exception& e) {
      s.quality = s.determinism = {false, std::string("exception: ") + e.what()};
    }
    const double t = seconds_since(start);
    if (selected(7)) {
      all_pass = all_pass && s.quality.pass;
      print(7, "desk-scale study ordering", s.quality, t);
    }
    if (selected(8)) {
      all_pass = all_pass && s.determinism.pass;
      print(8, "report determinism across --jobs", s.determinism, t);
    }
  }

  if (selected(9)) {
    const auto start = clock::now();
    CheckResult r{true, ""};
    try {
      for (const auto& inv : run_invariants(cases, 2027)) {
        r.pass = r.pass && inv.ok();
        if (!r.detail.empty()) r.detail += "; ";
        r.detail += inv.name + " " + std::to_string(inv.cases - inv.failures) + "/" + std::to_string(inv.cases);
        if (!inv.ok()) r.detail += " (first failure " + inv.first_failure + ")";
      }
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    all_pass = all_pass && r.pass;
    print(9, "invariant suite", r, seconds_since(start));
  }
  return all_pass ? 0 : 1;
}
