#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "subfactor/multimatrix.hpp"

namespace subfactor {

struct CheckResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;

  bool pass() const { return residual <= tolerance; }
};

struct SuiteReport {
  std::string suite;
  std::string reference;
  std::vector<CheckResult> checks;
  double wall_seconds = 0.0;

  void add(const std::string& name, double residual, double tolerance) {
    if (!std::isfinite(residual))
      throw NumericError("report: non-finite residual in " + name);
    checks.push_back({name, std::abs(residual), tolerance});
  }

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass()) return false;
    return true;
  }
};

struct VerificationReport {
  std::string spec_name;
  std::uint64_t seed = 0;
  std::vector<SuiteReport> suites;

  bool all_pass() const {
    for (const auto& s : suites)
      if (!s.pass()) return false;
    return true;
  }
};

inline nlohmann::json to_json(const VerificationReport& r) {
  nlohmann::json j;
  j["spec"] = r.spec_name;
  j["seed"] = r.seed;
  j["pass"] = r.all_pass();
  j["suites"] = nlohmann::json::array();
  for (const auto& s : r.suites) {
    nlohmann::json js;
    js["suite"] = s.suite;
    js["reference"] = s.reference;
    js["pass"] = s.pass();
    js["wall_seconds"] = s.wall_seconds;
    js["residuals"] = nlohmann::json::array();
    for (const auto& c : s.checks)
      js["residuals"].push_back({{"name", c.name},
                                 {"residual", c.residual},
                                 {"tolerance", c.tolerance},
                                 {"pass", c.pass()}});
    j["suites"].push_back(std::move(js));
  }
  return j;
}

inline void print_table(std::ostream& os, const VerificationReport& r) {
  os << "spec " << r.spec_name << "  (seed " << r.seed << ")\n";
  for (const auto& s : r.suites) {
    os << "  suite " << std::left << std::setw(10) << s.suite << " ["
       << s.reference << "]  " << (s.pass() ? "PASS" : "FAIL") << "  "
       << std::fixed << std::setprecision(2) << s.wall_seconds << " s\n";
    for (const auto& c : s.checks) {
      os << "    " << std::left << std::setw(42) << c.name << std::scientific
         << std::setprecision(3) << std::right << std::setw(12) << c.residual
         << "  <= " << std::setw(9) << c.tolerance << "  "
         << (c.pass() ? "pass" : "FAIL") << "\n";
    }
  }
  os << (r.all_pass() ? "ALL PASS" : "FAILURES PRESENT") << "\n";
}

}  // namespace subfactor
