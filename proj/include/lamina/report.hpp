#pragma once

#include <string>
#include <vector>

#include "lamina/util.hpp"

namespace lamina {

// One measured quantity checked against an explicit bound. `pass` is the
// recorded verdict, never recomputed downstream.
struct CheckResult {
  std::string id;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;
  std::string note;
};

struct EstimateReport {
  std::vector<CheckResult> checks;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  void add(std::string id, double measured, double bound, bool pass,
           std::string note = "") {
    checks.push_back({std::move(id), measured, bound, pass, std::move(note)});
  }

  // Convenience for "measured <= bound" checks. Several bounds are attained
  // exactly, so the comparison allows rounding at the equality point.
  void add_le(std::string id, double measured, double bound,
              std::string note = "") {
    bool ok = measured <= bound * (1.0 + 1e-12);
    checks.push_back({std::move(id), measured, bound, ok, std::move(note)});
  }
};

inline std::string report_csv(const EstimateReport& r) {
  std::string out = "id,measured,bound,pass,note\n";
  for (const auto& c : r.checks) {
    out += c.id;
    out += ',';
    out += format_double(c.measured);
    out += ',';
    out += format_double(c.bound);
    out += ',';
    out += c.pass ? '1' : '0';
    out += ',';
    out += c.note;
    out += '\n';
  }
  return out;
}

}  // namespace lamina
