#pragma once

// The acceptance battery: every release gate of the project, each criterion
// measured against its explicit constant and tolerance. Used by the
// dedicated acceptance binary and by the CLI's verify-suite command.

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "lamina/delta_shift.hpp"
#include "lamina/field.hpp"
#include "lamina/integrand.hpp"
#include "lamina/laminate.hpp"
#include "lamina/matrix.hpp"
#include "lamina/realize.hpp"
#include "lamina/report.hpp"
#include "lamina/rng.hpp"
#include "lamina/util.hpp"
#include "lamina/zero_det.hpp"

namespace lamina::acceptance {

struct CriterionResult {
  std::string id;
  bool pass = true;
  std::vector<CheckResult> checks;
  double seconds = 0.0;
};

namespace detail {

struct CascadeCase {
  Mat m0;
  ZeroDetBuild build;
};

// 200 seeded negative-determinant matrices (100 each for d = 2, 3), cascaded
// to depth 10. Shared by the first four criteria.
inline const std::vector<CascadeCase>& cascade_corpus() {
  static const std::vector<CascadeCase> corpus = [] {
    std::vector<CascadeCase> out;
    out.reserve(200);
    for (int d : {2, 3}) {
      for (int k = 0; k < 100; ++k) {
        SplitMix64 rng(0xACC0ULL + 1000ULL * std::uint64_t(d) + std::uint64_t(k));
        Mat m0 = random_negative_det_matrix(rng, d);
        out.push_back({m0, build_zero_det_laminate(m0, 10)});
      }
    }
    return out;
  }();
  return corpus;
}

inline double truncated_neg_mass(const ZeroDetBuild& b, int j) {
  double mass = b.per_level[std::size_t(j - 1)].bad_neg_mass;
  for (int i = 1; i <= j; ++i) mass += b.per_level[std::size_t(i - 1)].good_neg_mass;
  return mass;
}

}  // namespace detail

// Negative mass of the level-j truncation equals 2^-j exactly.
inline CriterionResult criterion_bad_mass_law() {
  CriterionResult r{"1-bad-mass-law"};
  double worst = 0.0;
  for (const auto& c : detail::cascade_corpus())
    for (int j = 1; j <= 10; ++j) {
      double measured = detail::truncated_neg_mass(c.build, j);
      worst = std::max(worst, std::abs(measured - std::ldexp(1.0, -j)));
    }
  EstimateReport rep;
  rep.add("neg_mass_deviation", worst, 1e-15, worst <= 1e-15,
          "max |mass - 2^-j| over 200 seeds, j = 1..10");
  r.checks = rep.checks;
  r.pass = rep.all_pass();
  return r;
}

// Barycenter conservation and determinant linearity at every truncation.
inline CriterionResult criterion_barycenter_det_linearity() {
  CriterionResult r{"2-barycenter-det-linearity"};
  double worst_bary = 0.0, worst_det = 0.0;
  for (const auto& c : detail::cascade_corpus()) {
    double det0 = determinant(c.m0);
    double norm0 = frobenius_norm(c.m0);
    for (int j = 1; j <= 10; ++j) {
      Mat bary = zero_det_truncated_barycenter(c.build, j);
      worst_bary = std::max(worst_bary, frobenius_norm(bary - c.m0) / norm0);
      double deti = zero_det_truncated_det_integral(c.build, j);
      worst_det = std::max(worst_det, std::abs(deti - det0) / std::abs(det0));
    }
  }
  EstimateReport rep;
  rep.add("barycenter_rel_residual", worst_bary, 1e-8, worst_bary <= 1e-8);
  rep.add("det_integral_rel_residual", worst_det, 1e-8, worst_det <= 1e-8);
  r.checks = rep.checks;
  r.pass = rep.all_pass();
  return r;
}

// Centered and raw moment bounds with the explicit constants.
inline CriterionResult criterion_moment_bounds() {
  CriterionResult r{"3-moment-bounds"};
  double worst_centered = 0.0, worst_raw = 0.0;
  for (const auto& c : detail::cascade_corpus()) {
    int d = c.m0.dim();
    for (double p : {1.0, 1.25, 1.5, d - 0.1}) {
      for (int j = 1; j <= 10; ++j) {
        auto rep = verify_geometry(c.build, c.m0, p, j);
        for (const auto& chk : rep.checks) {
          if (chk.id == "centered_moment")
            worst_centered = std::max(worst_centered, chk.measured / chk.bound);
          if (chk.id == "raw_moment")
            worst_raw = std::max(worst_raw, chk.measured / chk.bound);
        }
      }
    }
  }
  EstimateReport rep;
  rep.add("centered_moment_ratio", worst_centered, 1.0, worst_centered <= 1.0,
          "measured / (C_geom |det M0|^(p/d))");
  rep.add("raw_moment_ratio", worst_raw, 1.0, worst_raw <= 1.0,
          "measured / (2^p C_geom |det M0|^(p/d) + 2^p |M0|^p)");
  r.checks = rep.checks;
  r.pass = rep.all_pass();
  return r;
}

// Per-level negative-atom determinants double exactly.
inline CriterionResult criterion_bad_det_growth() {
  CriterionResult r{"4-bad-det-growth"};
  double worst = 0.0;
  for (const auto& c : detail::cascade_corpus()) {
    double expect = std::abs(determinant(c.m0));
    for (int i = 1; i <= 10; ++i) {
      expect *= 2.0;
      const auto& rec = c.build.per_level[std::size_t(i - 1)];
      worst = std::max(worst, std::abs(rec.bad_det_min_abs - expect) / expect);
      worst = std::max(worst, std::abs(rec.bad_det_max_abs - expect) / expect);
    }
  }
  EstimateReport rep;
  rep.add("bad_det_rel_deviation", worst, 1e-8, worst <= 1e-8,
          "per-level |det| vs 2^i |det M0|");
  r.checks = rep.checks;
  r.pass = rep.all_pass();
  return r;
}

// Moment growth at the critical exponent versus geometric decay below it.
inline CriterionResult criterion_rigidity() {
  CriterionResult r{"5-rigidity-at-p-equals-d"};
  Mat m0 = Mat::diagonal({-1.0, 1.0});
  std::vector<int> jg;
  for (int j = 2; j <= 14; ++j) jg.push_back(j);
  auto rows = rigidity_scan(m0, {1.5, 2.0}, jg);

  std::vector<RigidityRow> flexible, rigid;
  for (const auto& row : rows) (row.p == 2.0 ? rigid : flexible).push_back(row);

  double first_inc = rigid.front().increment;
  double min_ratio = 1e300;
  for (const auto& row : rigid)
    min_ratio = std::min(min_ratio, row.increment / first_inc);

  double target = std::exp2(-0.25);
  double worst_tail = 0.0;
  for (std::size_t i = flexible.size() - 3; i < flexible.size(); ++i) {
    double ratio = flexible[i].increment / flexible[i - 1].increment;
    worst_tail = std::max(worst_tail, std::abs(ratio - target) / target);
  }

  EstimateReport rep;
  rep.add("increment_over_first", min_ratio, 0.5, min_ratio >= 0.5,
          "p = d: moment grows by at least half the first increment");
  rep.add("tail_ratio_rel_error", worst_tail, 0.1, worst_tail <= 0.1,
          "p = 1.5: tail increment ratio within 10% of 2^(-1/4)");
  r.checks = rep.checks;
  r.pass = rep.all_pass();
  return r;
}

// Delta-shift construction: 500 seeded (M0, delta) pairs across d = 2, 3, 4.
inline CriterionResult criterion_delta_suite() {
  CriterionResult r{"6-delta-shift-suite"};
  const double deltas[] = {1e-3, 1e-2, 1e-1, 1.0};
  double worst_ratio = 0.0;
  bool balance_ok = true;
  int count = 0;
  for (int k = 0; k < 500; ++k) {
    int d = 2 + k % 3;
    SplitMix64 rng(0xDE17AULL + std::uint64_t(k));
    Mat m0(d);
    switch (k % 5) {
      case 0: m0 = random_matrix(rng, d, 1.0); break;
      case 1: m0 = random_matrix(rng, d, 0.03); break;
      case 2: m0 = Mat::zero(d); break;
      case 3: {  // rank deficient: copy one column
        m0 = random_matrix(rng, d, 1.0);
        for (int i = 0; i < d; ++i) m0(i, d - 1) = m0(i, 0);
        break;
      }
      default: m0 = random_matrix(rng, d, 30.0); break;
    }
    double delta = deltas[rng.next() % 4];
    auto build = build_delta_laminate(m0, delta);
    ++count;

    if (build.split_count >= 1) {
      int positive = 0;
      for (const auto& a : build.laminate.atoms())
        if (determinant(a.matrix) > 0.0) ++positive;
      if (positive != (1 << (build.split_count - 1))) balance_ok = false;
    }
    for (double p : {1.0, 2.0, 3.0}) {
      auto rep = verify_delta(build, m0, delta, p);
      for (const auto& chk : rep.checks) {
        if (!chk.pass) worst_ratio = std::max(worst_ratio, 2.0);
        if (chk.bound > 0.0 && (chk.id == "centered_moment" || chk.id == "raw_moment"))
          worst_ratio = std::max(worst_ratio, chk.measured / chk.bound);
      }
    }
  }

  // equality case: M0 = 0 attains the centered bound exactly
  double worst_eq = 0.0;
  for (int d : {2, 3, 4}) {
    auto build = build_delta_laminate(Mat::zero(d), 1.0);
    for (double p : {1.0, 2.0, 3.0}) {
      double measured = p_moment(build.laminate, p, &build.source);
      double bound = std::pow(2.0 * std::sqrt(double(d)), p);
      worst_eq = std::max(worst_eq, std::abs(measured - bound) / bound);
    }
  }

  EstimateReport rep;
  rep.add("estimate_ratio", worst_ratio, 1.0, worst_ratio <= 1.0 + 1e-12,
          std::to_string(count) + " builds, all five checks");
  rep.add("sign_balance", balance_ok ? 1.0 : 0.0, 1.0, balance_ok,
          "exactly 2^(d-L-1) positive-determinant atoms");
  rep.add("equality_case", worst_eq, 1e-12, worst_eq <= 1e-12,
          "centered moment attains (2 sqrt(d))^p delta^p at M0 = 0");
  r.checks = rep.checks;
  r.pass = rep.all_pass();
  return r;
}

// Weak orientation repair on a uniformly negative field.
inline CriterionResult criterion_weak_repair() {
  CriterionResult r{"7-weak-repair"};
  const double p = 1.5;
  GradientField f = GradientField::constant(Mat::diagonal({-1.0, 1.0}), 4);
  auto [g, trace] = weak_repair(f, p, {.j0 = 1}, 2);

  auto st = field_stats(g, p);
  double def0 = trace.rows[0].det_deficiency;
  double worst_decay = 0.0, worst_changed = 0.0;
  for (const auto& row : trace.rows) {
    if (row.l == 0) continue;
    worst_decay = std::max(worst_decay,
                           row.det_deficiency / (std::exp2(-row.l * p) * def0));
    worst_changed = std::max(worst_changed, row.changed_on_good);
  }
  double drift = lp_distance_pow(f, g, p);
  double c_geom = geometry_constant(p, 2, trace.total_cascade_levels);

  EstimateReport rep;
  rep.add("final_neg_mass", st.neg_mass, 0.0, st.neg_mass == 0.0);
  rep.add("deficiency_decay_ratio", worst_decay, 1.0, worst_decay <= 1.0,
          "det deficiency vs 2^(-lp) envelope, every iteration");
  rep.add("drift_over_bound", drift / (c_geom * def0), 1.0,
          drift <= c_geom * def0, "|G - F|_p^p vs C_geom * deficiency");
  rep.add("changed_on_good", worst_changed, 0.0, worst_changed == 0.0,
          "compliant cells untouched");
  r.checks = rep.checks;
  r.pass = rep.all_pass();
  return r;
}

// Strict orientation repair from the all-zero field.
inline CriterionResult criterion_strict_repair() {
  CriterionResult r{"8-strict-repair"};
  const double p = 1.5;
  const double budget = 1.0;
  GradientField f = GradientField::constant(Mat::zero(2), 4);
  auto [g, trace] = strict_repair(f, p, {.delta0 = 0.25}, 4, budget, 1);

  auto st = field_stats(g, p);
  double z0 = trace.rows[0].zero_mass;
  double worst_env = 0.0;
  for (const auto& row : trace.rows) {
    if (row.l == 0) continue;
    double envelope = row.l / std::exp2(row.l) + z0 / std::exp2(row.l);
    worst_env = std::max(worst_env, row.zero_mass / envelope);
  }
  double drift = std::pow(lp_distance_pow(f, g, p), 1.0 / p);

  EstimateReport rep;
  rep.add("final_min_det", st.min_det, 0.0, st.min_det > 0.0,
          "strict orientation on every cell");
  rep.add("zero_mass_envelope_ratio", worst_env, 1.0, worst_env <= 1.0,
          "zero mass vs l/2^l + z0/2^l");
  rep.add("total_drift", drift, budget, drift <= budget);
  r.checks = rep.checks;
  r.pass = rep.all_pass();
  return r;
}

// Realization fidelity of the level-1 cascade laminate.
inline CriterionResult criterion_realization() {
  CriterionResult r{"9-realization-fidelity"};
  auto build = build_zero_det_laminate(Mat::diagonal({-1.0, 1.0}), 1);
  double worst_tv = 0.0, worst_cont = 0.0;
  for (double eps : {0.2, 0.1, 0.05}) {
    auto map = realize_laminate(build.laminate, 2, eps, 8);
    double tv = histogram_tv_distance(map, build.laminate);
    worst_tv = std::max(worst_tv, tv / (2.0 * eps * build.laminate.depth()));
    worst_cont = std::max(worst_cont, continuity_residual(map));
  }
  EstimateReport rep;
  rep.add("tv_over_bound", worst_tv, 1.0, worst_tv <= 1.0,
          "TV distance vs 2 * epsilon * depth, eps in {0.2, 0.1, 0.05}");
  rep.add("continuity_residual", worst_cont, 1e-12, worst_cont <= 1e-12);
  r.checks = rep.checks;
  r.pass = rep.all_pass();
  return r;
}

// Energy tracking along the full repair pipeline.
inline CriterionResult criterion_energy_tracking() {
  CriterionResult r{"10-energy-tracking"};
  GradientField f = GradientField::constant(Mat::diagonal({-1.0, 1.0}), 2);
  PipelineParams params{.weak_l_max = 2, .strict_l_max = 1, .j_inner = 0};
  auto rep_energy = energy_compare(f, 1.5, Integrand::parse("pnorm:2"), params);

  double worst_det = 0.0;
  double det0 = -1.0;
  for (const auto& row : rep_energy.rows)
    if (row.phase == "weak")
      worst_det = std::max(worst_det, std::abs(row.det_integral - det0));

  EstimateReport rep;
  rep.add("energy_gap", rep_energy.abs_diff, 1e-10, rep_energy.abs_diff <= 1e-10,
          "|I(G_final) - I_YM| for pnorm:2");
  rep.add("det_constancy", worst_det, 1e-8, worst_det <= 1e-8,
          "det integral stays at det M0 along the lamination iterations");
  r.checks = rep.checks;
  r.pass = rep.all_pass();
  return r;
}

inline std::vector<CriterionResult> run_all() {
  using Clock = std::chrono::steady_clock;
  std::vector<CriterionResult (*)()> criteria = {
      criterion_bad_mass_law,    criterion_barycenter_det_linearity,
      criterion_moment_bounds,   criterion_bad_det_growth,
      criterion_rigidity,        criterion_delta_suite,
      criterion_weak_repair,     criterion_strict_repair,
      criterion_realization,     criterion_energy_tracking,
  };
  std::vector<CriterionResult> out;
  for (auto* fn : criteria) {
    auto t0 = Clock::now();
    CriterionResult res = fn();
    res.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.push_back(std::move(res));
  }
  return out;
}

inline std::string summary_csv(const std::vector<CriterionResult>& results) {
  std::string out = "criterion,check,measured,bound,pass\n";
  for (const auto& r : results)
    for (const auto& c : r.checks) {
      out += r.id;
      out += ',';
      out += c.id;
      out += ',';
      out += format_double(c.measured);
      out += ',';
      out += format_double(c.bound);
      out += ',';
      out += c.pass ? '1' : '0';
      out += '\n';
    }
  return out;
}

}  // namespace lamina::acceptance
