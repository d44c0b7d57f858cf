#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scralloc/allocation.hpp"
#include "scralloc/rorac.hpp"
#include "scralloc/risk_model.hpp"

namespace scralloc {

// Reinsurance programme: free-form tags ("type" -> "quota_share") and numeric
// parameters ("retention" -> 0.6).
struct Reinsurance {
  std::map<std::string, std::string> tags;
  std::map<std::string, double> params;

  bool operator==(const Reinsurance&) const = default;
};

// One underwriting/reinsurance strategy with the risk profile it induces.
// Lines of business are the income nodes of the scenario.
struct Scenario {
  std::string id;
  std::map<std::string, double> premiums;
  Reinsurance reinsurance;
  RiskTree tree;
  IncomeStats income;

  bool operator==(const Scenario&) const = default;
};

enum class RuleOp { Less, LessEqual, Greater, GreaterEqual, Equal, NotEqual, In, NotIn, Has };

std::string_view to_string(RuleOp op);
std::optional<RuleOp> parse_rule_op(std::string_view text);

// Predicate over the reinsurance descriptor. Comparison operators read
// params[key] against `value`; In/NotIn read tags[key] against `values`;
// Has requires tags[key] or params[key] to exist.
struct ReinsuranceRule {
  std::string id;
  std::string key;
  RuleOp op = RuleOp::Has;
  double value = 0.0;
  std::vector<std::string> values;

  bool operator==(const ReinsuranceRule&) const = default;
};

struct Bounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool operator==(const Bounds&) const = default;
};

// Risk appetite: lower < SCR < upper, lower < P_lob < upper, CV_lob < cap,
// reinsurance rules. Omitted fields are vacuous.
struct ConstraintSet {
  Bounds scr;
  bool inclusive_scr = false;  // weak instead of strict SCR bounds
  std::map<std::string, Bounds> premiums;
  std::optional<double> cv_cap;
  std::map<std::string, double> cv_caps;  // per-LoB override of cv_cap
  std::vector<ReinsuranceRule> rules;

  void validate() const;
  bool operator==(const ConstraintSet&) const = default;
};

struct ScenarioEvaluation {
  std::string id;
  double total_scr = 0.0;
  AllocationResult allocation;
  RoracReport rorac;
};

// Full pipeline for one scenario. Errors are re-thrown tagged with the
// scenario id.
ScenarioEvaluation evaluate_scenario(const Scenario& scenario, const Tolerances& tol = {});

struct ConstraintCheck {
  std::string id;       // "scr.lower", "premium.upper:<lob>", "cv:<lob>", "rule:<id>"
  bool passed = false;
  double margin = 0.0;  // slack; <= 0 on failure for numeric checks
  std::string detail;
};

struct FeasibilityVerdict {
  std::string scenario;
  std::vector<ConstraintCheck> checks;

  bool feasible() const;
  std::vector<ConstraintCheck> violations() const;
};

FeasibilityVerdict check_feasibility(const Scenario& scenario, const ScenarioEvaluation& eval,
                                     const ConstraintSet& constraints);

struct ScenarioOutcome {
  ScenarioEvaluation evaluation;
  FeasibilityVerdict verdict;
};

struct FrontierPoint {
  std::string scenario;
  double total_scr = 0.0;
  double expected_rorac = 0.0;
};

struct OptimizationReport {
  std::vector<ScenarioOutcome> outcomes;  // input order
  std::optional<std::size_t> optimum;     // index into outcomes
  std::vector<FrontierPoint> frontier;    // feasible scenarios, input order

  const ScenarioOutcome* selected() const;
};

// Exhaustive search: the feasible scenario with the highest expected RORAC,
// ties broken by lower total SCR, then by id. No optimum when nothing is
// feasible.
OptimizationReport optimize(const std::vector<Scenario>& scenarios, const ConstraintSet& constraints,
                            const Tolerances& tol = {});

// Throws NoFeasibleScenario listing each scenario's tightest violations.
const ScenarioOutcome& require_optimum(const OptimizationReport& report);

struct FrontierRow {
  std::string lob;
  double expected_rorac = 0.0;
  std::optional<double> stdev_rorac;
  double allocated_scr = 0.0;
};

// Risk-return scatter of the selected scenario: one row per LoB plus totals.
struct FrontierDataset {
  std::string scenario;  // empty when nothing was selected
  std::string note;
  std::vector<FrontierRow> rows;
  std::optional<FrontierRow> total;
};

FrontierDataset emit_frontier(const OptimizationReport& report);
FrontierDataset frontier_of(const ScenarioEvaluation& evaluation);

}  // namespace scralloc
