#include "scralloc/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <locale>
#include <sstream>

#include "scralloc/aggregation.hpp"
#include "scralloc/error.hpp"

namespace scralloc {

namespace {

std::string format_number(double v) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << v;
  return out.str();
}

ConstraintCheck lower_check(std::string id, double value, double bound, bool inclusive) {
  const double margin = value - bound;
  const bool ok = inclusive ? value >= bound : value > bound;
  return {std::move(id), ok, margin,
          format_number(value) + (inclusive ? " >= " : " > ") + format_number(bound)};
}

ConstraintCheck upper_check(std::string id, double value, double bound, bool inclusive) {
  const double margin = bound - value;
  const bool ok = inclusive ? value <= bound : value < bound;
  return {std::move(id), ok, margin,
          format_number(value) + (inclusive ? " <= " : " < ") + format_number(bound)};
}

ConstraintCheck evaluate_rule(const ReinsuranceRule& rule, const Reinsurance& re) {
  ConstraintCheck check{"rule:" + rule.id, false, 0.0, {}};
  const std::string label = rule.key + " " + std::string(to_string(rule.op));
  switch (rule.op) {
    case RuleOp::Has:
      check.passed = re.tags.count(rule.key) != 0 || re.params.count(rule.key) != 0;
      check.detail = check.passed ? rule.key + " present" : rule.key + " missing";
      return check;
    case RuleOp::In:
    case RuleOp::NotIn: {
      const auto it = re.tags.find(rule.key);
      if (it == re.tags.end()) {
        check.detail = "tag " + rule.key + " missing";
        return check;
      }
      const bool member =
          std::find(rule.values.begin(), rule.values.end(), it->second) != rule.values.end();
      check.passed = rule.op == RuleOp::In ? member : !member;
      check.detail = rule.key + "=" + it->second + (member ? " in set" : " not in set");
      return check;
    }
    default:
      break;
  }
  const auto it = re.params.find(rule.key);
  if (it == re.params.end()) {
    check.detail = "parameter " + rule.key + " missing";
    return check;
  }
  const double x = it->second;
  const double v = rule.value;
  switch (rule.op) {
    case RuleOp::Less: check.passed = x < v; check.margin = v - x; break;
    case RuleOp::LessEqual: check.passed = x <= v; check.margin = v - x; break;
    case RuleOp::Greater: check.passed = x > v; check.margin = x - v; break;
    case RuleOp::GreaterEqual: check.passed = x >= v; check.margin = x - v; break;
    case RuleOp::Equal: check.passed = x == v; check.margin = -std::abs(x - v); break;
    case RuleOp::NotEqual: check.passed = x != v; check.margin = std::abs(x - v); break;
    default: break;
  }
  check.detail = rule.key + "=" + format_number(x) + ", rule " + label + " " + format_number(v);
  return check;
}

// Ordering used to pick the optimum: higher E(RORAC), lower SCR, smaller id.
bool better(const ScenarioOutcome& a, const ScenarioOutcome& b) {
  const double ra = a.evaluation.rorac.expected_rorac;
  const double rb = b.evaluation.rorac.expected_rorac;
  if (ra != rb) return ra > rb;
  if (a.evaluation.total_scr != b.evaluation.total_scr) {
    return a.evaluation.total_scr < b.evaluation.total_scr;
  }
  return a.evaluation.id < b.evaluation.id;
}

}  // namespace

std::string_view to_string(RuleOp op) {
  switch (op) {
    case RuleOp::Less: return "<";
    case RuleOp::LessEqual: return "<=";
    case RuleOp::Greater: return ">";
    case RuleOp::GreaterEqual: return ">=";
    case RuleOp::Equal: return "==";
    case RuleOp::NotEqual: return "!=";
    case RuleOp::In: return "in";
    case RuleOp::NotIn: return "not_in";
    case RuleOp::Has: return "has";
  }
  return "?";
}

std::optional<RuleOp> parse_rule_op(std::string_view text) {
  for (RuleOp op : {RuleOp::Less, RuleOp::LessEqual, RuleOp::Greater, RuleOp::GreaterEqual,
                    RuleOp::Equal, RuleOp::NotEqual, RuleOp::In, RuleOp::NotIn, RuleOp::Has}) {
    if (to_string(op) == text) return op;
  }
  return std::nullopt;
}

void ConstraintSet::validate() const {
  if (std::isnan(scr.lower) || std::isnan(scr.upper) || scr.lower > scr.upper) {
    throw Error(ErrorKind::InvalidInput, "scr_bounds", "SCR bounds need lower <= upper");
  }
  for (const auto& [lob, b] : premiums) {
    if (std::isnan(b.lower) || std::isnan(b.upper) || b.lower > b.upper) {
      throw Error(ErrorKind::InvalidInput, "premium_bounds/" + lob, "premium bounds need lower <= upper");
    }
  }
  if (cv_cap && !(*cv_cap > 0.0)) throw Error(ErrorKind::InvalidInput, "cv_cap", "CV cap must be > 0");
  for (const auto& [lob, cap] : cv_caps) {
    if (!(cap > 0.0)) throw Error(ErrorKind::InvalidInput, "cv_caps/" + lob, "CV cap must be > 0");
  }
}

ScenarioEvaluation evaluate_scenario(const Scenario& scenario, const Tolerances& tol) {
  const std::string tag = "scenario:" + scenario.id;
  try {
    for (const auto& [lob, p] : scenario.premiums) {
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw Error(ErrorKind::InvalidInput, "premiums/" + lob, "premium must be finite and >= 0");
      }
    }
    const ValidationReport report = validate_tree(scenario.tree, tol);
    if (report.has_errors()) {
      for (const auto& v : report.violations) {
        if (v.severity == Severity::Error) throw Error(ErrorKind::InvalidInput, v.path, v.message);
      }
    }
    validate_income(scenario.tree, scenario.income);
    ScenarioEvaluation eval;
    eval.id = scenario.id;
    eval.allocation = allocate(scenario.tree, tol);
    eval.total_scr = eval.allocation.total_scr;
    eval.rorac = compute_rorac(eval.allocation, scenario.income);
    return eval;
  } catch (const Error& e) {
    const std::string path = e.path().empty() ? tag : tag + "/" + e.path();
    throw Error(e.kind(), path, e.message());
  }
}

bool FeasibilityVerdict::feasible() const {
  return std::all_of(checks.begin(), checks.end(), [](const ConstraintCheck& c) { return c.passed; });
}

std::vector<ConstraintCheck> FeasibilityVerdict::violations() const {
  std::vector<ConstraintCheck> out;
  for (const auto& c : checks)
    if (!c.passed) out.push_back(c);
  return out;
}

FeasibilityVerdict check_feasibility(const Scenario& scenario, const ScenarioEvaluation& eval,
                                     const ConstraintSet& constraints) {
  FeasibilityVerdict verdict;
  verdict.scenario = scenario.id;
  auto& checks = verdict.checks;
  const bool weak = constraints.inclusive_scr;
  if (std::isfinite(constraints.scr.lower)) {
    checks.push_back(lower_check("scr.lower", eval.total_scr, constraints.scr.lower, weak));
  }
  if (std::isfinite(constraints.scr.upper)) {
    checks.push_back(upper_check("scr.upper", eval.total_scr, constraints.scr.upper, weak));
  }

  for (const auto& [lob, bounds] : constraints.premiums) {
    const auto it = scenario.premiums.find(lob);
    if (it == scenario.premiums.end()) {
      checks.push_back({"premium:" + lob, false, 0.0, "no premium for " + lob});
      continue;
    }
    if (std::isfinite(bounds.lower)) {
      checks.push_back(lower_check("premium.lower:" + lob, it->second, bounds.lower, false));
    }
    if (std::isfinite(bounds.upper)) {
      checks.push_back(upper_check("premium.upper:" + lob, it->second, bounds.upper, false));
    }
  }

  for (const auto& node : eval.rorac.nodes) {
    const auto override_it = constraints.cv_caps.find(node.node);
    const std::optional<double> cap =
        override_it != constraints.cv_caps.end() ? std::optional<double>(override_it->second)
                                                 : constraints.cv_cap;
    if (!cap || std::isinf(*cap)) continue;
    const std::string id = "cv:" + node.node;
    if (!node.cv) {
      const char* why = node.expected_rorac <= 0.0 ? "CV undefined: E(RORAC) <= 0"
                                                   : "CV undefined: no income stdev";
      checks.push_back({id, false, 0.0, why});
      continue;
    }
    checks.push_back(upper_check(id, *node.cv, *cap, false));
  }

  for (const auto& rule : constraints.rules) checks.push_back(evaluate_rule(rule, scenario.reinsurance));
  return verdict;
}

const ScenarioOutcome* OptimizationReport::selected() const {
  return optimum ? &outcomes[*optimum] : nullptr;
}

OptimizationReport optimize(const std::vector<Scenario>& scenarios, const ConstraintSet& constraints,
                            const Tolerances& tol) {
  if (scenarios.empty()) throw Error(ErrorKind::InvalidInput, "scenarios", "at least one scenario");
  constraints.validate();
  OptimizationReport report;
  report.outcomes.reserve(scenarios.size());
  for (const auto& s : scenarios) {
    ScenarioEvaluation eval = evaluate_scenario(s, tol);
    FeasibilityVerdict verdict = check_feasibility(s, eval, constraints);
    report.outcomes.push_back({std::move(eval), std::move(verdict)});
  }
  for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
    const ScenarioOutcome& o = report.outcomes[i];
    if (!o.verdict.feasible()) continue;
    report.frontier.push_back({o.evaluation.id, o.evaluation.total_scr, o.evaluation.rorac.expected_rorac});
    if (!report.optimum || better(o, report.outcomes[*report.optimum])) report.optimum = i;
  }
  return report;
}

const ScenarioOutcome& require_optimum(const OptimizationReport& report) {
  if (const auto* s = report.selected()) return *s;
  std::ostringstream msg;
  msg << "no feasible scenario;";
  for (const auto& o : report.outcomes) {
    auto v = o.verdict.violations();
    std::stable_sort(v.begin(), v.end(),
                     [](const ConstraintCheck& a, const ConstraintCheck& b) { return a.margin > b.margin; });
    msg << " " << o.evaluation.id << ":";
    for (std::size_t k = 0; k < v.size() && k < 3; ++k) {
      msg << (k ? ", " : " ") << v[k].id << " (" << v[k].detail << ")";
    }
    msg << ";";
  }
  throw Error(ErrorKind::NoFeasibleScenario, "optimize", msg.str());
}

FrontierDataset frontier_of(const ScenarioEvaluation& evaluation) {
  FrontierDataset data;
  data.scenario = evaluation.id;
  for (const auto& n : evaluation.rorac.nodes) {
    data.rows.push_back({n.node, n.expected_rorac, n.stdev_rorac, n.allocated});
  }
  data.total = FrontierRow{"Total", evaluation.rorac.expected_rorac, evaluation.rorac.stdev_rorac,
                           evaluation.rorac.total_capital};
  return data;
}

FrontierDataset emit_frontier(const OptimizationReport& report) {
  if (const auto* s = report.selected()) return frontier_of(s->evaluation);
  FrontierDataset data;
  data.note = "no feasible scenario: empty risk-return dataset";
  return data;
}

}  // namespace scralloc
