#include "scralloc/rorac.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "scralloc/error.hpp"

namespace scralloc {

namespace {

struct NodeRef {
  std::size_t macro = 0;
  std::optional<std::size_t> micro;
};

std::optional<NodeRef> resolve(const RiskTree& tree, const std::string& node) {
  const auto slash = node.find('/');
  const std::string macro_id = node.substr(0, slash);
  for (std::size_t i = 0; i < tree.macros.size(); ++i) {
    const MacroRisk& macro = tree.macros[i];
    if (macro.id != macro_id) continue;
    if (slash == std::string::npos) return NodeRef{i, std::nullopt};
    const std::string micro_id = node.substr(slash + 1);
    for (std::size_t x = 0; x < macro.micros.size(); ++x) {
      if (macro.micros[x].id == micro_id) return NodeRef{i, x};
    }
    return std::nullopt;
  }
  return std::nullopt;
}

double ratio_or_zero(double num, double den, const std::string& node) {
  if (den != 0.0) return num / den;
  if (num != 0.0) {
    throw Error(ErrorKind::ZeroCapitalWithIncome, node, "income on a node with zero capital");
  }
  return 0.0;
}

}  // namespace

const IncomeEntry* IncomeStats::find(const std::string& node) const {
  for (const auto& e : entries)
    if (e.node == node) return &e;
  return nullptr;
}

const NodeRorac* RoracReport::find(const std::string& node) const {
  for (const auto& n : nodes)
    if (n.node == node) return &n;
  return nullptr;
}

double allocated_capital(const AllocationResult& alloc, const std::string& node) {
  if (node.find('/') == std::string::npos) {
    if (const auto* m = alloc.find_macro(node)) return m->allocated;
  } else if (const auto* m = alloc.find_micro(node)) {
    return m->allocated;
  }
  throw Error(ErrorKind::InvalidNode, node, "no such node in the allocation");
}

void validate_income(const RiskTree& tree, const IncomeStats& income) {
  std::set<std::string> seen;
  std::set<std::size_t> macro_level;
  std::set<std::size_t> micro_level;
  for (const auto& e : income.entries) {
    const auto ref = resolve(tree, e.node);
    if (!ref) throw Error(ErrorKind::InvalidNode, e.node, "income node not found in the tree");
    if (!seen.insert(e.node).second) {
      throw Error(ErrorKind::InvalidInput, e.node, "duplicate income node");
    }
    if (!std::isfinite(e.expected) || (e.stdev && (!std::isfinite(*e.stdev) || *e.stdev < 0.0))) {
      throw Error(ErrorKind::InvalidInput, e.node, "income must be finite with stdev >= 0");
    }
    (ref->micro ? micro_level : macro_level).insert(ref->macro);
  }
  for (std::size_t i : micro_level) {
    if (macro_level.count(i) != 0) {
      throw Error(ErrorKind::InvalidInput, tree.macros[i].id,
                  "income given for a macro-risk and for one of its micro-risks");
    }
  }
}

RoracReport compute_rorac(const AllocationResult& alloc, const IncomeStats& income) {
  RoracReport report;
  report.total_capital = alloc.total_scr;
  bool all_stdev = !income.entries.empty();
  double stdev_income = 0.0;
  for (const auto& e : income.entries) {
    NodeRorac row;
    row.node = e.node;
    row.allocated = allocated_capital(alloc, e.node);
    row.expected_income = e.expected;
    row.income_stdev = e.stdev;
    row.expected_rorac = ratio_or_zero(e.expected, row.allocated, e.node);
    if (e.stdev && row.allocated != 0.0) {
      row.stdev_rorac = *e.stdev / std::abs(row.allocated);
      if (row.expected_rorac > 0.0) row.cv = *row.stdev_rorac / row.expected_rorac;
    }
    if (e.stdev) {
      stdev_income += *e.stdev;
    } else {
      all_stdev = false;
    }
    report.total_income += e.expected;
    report.nodes.push_back(std::move(row));
  }
  report.expected_rorac = ratio_or_zero(report.total_income, report.total_capital, "<total>");
  if (all_stdev) {
    report.stdev_rorac = ratio_or_zero(stdev_income, report.total_capital, "<total>");
  }
  return report;
}

std::vector<double> default_h_grid(double eps, int points) {
  std::vector<double> grid;
  if (points <= 0) return grid;
  if (points == 1) return {eps};
  for (int k = 0; k < points; ++k) {
    grid.push_back(eps * std::pow(10.0, -4.0 + 4.0 * k / (points - 1)));
  }
  grid.back() = eps;
  return grid;
}

CompatibilityVerdict check_rorac_compatibility(const RiskTree& tree, const IncomeStats& income,
                                               const std::string& node,
                                               const std::vector<double>& h_grid,
                                               const CompatibilityOptions& options,
                                               const Tolerances& tol) {
  const auto ref = resolve(tree, node);
  if (!ref) throw Error(ErrorKind::InvalidNode, node, "node not found in the tree");
  if (!income.find(node)) throw Error(ErrorKind::InvalidNode, node, "node carries no income");
  validate_income(tree, income);
  for (double h : h_grid) {
    if (!(h > 0.0)) throw Error(ErrorKind::InvalidInput, node, "h grid must be positive");
  }

  const AllocationResult base_alloc = allocate(tree, tol);
  const RoracReport base = compute_rorac(base_alloc, income);

  CompatibilityVerdict verdict;
  verdict.node = node;
  verdict.node_rorac = base.find(node)->expected_rorac;
  verdict.total_rorac = base.expected_rorac;
  verdict.allocated = base.find(node)->allocated;
  verdict.in_domain = verdict.allocated > 0.0;
  const double gap = verdict.node_rorac - verdict.total_rorac;
  verdict.outperforms = verdict.in_domain && gap > options.margin;
  verdict.sign_applicable = verdict.in_domain && std::abs(gap) > options.sign_threshold;

  for (double h : h_grid) {
    RiskTree grown = tree;
    MacroRisk& macro = grown.macros[ref->macro];
    if (ref->micro) {
      macro.micros[*ref->micro].scr *= 1.0 + h;
    } else {
      for (auto& m : macro.micros) m.scr *= 1.0 + h;
    }
    double total_income = 0.0;
    for (const auto& e : income.entries) {
      total_income += e.node == node ? e.expected * (1.0 + h) : e.expected;
    }
    const double total_scr = aggregate_tree(grown, tol).total_scr;
    const double rorac = ratio_or_zero(total_income, total_scr, "<total>");
    const double delta = rorac - verdict.total_rorac;
    verdict.points.push_back({h, rorac, delta});

    if (verdict.outperforms && !(rorac > verdict.total_rorac)) verdict.pass = false;
    if (verdict.sign_applicable && (delta > 0.0) != (gap > 0.0)) verdict.sign_consistent = false;
  }
  return verdict;
}

}  // namespace scralloc
