#include "scralloc/allocation.hpp"

#include <sstream>

#include "scralloc/error.hpp"

namespace scralloc {

namespace {

// dSCR/dSCR_i for every macro-risk.
std::vector<double> macro_gradient(const RiskTree& tree, const AggregationOutput& agg) {
  const std::vector<double> values = agg.macro_values();
  const std::size_t n = values.size();
  if (agg.total_scr > 0.0) {
    std::vector<double> g = correlated_sums(values, tree.corr);
    for (double& x : g) x /= agg.total_scr;
    return g;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i] > 0.0) {
      std::ostringstream msg;
      msg << "total SCR is zero while macro " << agg.macro_scrs[i].id << " has SCR "
          << values[i];
      throw Error(ErrorKind::ZeroTotalScr, tree.name, msg.str());
    }
  }
  // Every input is zero: directional derivative along each axis is |e_i| = 1.
  return std::vector<double>(n, 1.0);
}

// dSCR_i/dSCR_ix for the micros of one macro.
std::vector<double> micro_factors(const MacroRisk& macro, double macro_scr) {
  std::vector<double> scrs;
  scrs.reserve(macro.micros.size());
  for (const auto& m : macro.micros) scrs.push_back(m.scr);
  if (macro_scr > 0.0) {
    std::vector<double> f = correlated_sums(scrs, macro.corr);
    for (double& x : f) x /= macro_scr;
    return f;
  }
  for (const auto& m : macro.micros) {
    if (m.scr > 0.0) {
      throw Error(ErrorKind::ZeroMacroScr, micro_path(macro.id, m.id),
                  "macro SCR is zero while a micro-risk has positive SCR");
    }
  }
  return std::vector<double>(macro.micros.size(), 1.0);
}

void check_shape(const RiskTree& tree, const AggregationOutput& agg) {
  if (agg.macro_scrs.size() != tree.macros.size()) {
    throw Error(ErrorKind::DimensionMismatch, tree.name,
                "aggregation output does not belong to this tree");
  }
}

}  // namespace

const MacroAllocation* AllocationResult::find_macro(const std::string& id) const {
  for (const auto& m : macros)
    if (m.id == id) return &m;
  return nullptr;
}

const MicroAllocation* AllocationResult::find_micro(const std::string& path) const {
  for (const auto& m : micros)
    if (m.path() == path) return &m;
  return nullptr;
}

std::vector<MacroAllocation> allocate_macro(const RiskTree& tree, const AggregationOutput& agg) {
  check_shape(tree, agg);
  const std::vector<double> g = macro_gradient(tree, agg);
  std::vector<MacroAllocation> out;
  out.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double standalone = agg.macro_scrs[i].scr;
    out.push_back({agg.macro_scrs[i].id, standalone, standalone * g[i], g[i]});
  }
  return out;
}

std::vector<MicroAllocation> allocate_micro(const RiskTree& tree, const AggregationOutput& agg,
                                            std::span<const MacroAllocation> macro_alloc) {
  check_shape(tree, agg);
  if (macro_alloc.size() != tree.macros.size()) {
    throw Error(ErrorKind::DimensionMismatch, tree.name,
                "macro allocation does not belong to this tree");
  }
  std::vector<MicroAllocation> out;
  out.reserve(tree.micro_count());
  for (std::size_t i = 0; i < tree.macros.size(); ++i) {
    const MacroRisk& macro = tree.macros[i];
    const std::vector<double> f = micro_factors(macro, agg.macro_scrs[i].scr);
    const double ratio = macro_alloc[i].ratio;
    for (std::size_t x = 0; x < macro.micros.size(); ++x) {
      const double s = macro.micros[x].scr;
      out.push_back({macro.id, macro.micros[x].id, s, s * f[x] * ratio});
    }
  }
  return out;
}

AllocationResult allocate(const RiskTree& tree, const Tolerances& tol) {
  const AggregationOutput agg = aggregate_tree(tree, tol);
  AllocationResult result;
  result.total_scr = agg.total_scr;
  result.macros = allocate_macro(tree, agg);
  result.micros = allocate_micro(tree, agg, result.macros);
  return result;
}

std::vector<double> gradient(const RiskTree& tree, const Tolerances& tol) {
  const AggregationOutput agg = aggregate_tree(tree, tol);
  const std::vector<double> g = macro_gradient(tree, agg);
  std::vector<double> out;
  out.reserve(tree.micro_count());
  for (std::size_t i = 0; i < tree.macros.size(); ++i) {
    for (double f : micro_factors(tree.macros[i], agg.macro_scrs[i].scr)) out.push_back(g[i] * f);
  }
  return out;
}

DiversificationReport diversification_report(const AllocationResult& result) {
  DiversificationReport report;
  report.total_scr = result.total_scr;
  for (const auto& m : result.macros) {
    report.macros.push_back({m.id, m.standalone, m.allocated, m.standalone - m.allocated});
    report.standalone_total += m.standalone;
  }
  for (const auto& m : result.micros) {
    report.micros.push_back({m.path(), m.standalone, m.allocated, m.standalone - m.allocated});
  }
  report.total_diversification = report.standalone_total - result.total_scr;
  return report;
}

}  // namespace scralloc
