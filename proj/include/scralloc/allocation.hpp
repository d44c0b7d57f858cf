#pragma once

#include <span>
#include <string>
#include <vector>

#include "scralloc/aggregation.hpp"
#include "scralloc/risk_model.hpp"

namespace scralloc {

// Euler allocation of the total SCR to macro-risks:
//
//   SCR(Y_i|Y) = SCR_i * (sum_w SCR_w rho_iw) / SCR
//
// `ratio` is the Allocation Ratio AR_i = SCR(Y_i|Y) / SCR_i, i.e. the
// partial derivative dSCR/dSCR_i. When SCR_i = 0 the ratio is that partial
// derivative itself, so it stays defined and the allocation is zero.
struct MacroAllocation {
  std::string id;
  double standalone = 0.0;
  double allocated = 0.0;
  double ratio = 0.0;

  double diversification() const { return standalone - allocated; }
};

// Euler allocation of a macro-risk's allocated SCR to its micro-risks:
//
//   SCR(Y_ix|Y,Y_i) = SCR_ix * (sum_y SCR_iy rho_ix,iy) / SCR_i * AR_i
struct MicroAllocation {
  std::string macro_id;
  std::string micro_id;
  double standalone = 0.0;
  double allocated = 0.0;

  std::string path() const { return micro_path(macro_id, micro_id); }
};

struct AllocationResult {
  std::vector<MacroAllocation> macros;
  std::vector<MicroAllocation> micros;
  double total_scr = 0.0;

  const MacroAllocation* find_macro(const std::string& id) const;
  const MicroAllocation* find_micro(const std::string& path) const;
};

std::vector<MacroAllocation> allocate_macro(const RiskTree& tree, const AggregationOutput& agg);

std::vector<MicroAllocation> allocate_micro(const RiskTree& tree, const AggregationOutput& agg,
                                            std::span<const MacroAllocation> macro_alloc);

// aggregate_tree + allocate_macro + allocate_micro.
AllocationResult allocate(const RiskTree& tree, const Tolerances& tol = {});

// dSCR/dSCR_ix for every micro-risk, in RiskTree::micro_scrs() order.
// At a zero SCR_i the one-sided derivative along the micro axis is used.
std::vector<double> gradient(const RiskTree& tree, const Tolerances& tol = {});

struct DiversificationRow {
  std::string path;
  double standalone = 0.0;
  double allocated = 0.0;
  double delta = 0.0;
};

struct DiversificationReport {
  std::vector<DiversificationRow> macros;
  std::vector<DiversificationRow> micros;
  double standalone_total = 0.0;  // sum of standalone macro SCRs
  double total_scr = 0.0;
  double total_diversification = 0.0;
};

DiversificationReport diversification_report(const AllocationResult& result);

}  // namespace scralloc
