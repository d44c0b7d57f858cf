#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scralloc/risk_model.hpp"

namespace scralloc {

// Standard normal quantile at 0.995. SCR = kQuantile995 * sigma under the
// normal loss model.
inline constexpr double kQuantile995 = 2.5758293035489004;

struct MacroScr {
  std::string id;
  double scr = 0.0;
};

struct AggregationOutput {
  std::vector<MacroScr> macro_scrs;
  double total_scr = 0.0;

  std::vector<double> macro_values() const;
};

// R * s, the correlation-weighted sums that appear in both the aggregate and
// its gradient. Compensated summation above 64 terms.
std::vector<double> correlated_sums(std::span<const double> scrs, const CorrelationMatrix& corr);

// sqrt(s' R s). The radicand may dip below zero only within
// tol.radicand * (sum s)^2, otherwise NegativeRadicand is thrown with `path`.
double aggregate_level(std::span<const double> scrs, const CorrelationMatrix& corr,
                       std::string_view path = {}, const Tolerances& tol = {});

// Micro -> macro -> total square-root aggregation.
AggregationOutput aggregate_tree(const RiskTree& tree, const Tolerances& tol = {});

// Standard deviation consistent with a 99.5% normal quantile.
double implied_sigma(double scr);

}  // namespace scralloc
