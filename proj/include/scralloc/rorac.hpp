#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scralloc/allocation.hpp"
#include "scralloc/risk_model.hpp"

namespace scralloc {

// Expected one-year income of a node ("macro" or "macro/micro") and,
// optionally, its standard deviation.
struct IncomeEntry {
  std::string node;
  double expected = 0.0;
  std::optional<double> stdev;

  bool operator==(const IncomeEntry&) const = default;
};

struct IncomeStats {
  std::vector<IncomeEntry> entries;

  const IncomeEntry* find(const std::string& node) const;
  bool operator==(const IncomeStats&) const = default;
};

struct NodeRorac {
  std::string node;
  double allocated = 0.0;
  double expected_income = 0.0;
  std::optional<double> income_stdev;
  double expected_rorac = 0.0;
  std::optional<double> stdev_rorac;
  // sigma / E; undefined when E(RORAC) <= 0 or sigma is missing.
  std::optional<double> cv;
};

struct RoracReport {
  std::vector<NodeRorac> nodes;
  double total_capital = 0.0;
  double total_income = 0.0;
  double expected_rorac = 0.0;
  // Capital-weighted mean of node sigmas; present when every node has one.
  std::optional<double> stdev_rorac;

  const NodeRorac* find(const std::string& node) const;
};

// Allocated capital of a node path. Throws InvalidNode.
double allocated_capital(const AllocationResult& alloc, const std::string& node);

// Checks paths exist, are unique and do not nest (a macro and one of its
// micros cannot both carry income). Throws InvalidNode / InvalidInput.
void validate_income(const RiskTree& tree, const IncomeStats& income);

RoracReport compute_rorac(const AllocationResult& alloc, const IncomeStats& income);

struct CompatibilityPoint {
  double h = 0.0;
  double total_rorac = 0.0;  // portfolio RORAC after growing the node by (1+h)
  double delta = 0.0;        // change against the unperturbed portfolio
};

struct CompatibilityVerdict {
  std::string node;
  double node_rorac = 0.0;
  double total_rorac = 0.0;
  double allocated = 0.0;
  std::vector<CompatibilityPoint> points;
  // The rule is stated for nodes carrying positive capital. With negative
  // allocated capital growing the node moves total RORAC the other way, so
  // such nodes are reported but neither outperform nor get a sign check.
  bool in_domain = false;
  // RORAC_s > RORAC + margin, the antecedent of the compatibility rule.
  bool outperforms = false;
  // Implication held on every grid point (vacuous when !outperforms).
  bool pass = true;
  // sign(delta) == sign(RORAC_s - RORAC) on every point; only meaningful when
  // sign_applicable.
  bool sign_applicable = false;
  bool sign_consistent = true;
};

// Logarithmic grid of `points` values in (0, eps], from eps*1e-4 to eps.
std::vector<double> default_h_grid(double eps = 0.01, int points = 10);

struct CompatibilityOptions {
  double margin = 1e-12;
  double sign_threshold = 1e-6;
};

// Grows the node's standalone SCR and expected income by (1+h), re-aggregates
// and compares portfolio RORAC before and after.
CompatibilityVerdict check_rorac_compatibility(const RiskTree& tree, const IncomeStats& income,
                                               const std::string& node,
                                               const std::vector<double>& h_grid,
                                               const CompatibilityOptions& options = {},
                                               const Tolerances& tol = {});

}  // namespace scralloc
