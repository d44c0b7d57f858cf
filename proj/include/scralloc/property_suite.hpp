#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scralloc/rorac.hpp"
#include "scralloc/risk_model.hpp"

namespace scralloc {

enum class PropertyStatus { Pass, Fail, NotApplicable };

std::string_view to_string(PropertyStatus status);

struct PropertyResult {
  std::string id;
  PropertyStatus status = PropertyStatus::Pass;
  double worst = 0.0;  // largest observed violation measure (relative)
  double tolerance = 0.0;
  std::string detail;
};

struct PropertyReport {
  std::vector<PropertyResult> results;

  bool passed() const;
  const PropertyResult* find(const std::string& id) const;
};

struct PropertyOptions {
  std::uint64_t seed = 1;
  int trials = 200;                     // random splits / subsets per property
  double fd_step = 1e-6;                // relative central-difference step
  double fd_tolerance = 1e-6;           // relative to the gradient's max norm
  double allocation_tolerance = 1e-9;   // full allocation, relative
  double coherence_tolerance = 1e-9;    // subadditivity / no-undercut, relative to total
  double homogeneity_tolerance = 1e-12;
  double compatibility_h = 1e-4;
};

// Runs the allocation property suite on one tree: full allocation, Euler
// gradient against finite differences, positive homogeneity, subadditivity,
// marginal and subset no-undercut, symmetry and the RORAC compatibility sign
// test. Coherence properties are "not applicable" on non-PSD input. Without
// `income`, incomes are drawn from the seed.
PropertyReport check_properties(const RiskTree& tree, const IncomeStats* income = nullptr,
                                const PropertyOptions& options = {}, const Tolerances& tol = {});

}  // namespace scralloc
