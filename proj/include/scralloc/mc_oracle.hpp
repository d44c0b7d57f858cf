#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "scralloc/risk_model.hpp"

namespace scralloc {

enum class PsdRepair { Off, ClipEigenvalues };

// How micro-risks of different macro-risks are correlated in the normal
// loss model.
//  - MacroFactor: Cov(Y_ix, Y_wy) = rho_iw * b_ix * b_wy, with b_ix the
//    covariance of Y_ix with the normalized macro total Y_i / sigma_i. This
//    reproduces the two-level square-root aggregate exactly.
//  - Uniform: corr(Y_ix, Y_wy) = rho_iw. Matches the aggregate only when every
//    within-macro correlation is 1.
enum class CrossBlockModel { MacroFactor, Uniform };

struct McConfig {
  std::size_t sample_count = 1'000'000;
  std::uint64_t seed = 20240601;
  double var_level = 0.995;
  double window_fraction = 0.001;
  PsdRepair psd_repair = PsdRepair::Off;
  CrossBlockModel cross_block = CrossBlockModel::MacroFactor;
  unsigned threads = 0;  // 0: hardware concurrency; results do not depend on it

  void validate() const;
};

// Covariance of the micro-level unexpected losses, row-major.
struct Covariance {
  std::vector<std::string> labels;        // micro paths
  std::vector<std::size_t> group;         // macro index per coordinate
  std::vector<std::string> group_labels;  // macro ids
  std::vector<double> values;

  std::size_t dim() const noexcept { return labels.size(); }
  double operator()(std::size_t i, std::size_t j) const { return values[i * dim() + j]; }
};

// Copy of the tree with every non-PSD correlation matrix clipped to PSD.
RiskTree repair_tree(const RiskTree& tree, const Tolerances& tol = {});

// sigma_ix = SCR_ix / Phi^-1(0.995). Throws NotPsd when a correlation is not
// PSD and repair is off.
Covariance build_covariance(const RiskTree& tree, const McConfig& config = {},
                            const Tolerances& tol = {});

struct McEstimate {
  double var_estimate = 0.0;
  double var_se = 0.0;
  // Conditional means E[Y_ix | Y in window], per coordinate and per macro.
  std::vector<std::string> labels;
  std::vector<double> contributions;
  std::vector<double> contribution_se;
  std::vector<std::string> group_labels;
  std::vector<double> group_contributions;
  std::vector<double> group_se;
  double window_mean = 0.0;
  double window_se = 0.0;
  double window_lower = 0.0;
  double window_upper = 0.0;
  std::size_t window_count = 0;
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;
};

// Empirical var_level quantile of the portfolio sum.
McEstimate simulate_var(const Covariance& cov, const McConfig& config);

// simulate_var plus conditional-mean Euler contributions over the samples
// ranked within window_fraction * sample_count of the quantile.
// Throws EmptyWindow below 100 samples.
McEstimate estimate_contributions(const Covariance& cov, const McConfig& config);

struct ComparisonRow {
  std::string node;  // "<total>", macro id or micro path
  double closed_form = 0.0;
  double monte_carlo = 0.0;
  double se = 0.0;
  double z = 0.0;
  bool flagged = false;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  std::uint64_t seed = 0;
  std::size_t sample_count = 0;
  std::size_t window_count = 0;
  bool repaired = false;

  bool any_flagged() const;
};

// Closed-form SCR and Euler allocations against the simulation; rows beyond
// `flag_sigmas` standard errors are flagged.
ComparisonReport compare_with_closed_form(const RiskTree& tree, const McConfig& config,
                                          double flag_sigmas = 4.0, const Tolerances& tol = {});

}  // namespace scralloc
