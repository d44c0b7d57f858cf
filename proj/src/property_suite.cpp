#include "scralloc/property_suite.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "scralloc/aggregation.hpp"
#include "scralloc/allocation.hpp"
#include "scralloc/error.hpp"

namespace scralloc {

namespace {

double relative(double error, double scale) {
  return scale > 0.0 ? std::abs(error) / scale : std::abs(error);
}

std::vector<double> macro_scrs_of(const RiskTree& tree, std::size_t i) {
  std::vector<double> s;
  for (const auto& m : tree.macros[i].micros) s.push_back(m.scr);
  return s;
}

bool all_nonnegative(const CorrelationMatrix& corr) {
  return std::all_of(corr.entries().begin(), corr.entries().end(), [](double v) { return v >= 0.0; });
}

PropertyResult finish(std::string id, double worst, double tolerance, std::string detail) {
  PropertyResult r;
  r.id = std::move(id);
  r.worst = worst;
  r.tolerance = tolerance;
  r.status = worst <= tolerance ? PropertyStatus::Pass : PropertyStatus::Fail;
  r.detail = std::move(detail);
  return r;
}

PropertyResult not_applicable(std::string id, std::string detail) {
  PropertyResult r;
  r.id = std::move(id);
  r.status = PropertyStatus::NotApplicable;
  r.detail = std::move(detail);
  return r;
}

PropertyResult full_allocation(const AllocationResult& alloc, double tol) {
  double macro_sum = 0.0;
  for (const auto& m : alloc.macros) macro_sum += m.allocated;
  double worst = relative(macro_sum - alloc.total_scr, alloc.total_scr);
  std::string where = "<total>";
  for (const auto& m : alloc.macros) {
    double micro_sum = 0.0;
    for (const auto& x : alloc.micros)
      if (x.macro_id == m.id) micro_sum += x.allocated;
    const double err = relative(micro_sum - m.allocated, std::abs(m.allocated));
    if (err > worst) {
      worst = err;
      where = m.id;
    }
  }
  return finish("full_allocation", worst, tol, "worst at " + where);
}

PropertyResult euler_gradient(const RiskTree& tree, const PropertyOptions& opt, const Tolerances& tol) {
  const std::vector<double> analytic = gradient(tree, tol);
  const std::vector<double> s = tree.micro_scrs();
  double max_abs = 0.0;
  double max_s = 0.0;
  for (double g : analytic) max_abs = std::max(max_abs, std::abs(g));
  for (double v : s) max_s = std::max(max_s, v);
  double worst = 0.0;
  std::string where;
  const auto paths = tree.micro_paths();
  for (std::size_t k = 0; k < s.size(); ++k) {
    std::vector<double> up = s;
    std::vector<double> down = s;
    double fd = 0.0;
    if (s[k] > 0.0) {
      const double h = opt.fd_step * s[k];
      up[k] += h;
      down[k] -= h;
      fd = (aggregate_tree(tree.with_micro_scrs(up), tol).total_scr -
            aggregate_tree(tree.with_micro_scrs(down), tol).total_scr) /
           (2.0 * h);
    } else {
      // One-sided at the boundary of the domain.
      const double h = opt.fd_step * std::max(max_s, 1.0);
      up[k] += h;
      fd = (aggregate_tree(tree.with_micro_scrs(up), tol).total_scr - aggregate_tree(tree, tol).total_scr) / h;
    }
    const double err = relative(fd - analytic[k], std::max(std::abs(analytic[k]), max_abs));
    if (err > worst) {
      worst = err;
      where = paths[k];
    }
  }
  return finish("euler_gradient", worst, opt.fd_tolerance, where.empty() ? "" : "worst at " + where);
}

PropertyResult homogeneity(const RiskTree& tree, const AllocationResult& base, const PropertyOptions& opt,
                           const Tolerances& tol) {
  const std::vector<double> s = tree.micro_scrs();
  double worst = 0.0;
  for (double lambda : {0.5, 2.0, 1024.0, 3.0}) {
    std::vector<double> scaled = s;
    for (double& v : scaled) v *= lambda;
    const AllocationResult a = allocate(tree.with_micro_scrs(scaled), tol);
    const double scale = lambda * base.total_scr;
    worst = std::max(worst, relative(a.total_scr - lambda * base.total_scr, scale));
    for (std::size_t i = 0; i < a.macros.size(); ++i) {
      worst = std::max(worst, relative(a.macros[i].allocated - lambda * base.macros[i].allocated, scale));
    }
    for (std::size_t k = 0; k < a.micros.size(); ++k) {
      worst = std::max(worst, relative(a.micros[k].allocated - lambda * base.micros[k].allocated, scale));
    }
  }
  return finish("positive_homogeneity", worst, opt.homogeneity_tolerance, "lambda in {0.5, 2, 1024, 3}");
}

PropertyResult subadditivity(const RiskTree& tree, const AggregationOutput& agg, std::mt19937_64& rng,
                             const PropertyOptions& opt, const Tolerances& tol) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double scale = std::max(agg.total_scr, 1e-300);
  const bool cross_level = all_nonnegative(tree.corr);
  double worst = 0.0;
  auto excess = [&](std::span<const double> s, const CorrelationMatrix& corr) {
    std::vector<double> t(s.size());
    std::vector<double> u(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      t[k] = unit(rng) * s[k];
      u[k] = s[k] - t[k];
    }
    const double gap = aggregate_level(s, corr, {}, tol) - aggregate_level(t, corr, {}, tol) -
                       aggregate_level(u, corr, {}, tol);
    return gap / scale;
  };
  const std::vector<double> v = agg.macro_values();
  const std::vector<double> s = tree.micro_scrs();
  for (int trial = 0; trial < opt.trials; ++trial) {
    worst = std::max(worst, excess(v, tree.corr));
    for (std::size_t i = 0; i < tree.macros.size(); ++i) {
      worst = std::max(worst, excess(macro_scrs_of(tree, i), tree.macros[i].corr));
    }
    if (cross_level) {
      std::vector<double> t(s.size());
      std::vector<double> u(s.size());
      for (std::size_t k = 0; k < s.size(); ++k) {
        t[k] = unit(rng) * s[k];
        u[k] = s[k] - t[k];
      }
      const double gap = agg.total_scr - aggregate_tree(tree.with_micro_scrs(t), tol).total_scr -
                         aggregate_tree(tree.with_micro_scrs(u), tol).total_scr;
      worst = std::max(worst, gap / scale);
    }
  }
  return finish("subadditivity", worst, opt.coherence_tolerance,
                cross_level ? "per level and across levels"
                            : "per level; across levels not applicable (negative macro correlation)");
}

PropertyResult marginal_no_undercut(const AllocationResult& alloc, const PropertyOptions& opt) {
  const double scale = std::max(alloc.total_scr, 1e-300);
  double worst = 0.0;
  std::string where;
  auto check = [&](double allocated, double standalone, const std::string& path) {
    const double excess = (allocated - standalone) / scale;
    if (excess > worst) {
      worst = excess;
      where = path;
    }
  };
  for (const auto& m : alloc.macros) check(m.allocated, m.standalone, m.id);
  for (const auto& m : alloc.micros) check(m.allocated, m.standalone, m.path());
  return finish("no_undercut_marginal", worst, opt.coherence_tolerance, where.empty() ? "" : "worst at " + where);
}

PropertyResult subset_no_undercut(const RiskTree& tree, const AggregationOutput& agg, const AllocationResult& alloc,
                                  std::mt19937_64& rng, const PropertyOptions& opt, const Tolerances& tol) {
  std::bernoulli_distribution coin(0.5);
  const double scale = std::max(agg.total_scr, 1e-300);
  const bool cross_level = all_nonnegative(tree.corr);
  const std::vector<double> v = agg.macro_values();
  const std::vector<double> s = tree.micro_scrs();
  double worst = 0.0;

  // Within-level Euler shares of one aggregation step: s_k (R s)_k / f(s).
  auto level_subset = [&](std::span<const double> values, const CorrelationMatrix& corr, double total) {
    if (!(total > 0.0)) return 0.0;
    const std::vector<double> w = correlated_sums(values, corr);
    std::vector<double> masked(values.size(), 0.0);
    double share = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (coin(rng)) {
        masked[k] = values[k];
        share += values[k] * w[k] / total;
      }
    }
    return (share - aggregate_level(masked, corr, {}, tol)) / std::max(total, 1e-300);
  };

  for (int trial = 0; trial < opt.trials; ++trial) {
    worst = std::max(worst, level_subset(v, tree.corr, agg.total_scr));
    for (std::size_t i = 0; i < tree.macros.size(); ++i) {
      worst = std::max(worst, level_subset(macro_scrs_of(tree, i), tree.macros[i].corr, v[i]));
    }
    if (cross_level) {
      std::vector<double> masked(s.size(), 0.0);
      double share = 0.0;
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (coin(rng)) {
          masked[k] = s[k];
          share += alloc.micros[k].allocated;
        }
      }
      worst = std::max(worst, (share - aggregate_tree(tree.with_micro_scrs(masked), tol).total_scr) / scale);
    }
  }
  return finish("no_undercut_subset", worst, opt.coherence_tolerance,
                cross_level ? "per level and across levels"
                            : "per level; across levels not applicable (negative macro correlation)");
}

// Equal standalone SCR and identical correlation rows (up to the swap) must
// give equal allocations.
PropertyResult symmetry(const RiskTree& tree, const AllocationResult& alloc) {
  int pairs = 0;
  double worst = 0.0;
  auto twins = [](const CorrelationMatrix& corr, std::span<const double> values, std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return false;
    for (std::size_t k = 0; k < corr.dim(); ++k) {
      if (k == a || k == b) continue;
      if (corr(a, k) != corr(b, k)) return false;
    }
    return true;
  };
  const std::vector<double> v = [&] {
    std::vector<double> out;
    for (const auto& m : alloc.macros) out.push_back(m.standalone);
    return out;
  }();
  const double scale = std::max(alloc.total_scr, 1e-300);
  for (std::size_t a = 0; a < v.size(); ++a)
    for (std::size_t b = a + 1; b < v.size(); ++b)
      if (twins(tree.corr, v, a, b)) {
        ++pairs;
        worst = std::max(worst, std::abs(alloc.macros[a].allocated - alloc.macros[b].allocated) / scale);
      }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < tree.macros.size(); ++i) {
    const std::vector<double> s = macro_scrs_of(tree, i);
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = a + 1; b < s.size(); ++b)
        if (twins(tree.macros[i].corr, s, a, b)) {
          ++pairs;
          worst = std::max(worst,
                           std::abs(alloc.micros[offset + a].allocated - alloc.micros[offset + b].allocated) / scale);
        }
    offset += s.size();
  }
  if (pairs == 0) return not_applicable("symmetry", "no interchangeable pair of nodes");
  return finish("symmetry", worst, 1e-12, std::to_string(pairs) + " interchangeable pairs");
}

PropertyResult compatibility(const RiskTree& tree, const AllocationResult& alloc, const IncomeStats* income,
                             std::mt19937_64& rng, const PropertyOptions& opt, const Tolerances& tol) {
  IncomeStats synthetic;
  std::string source = "income file";
  if (income == nullptr) {
    std::uniform_real_distribution<double> r(-0.05, 0.25);
    for (const auto& m : alloc.micros) synthetic.entries.push_back({m.path(), r(rng) * m.standalone, std::nullopt});
    income = &synthetic;
    source = "synthetic incomes (seed " + std::to_string(opt.seed) + ")";
  }
  if (!(alloc.total_scr > 0.0)) return not_applicable("rorac_compatibility", "total SCR is zero");
  int tested = 0;
  int exceptions = 0;
  int non_positive = 0;
  std::string first;
  for (const auto& e : income->entries) {
    const CompatibilityVerdict v = check_rorac_compatibility(tree, *income, e.node, {opt.compatibility_h}, {}, tol);
    if (!v.in_domain) ++non_positive;
    if (!v.sign_applicable) continue;
    ++tested;
    if (!v.sign_consistent || !v.pass) {
      ++exceptions;
      if (first.empty()) first = e.node;
    }
  }
  PropertyResult r = finish("rorac_compatibility", exceptions, 0.0,
                            std::to_string(tested) + " nodes, " + source +
                                (non_positive ? ", " + std::to_string(non_positive) + " without positive capital skipped"
                                              : std::string()) +
                                (first.empty() ? std::string() : ", first exception at " + first));
  return r;
}

}  // namespace

std::string_view to_string(PropertyStatus status) {
  switch (status) {
    case PropertyStatus::Pass: return "pass";
    case PropertyStatus::Fail: return "FAIL";
    case PropertyStatus::NotApplicable: return "not applicable";
  }
  return "?";
}

bool PropertyReport::passed() const {
  return std::none_of(results.begin(), results.end(),
                      [](const PropertyResult& r) { return r.status == PropertyStatus::Fail; });
}

const PropertyResult* PropertyReport::find(const std::string& id) const {
  for (const auto& r : results)
    if (r.id == id) return &r;
  return nullptr;
}

PropertyReport check_properties(const RiskTree& tree, const IncomeStats* income, const PropertyOptions& options,
                                const Tolerances& tol) {
  std::mt19937_64 rng(options.seed);
  const bool psd = tree_is_psd(tree, tol);
  if (income) validate_income(tree, *income);
  PropertyReport report;

  AggregationOutput agg;
  AllocationResult alloc;
  try {
    agg = aggregate_tree(tree, tol);
    alloc = allocate(tree, tol);
  } catch (const Error& e) {
    if (psd || e.kind() != ErrorKind::NegativeRadicand) throw;
    // The square-root aggregate itself does not exist for this input.
    for (const char* id : {"full_allocation", "euler_gradient", "positive_homogeneity", "subadditivity",
                           "no_undercut_marginal", "no_undercut_subset", "symmetry", "rorac_compatibility"}) {
      report.results.push_back(not_applicable(id, "correlation not PSD, aggregate undefined"));
    }
    return report;
  }

  report.results.push_back(full_allocation(alloc, options.allocation_tolerance));
  if (agg.total_scr > 0.0) {
    report.results.push_back(euler_gradient(tree, options, tol));
    report.results.push_back(homogeneity(tree, alloc, options, tol));
  } else {
    report.results.push_back(not_applicable("euler_gradient", "total SCR is zero"));
    report.results.push_back(not_applicable("positive_homogeneity", "total SCR is zero"));
  }
  if (psd) {
    report.results.push_back(subadditivity(tree, agg, rng, options, tol));
    report.results.push_back(marginal_no_undercut(alloc, options));
    report.results.push_back(subset_no_undercut(tree, agg, alloc, rng, options, tol));
  } else {
    const std::string why = "correlation not PSD";
    report.results.push_back(not_applicable("subadditivity", why));
    report.results.push_back(not_applicable("no_undercut_marginal", why));
    report.results.push_back(not_applicable("no_undercut_subset", why));
  }
  report.results.push_back(symmetry(tree, alloc));
  report.results.push_back(compatibility(tree, alloc, income, rng, options, tol));
  return report;
}

}  // namespace scralloc
