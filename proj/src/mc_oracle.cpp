#include "scralloc/mc_oracle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include "scralloc/aggregation.hpp"
#include "scralloc/allocation.hpp"
#include "scralloc/error.hpp"

namespace scralloc {

namespace {

constexpr std::size_t kChunkSize = 1 << 16;
constexpr std::size_t kMinWindow = 100;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Each chunk of samples draws from its own stream, so output is independent
// of how chunks are spread over threads.
std::mt19937_64 chunk_engine(std::uint64_t seed, std::size_t chunk) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(chunk))));
}

template <class Fn>
void for_each_chunk(std::size_t chunks, unsigned threads, Fn&& fn) {
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) fn(c);
    });
  }
  for (auto& t : pool) t.join();
}

Eigen::MatrixXd to_eigen(const Covariance& cov) {
  const auto n = static_cast<Eigen::Index>(cov.dim());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = cov(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  return m;
}

// Symmetric square root factor A with A A' = cov (negative rounding noise in
// the spectrum is dropped).
Eigen::MatrixXd square_root_factor(const Covariance& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(cov));
  const Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal();
}

double min_eigen_of_correlation(const Covariance& cov) {
  const std::size_t n = cov.dim();
  Eigen::MatrixXd c = to_eigen(cov);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = std::sqrt(cov(i, i) * cov(j, j));
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      c(ii, jj) = d > 0.0 ? cov(i, j) / d : (i == j ? 1.0 : 0.0);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

void clip_covariance(Covariance& cov) {
  const std::size_t n = cov.dim();
  std::vector<double> sigma(n);
  std::vector<double> corr(n * n);
  for (std::size_t i = 0; i < n; ++i) sigma[i] = std::sqrt(cov(i, i));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double d = sigma[i] * sigma[j];
      corr[i * n + j] = i == j ? 1.0 : (d > 0.0 ? cov(i, j) / d : 0.0);
    }
  const CorrelationMatrix repaired = clip_to_psd(CorrelationMatrix(n, std::move(corr)));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cov.values[i * n + j] = repaired(i, j) * sigma[i] * sigma[j];
}

struct Quantiles {
  double var = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double se = 0.0;
};

// Pass 1: portfolio sums of every sample, then order statistics.
Quantiles portfolio_quantiles(const Eigen::RowVectorXd& sum_row, const McConfig& config) {
  const std::size_t n = config.sample_count;
  const std::size_t dim = static_cast<std::size_t>(sum_row.size());
  std::vector<double> sums(n);
  const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
  for_each_chunk(chunks, config.threads, [&](std::size_t c) {
    auto engine = chunk_engine(config.seed, c);
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(static_cast<Eigen::Index>(dim));
    const std::size_t end = std::min(n, (c + 1) * kChunkSize);
    for (std::size_t s = c * kChunkSize; s < end; ++s) {
      for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(engine);
      sums[s] = sum_row.dot(z);
    }
  });

  const double p = config.var_level;
  const auto rank = static_cast<std::size_t>(
      std::clamp<double>(std::ceil(p * static_cast<double>(n)) - 1.0, 0.0, static_cast<double>(n - 1)));
  const auto width = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.window_fraction * static_cast<double>(n))));
  std::size_t lo = rank >= (width - 1) / 2 ? rank - (width - 1) / 2 : 0;
  std::size_t hi = std::min(n - 1, lo + width - 1);
  lo = hi + 1 >= width ? hi + 1 - width : 0;

  std::nth_element(sums.begin(), sums.begin() + static_cast<std::ptrdiff_t>(rank), sums.end());
  Quantiles q;
  q.var = sums[rank];
  if (lo < rank) {
    std::nth_element(sums.begin(), sums.begin() + static_cast<std::ptrdiff_t>(lo),
                     sums.begin() + static_cast<std::ptrdiff_t>(rank));
  }
  q.lower = sums[lo];
  if (hi > rank) {
    std::nth_element(sums.begin() + static_cast<std::ptrdiff_t>(rank) + 1,
                     sums.begin() + static_cast<std::ptrdiff_t>(hi), sums.end());
  }
  q.upper = sums[hi];

  // Order-statistic asymptotics: sqrt(p(1-p)/n) / f(q), with the density
  // estimated from the spacing of the window quantiles.
  const double spread = q.upper - q.lower;
  if (spread > 0.0 && hi > lo) {
    const double density = (static_cast<double>(hi - lo) / static_cast<double>(n)) / spread;
    q.se = std::sqrt(p * (1.0 - p) / static_cast<double>(n)) / density;
  }
  return q;
}

struct WindowAccumulator {
  std::size_t count = 0;
  std::vector<double> sum;
  std::vector<double> sum_sq;
  std::vector<double> group_sum;
  std::vector<double> group_sum_sq;
  double total = 0.0;
  double total_sq = 0.0;

  WindowAccumulator(std::size_t dim, std::size_t groups)
      : sum(dim), sum_sq(dim), group_sum(groups), group_sum_sq(groups) {}
};

double standard_error(double sum, double sum_sq, std::size_t count) {
  const double n = static_cast<double>(count);
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean) * n / std::max(1.0, n - 1.0);
  return std::sqrt(var / n);
}

}  // namespace

void McConfig::validate() const {
  if (sample_count == 0) throw Error(ErrorKind::InvalidInput, "mc", "sample_count must be > 0");
  if (!(var_level > 0.0 && var_level < 1.0)) {
    throw Error(ErrorKind::InvalidInput, "mc", "var_level must lie in (0,1)");
  }
  if (!(window_fraction > 0.0 && window_fraction <= 0.05)) {
    throw Error(ErrorKind::InvalidInput, "mc", "window_fraction must lie in (0,0.05]");
  }
}

RiskTree repair_tree(const RiskTree& tree, const Tolerances& tol) {
  RiskTree out = tree;
  if (!is_psd(out.corr, tol)) out.corr = clip_to_psd(out.corr);
  for (auto& m : out.macros) {
    if (!is_psd(m.corr, tol)) m.corr = clip_to_psd(m.corr);
  }
  return out;
}

Covariance build_covariance(const RiskTree& input, const McConfig& config, const Tolerances& tol) {
  const ValidationReport report = validate_tree(input, tol);
  if (report.has_errors()) {
    const Violation& v = *std::find_if(report.violations.begin(), report.violations.end(),
                                       [](const Violation& x) { return x.severity == Severity::Error; });
    throw Error(ErrorKind::InvalidInput, v.path, v.message);
  }
  RiskTree tree = input;
  if (!tree_is_psd(tree, tol)) {
    if (config.psd_repair == PsdRepair::Off) {
      std::string where = tree.name;
      if (is_psd(tree.corr, tol)) {
        for (const auto& m : tree.macros)
          if (!is_psd(m.corr, tol)) {
            where = m.id;
            break;
          }
      }
      throw Error(ErrorKind::NotPsd, where, "correlation matrix is not PSD and repair is off");
    }
    tree = repair_tree(tree, tol);
  }

  Covariance cov;
  std::vector<double> sigma;
  for (std::size_t i = 0; i < tree.macros.size(); ++i) {
    const MacroRisk& macro = tree.macros[i];
    cov.group_labels.push_back(macro.id);
    for (const auto& micro : macro.micros) {
      cov.labels.push_back(micro_path(macro.id, micro.id));
      cov.group.push_back(i);
      sigma.push_back(implied_sigma(micro.scr));
    }
  }
  const std::size_t n = cov.labels.size();
  cov.values.assign(n * n, 0.0);

  // Loadings of each micro on its normalized macro total.
  std::vector<double> loading(n, 0.0);
  std::size_t offset = 0;
  for (const auto& macro : tree.macros) {
    const std::size_t m = macro.micros.size();
    double variance = 0.0;
    for (std::size_t x = 0; x < m; ++x) {
      double row = 0.0;
      for (std::size_t y = 0; y < m; ++y) {
        const double c = macro.corr(x, y) * sigma[offset + x] * sigma[offset + y];
        cov.values[(offset + x) * n + offset + y] = c;
        row += c;
      }
      loading[offset + x] = row;
      variance += row;
    }
    const double macro_sigma = std::sqrt(std::max(variance, 0.0));
    for (std::size_t x = 0; x < m; ++x) {
      loading[offset + x] = macro_sigma > 0.0 ? loading[offset + x] / macro_sigma : 0.0;
    }
    offset += m;
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t gi = cov.group[a];
      const std::size_t gw = cov.group[b];
      if (gi == gw) continue;
      const double rho = tree.corr(gi, gw);
      cov.values[a * n + b] = config.cross_block == CrossBlockModel::MacroFactor
                                  ? rho * loading[a] * loading[b]
                                  : rho * sigma[a] * sigma[b];
    }
  }

  if (config.cross_block == CrossBlockModel::Uniform && n > 0 &&
      min_eigen_of_correlation(cov) < -tol.psd) {
    if (config.psd_repair == PsdRepair::Off) {
      throw Error(ErrorKind::NotPsd, tree.name,
                  "uniform cross-block covariance is not PSD and repair is off");
    }
    clip_covariance(cov);
  }
  return cov;
}

McEstimate simulate_var(const Covariance& cov, const McConfig& config) {
  config.validate();
  const Eigen::MatrixXd factor = square_root_factor(cov);
  const Eigen::RowVectorXd sum_row = factor.colwise().sum();
  const Quantiles q = portfolio_quantiles(sum_row, config);

  McEstimate est;
  est.var_estimate = q.var;
  est.var_se = q.se;
  est.window_lower = q.lower;
  est.window_upper = q.upper;
  est.sample_count = config.sample_count;
  est.seed = config.seed;
  est.labels = cov.labels;
  est.group_labels = cov.group_labels;
  return est;
}

McEstimate estimate_contributions(const Covariance& cov, const McConfig& config) {
  config.validate();
  const Eigen::MatrixXd factor = square_root_factor(cov);
  const Eigen::RowVectorXd sum_row = factor.colwise().sum();
  const Quantiles q = portfolio_quantiles(sum_row, config);

  const std::size_t n = config.sample_count;
  const std::size_t dim = cov.dim();
  const std::size_t groups = cov.group_labels.size();
  const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
  std::vector<WindowAccumulator> partial(chunks, WindowAccumulator(dim, groups));

  // Pass 2: regenerate the same draws and keep those inside the window.
  for_each_chunk(chunks, config.threads, [&](std::size_t c) {
    auto engine = chunk_engine(config.seed, c);
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(static_cast<Eigen::Index>(dim));
    Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
    std::vector<double> group_total(groups);
    WindowAccumulator& acc = partial[c];
    const std::size_t end = std::min(n, (c + 1) * kChunkSize);
    for (std::size_t s = c * kChunkSize; s < end; ++s) {
      for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(engine);
      const double total = sum_row.dot(z);
      if (total < q.lower || total > q.upper) continue;
      x.noalias() = factor * z;
      std::fill(group_total.begin(), group_total.end(), 0.0);
      for (std::size_t k = 0; k < dim; ++k) {
        const double v = x(static_cast<Eigen::Index>(k));
        acc.sum[k] += v;
        acc.sum_sq[k] += v * v;
        group_total[cov.group[k]] += v;
      }
      for (std::size_t g = 0; g < groups; ++g) {
        acc.group_sum[g] += group_total[g];
        acc.group_sum_sq[g] += group_total[g] * group_total[g];
      }
      acc.total += total;
      acc.total_sq += total * total;
      ++acc.count;
    }
  });

  WindowAccumulator merged(dim, groups);
  for (const auto& p : partial) {
    merged.count += p.count;
    for (std::size_t k = 0; k < dim; ++k) {
      merged.sum[k] += p.sum[k];
      merged.sum_sq[k] += p.sum_sq[k];
    }
    for (std::size_t g = 0; g < groups; ++g) {
      merged.group_sum[g] += p.group_sum[g];
      merged.group_sum_sq[g] += p.group_sum_sq[g];
    }
    merged.total += p.total;
    merged.total_sq += p.total_sq;
  }
  if (merged.count < kMinWindow) {
    std::ostringstream msg;
    msg << merged.count << " samples in the conditional window, need at least " << kMinWindow;
    throw Error(ErrorKind::EmptyWindow, "mc", msg.str());
  }

  McEstimate est;
  est.var_estimate = q.var;
  est.var_se = q.se;
  est.window_lower = q.lower;
  est.window_upper = q.upper;
  est.window_count = merged.count;
  est.sample_count = n;
  est.seed = config.seed;
  est.labels = cov.labels;
  est.group_labels = cov.group_labels;
  const double count = static_cast<double>(merged.count);
  for (std::size_t k = 0; k < dim; ++k) {
    est.contributions.push_back(merged.sum[k] / count);
    est.contribution_se.push_back(standard_error(merged.sum[k], merged.sum_sq[k], merged.count));
  }
  for (std::size_t g = 0; g < groups; ++g) {
    est.group_contributions.push_back(merged.group_sum[g] / count);
    est.group_se.push_back(standard_error(merged.group_sum[g], merged.group_sum_sq[g], merged.count));
  }
  est.window_mean = merged.total / count;
  est.window_se = standard_error(merged.total, merged.total_sq, merged.count);
  return est;
}

bool ComparisonReport::any_flagged() const {
  return std::any_of(rows.begin(), rows.end(), [](const ComparisonRow& r) { return r.flagged; });
}

ComparisonReport compare_with_closed_form(const RiskTree& input, const McConfig& config,
                                          double flag_sigmas, const Tolerances& tol) {
  const Covariance cov = build_covariance(input, config, tol);
  const bool repaired = !tree_is_psd(input, tol);
  const RiskTree tree = repaired ? repair_tree(input, tol) : input;
  const AllocationResult closed = allocate(tree, tol);
  const McEstimate mc = estimate_contributions(cov, config);

  ComparisonReport report;
  report.seed = config.seed;
  report.sample_count = config.sample_count;
  report.window_count = mc.window_count;
  report.repaired = repaired;
  const double scale = std::max(1.0, closed.total_scr);
  auto row = [&](std::string node, double closed_value, double mc_value, double se) {
    ComparisonRow r{std::move(node), closed_value, mc_value, se, 0.0, false};
    const double diff = mc_value - closed_value;
    if (se > 0.0) {
      r.z = diff / se;
      r.flagged = std::abs(r.z) > flag_sigmas;
    } else {
      r.flagged = std::abs(diff) > 1e-9 * scale;
    }
    report.rows.push_back(std::move(r));
  };

  row("<total>", closed.total_scr, mc.var_estimate, mc.var_se);
  for (std::size_t g = 0; g < closed.macros.size(); ++g) {
    row(closed.macros[g].id, closed.macros[g].allocated, mc.group_contributions[g], mc.group_se[g]);
  }
  for (std::size_t k = 0; k < closed.micros.size(); ++k) {
    row(closed.micros[k].path(), closed.micros[k].allocated, mc.contributions[k],
        mc.contribution_se[k]);
  }
  return report;
}

}  // namespace scralloc
