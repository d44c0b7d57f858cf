#include "scralloc/aggregation.hpp"

#include <cmath>
#include <sstream>

#include "scralloc/error.hpp"

namespace scralloc {

namespace {

constexpr std::size_t kCompensatedAbove = 64;

// Neumaier summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() > kCompensatedAbove) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < a.size(); ++i) acc.add(a[i] * b[i]);
    return acc.value();
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void check_inputs(std::span<const double> scrs, const CorrelationMatrix& corr,
                  std::string_view path) {
  if (scrs.size() != corr.dim()) {
    std::ostringstream msg;
    msg << scrs.size() << " SCRs against a correlation of dimension " << corr.dim();
    throw Error(ErrorKind::DimensionMismatch, std::string(path), msg.str());
  }
  for (double s : scrs) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw Error(ErrorKind::InvalidInput, std::string(path), "SCR inputs must be finite and >= 0");
    }
  }
}

}  // namespace

std::vector<double> AggregationOutput::macro_values() const {
  std::vector<double> out;
  out.reserve(macro_scrs.size());
  for (const auto& m : macro_scrs) out.push_back(m.scr);
  return out;
}

std::vector<double> correlated_sums(std::span<const double> scrs, const CorrelationMatrix& corr) {
  check_inputs(scrs, corr, {});
  std::vector<double> out(scrs.size());
  for (std::size_t i = 0; i < scrs.size(); ++i) out[i] = dot(corr.row(i), scrs);
  return out;
}

double aggregate_level(std::span<const double> scrs, const CorrelationMatrix& corr,
                       std::string_view path, const Tolerances& tol) {
  check_inputs(scrs, corr, path);
  const std::vector<double> weighted = correlated_sums(scrs, corr);
  const double radicand = dot(scrs, weighted);
  if (radicand >= 0.0) return std::sqrt(radicand);

  double total = 0.0;
  for (double s : scrs) total += s;
  if (radicand >= -tol.radicand * total * total) return 0.0;
  std::ostringstream msg;
  msg << "quadratic form " << radicand << " is negative (correlation not PSD)";
  throw Error(ErrorKind::NegativeRadicand, std::string(path), msg.str());
}

AggregationOutput aggregate_tree(const RiskTree& tree, const Tolerances& tol) {
  AggregationOutput out;
  out.macro_scrs.reserve(tree.macros.size());
  std::vector<double> values;
  values.reserve(tree.macros.size());
  for (const auto& macro : tree.macros) {
    std::vector<double> scrs;
    scrs.reserve(macro.micros.size());
    for (const auto& micro : macro.micros) scrs.push_back(micro.scr);
    const double scr = aggregate_level(scrs, macro.corr, macro.id, tol);
    out.macro_scrs.push_back({macro.id, scr});
    values.push_back(scr);
  }
  out.total_scr = aggregate_level(values, tree.corr, tree.name.empty() ? "<tree>" : tree.name, tol);
  return out;
}

double implied_sigma(double scr) { return scr / kQuantile995; }

}  // namespace scralloc
