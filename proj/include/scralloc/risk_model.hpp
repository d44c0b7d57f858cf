#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace scralloc {

// Numeric tolerances shared by validation, aggregation and the oracles.
struct Tolerances {
  double symmetry = 1e-12;   // absolute, |r_ij - r_ji|
  double psd = 1e-10;        // min eigenvalue >= -psd marks a matrix PSD
  double radicand = 1e-9;    // relative to (sum of inputs)^2
};

// Dense square correlation matrix, row-major. Construction only checks the
// shape; content rules (symmetry, unit diagonal, range) are reported by
// validate_tree so that bad inputs can be diagnosed rather than rejected.
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  CorrelationMatrix(std::size_t dim, std::vector<double> entries);
  CorrelationMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static CorrelationMatrix identity(std::size_t dim);
  // All off-diagonal entries equal to rho.
  static CorrelationMatrix uniform(std::size_t dim, double rho);

  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * dim_ + j]; }
  std::span<const double> row(std::size_t i) const {
    return {entries_.data() + i * dim_, dim_};
  }
  const std::vector<double>& entries() const noexcept { return entries_; }

  bool operator==(const CorrelationMatrix&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> entries_;
};

struct MicroRisk {
  std::string id;
  std::string name;
  double scr = 0.0;

  bool operator==(const MicroRisk&) const = default;
};

struct MacroRisk {
  std::string id;
  std::string name;
  std::vector<MicroRisk> micros;
  CorrelationMatrix corr;

  bool operator==(const MacroRisk&) const = default;
};

// Two-level Standard Formula hierarchy: micro-risks aggregate into
// macro-risks, macro-risks aggregate into the company SCR.
struct RiskTree {
  std::string name;
  std::vector<MacroRisk> macros;
  CorrelationMatrix corr;

  std::size_t micro_count() const;
  // Standalone micro SCRs in tree order (macro-major).
  std::vector<double> micro_scrs() const;
  // Copy of the tree with micro SCRs replaced, in micro_scrs() order.
  RiskTree with_micro_scrs(std::span<const double> scrs) const;
  // "macro" or "macro/micro" for every micro leaf, in micro_scrs() order.
  std::vector<std::string> micro_paths() const;

  bool operator==(const RiskTree&) const = default;
};

std::string micro_path(const std::string& macro_id, const std::string& micro_id);

enum class Severity { Error, Warning };

struct Violation {
  std::string path;
  std::string rule;
  Severity severity = Severity::Error;
  std::string message;

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool empty() const noexcept { return violations.empty(); }
  bool has_errors() const noexcept;
  bool has_warnings() const noexcept;
};

// Collects every structural and numeric problem of the tree. A correlation
// matrix that is not PSD is only a warning.
ValidationReport validate_tree(const RiskTree& tree, const Tolerances& tol = {});

// Problems of a single matrix, paths prefixed with `path`.
void validate_correlation(const CorrelationMatrix& corr, const std::string& path,
                          ValidationReport& report, const Tolerances& tol = {});

// Smallest eigenvalue of a symmetric matrix. Throws NonSymmetric.
double min_eigenvalue(const CorrelationMatrix& corr, const Tolerances& tol = {});

bool is_psd(const CorrelationMatrix& corr, const Tolerances& tol = {});

// True when every correlation matrix in the tree is PSD.
bool tree_is_psd(const RiskTree& tree, const Tolerances& tol = {});

// Nearest-PSD repair by clipping negative eigenvalues to zero and
// rescaling back to a unit diagonal.
CorrelationMatrix clip_to_psd(const CorrelationMatrix& corr);

}  // namespace scralloc
