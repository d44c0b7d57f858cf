#include "scralloc/risk_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "scralloc/error.hpp"

namespace scralloc {

CorrelationMatrix::CorrelationMatrix(std::size_t dim, std::vector<double> entries)
    : dim_(dim), entries_(std::move(entries)) {
  if (entries_.size() != dim_ * dim_) {
    std::ostringstream msg;
    msg << "correlation of dimension " << dim_ << " needs " << dim_ * dim_ << " entries, got "
        << entries_.size();
    throw Error(ErrorKind::DimensionMismatch, "", msg.str());
  }
}

CorrelationMatrix::CorrelationMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : dim_(rows.size()) {
  entries_.reserve(dim_ * dim_);
  for (const auto& r : rows) {
    if (r.size() != dim_) {
      throw Error(ErrorKind::DimensionMismatch, "", "correlation rows must form a square matrix");
    }
    entries_.insert(entries_.end(), r.begin(), r.end());
  }
}

CorrelationMatrix CorrelationMatrix::identity(std::size_t dim) { return uniform(dim, 0.0); }

CorrelationMatrix CorrelationMatrix::uniform(std::size_t dim, double rho) {
  std::vector<double> e(dim * dim, rho);
  for (std::size_t i = 0; i < dim; ++i) e[i * dim + i] = 1.0;
  return CorrelationMatrix(dim, std::move(e));
}

std::size_t RiskTree::micro_count() const {
  std::size_t n = 0;
  for (const auto& m : macros) n += m.micros.size();
  return n;
}

std::vector<double> RiskTree::micro_scrs() const {
  std::vector<double> out;
  out.reserve(micro_count());
  for (const auto& m : macros)
    for (const auto& x : m.micros) out.push_back(x.scr);
  return out;
}

RiskTree RiskTree::with_micro_scrs(std::span<const double> scrs) const {
  if (scrs.size() != micro_count()) {
    throw Error(ErrorKind::DimensionMismatch, name, "micro SCR vector does not match the tree");
  }
  RiskTree out = *this;
  std::size_t k = 0;
  for (auto& m : out.macros)
    for (auto& x : m.micros) x.scr = scrs[k++];
  return out;
}

std::vector<std::string> RiskTree::micro_paths() const {
  std::vector<std::string> out;
  out.reserve(micro_count());
  for (const auto& m : macros)
    for (const auto& x : m.micros) out.push_back(micro_path(m.id, x.id));
  return out;
}

std::string micro_path(const std::string& macro_id, const std::string& micro_id) {
  return macro_id + "/" + micro_id;
}

bool ValidationReport::has_errors() const noexcept {
  return std::any_of(violations.begin(), violations.end(),
                     [](const Violation& v) { return v.severity == Severity::Error; });
}

bool ValidationReport::has_warnings() const noexcept {
  return std::any_of(violations.begin(), violations.end(),
                     [](const Violation& v) { return v.severity == Severity::Warning; });
}

namespace {

bool symmetric(const CorrelationMatrix& corr, double tol) {
  const std::size_t n = corr.dim();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (!(std::abs(corr(i, j) - corr(j, i)) <= tol)) return false;
  return true;
}

Eigen::MatrixXd to_eigen(const CorrelationMatrix& corr) {
  const auto n = static_cast<Eigen::Index>(corr.dim());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      m(i, j) = corr(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  return m;
}

void add(ValidationReport& report, const std::string& path, const char* rule, Severity sev,
         std::string message) {
  report.violations.push_back({path, rule, sev, std::move(message)});
}

}  // namespace

void validate_correlation(const CorrelationMatrix& corr, const std::string& path,
                          ValidationReport& report, const Tolerances& tol) {
  const std::size_t n = corr.dim();
  bool finite = true;
  bool diagonal = true;
  bool in_range = true;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = corr(i, j);
      if (!std::isfinite(v)) {
        finite = false;
      } else if (v < -1.0 || v > 1.0) {
        in_range = false;
      }
    }
    if (corr(i, i) != 1.0) diagonal = false;
  }
  if (!finite) {
    add(report, path, "corr.finite", Severity::Error, "non-finite correlation entry");
    return;
  }
  if (!in_range) add(report, path, "corr.range", Severity::Error, "entry out of [-1,1]");
  if (!diagonal) add(report, path, "corr.diagonal", Severity::Error, "diagonal must be exactly 1");
  if (!symmetric(corr, tol.symmetry)) {
    add(report, path, "corr.symmetric", Severity::Error, "matrix is not symmetric");
    return;
  }
  if (n > 0) {
    const double lambda = min_eigenvalue(corr, tol);
    if (lambda < -tol.psd) {
      std::ostringstream msg;
      msg << "not PSD (min eigenvalue " << lambda << ")";
      add(report, path, "corr.psd", Severity::Warning, msg.str());
    }
  }
}

ValidationReport validate_tree(const RiskTree& tree, const Tolerances& tol) {
  ValidationReport report;
  const std::string root = tree.name.empty() ? "<tree>" : tree.name;
  if (tree.macros.empty()) add(report, root, "tree.nonempty", Severity::Error, "no macro-risks");
  if (tree.corr.dim() != tree.macros.size()) {
    std::ostringstream msg;
    msg << "correlation dimension " << tree.corr.dim() << " but " << tree.macros.size()
        << " macro-risks";
    add(report, root, "corr.dim", Severity::Error, msg.str());
  } else {
    validate_correlation(tree.corr, root, report, tol);
  }

  std::set<std::string> macro_ids;
  for (const auto& macro : tree.macros) {
    if (!macro_ids.insert(macro.id).second) {
      add(report, macro.id, "macro.id_unique", Severity::Error, "duplicate macro id");
    }
    if (macro.micros.empty()) {
      add(report, macro.id, "macro.nonempty", Severity::Error, "no micro-risks");
    }
    if (macro.corr.dim() != macro.micros.size()) {
      std::ostringstream msg;
      msg << "correlation dimension " << macro.corr.dim() << " but " << macro.micros.size()
          << " micro-risks";
      add(report, macro.id, "corr.dim", Severity::Error, msg.str());
    } else {
      validate_correlation(macro.corr, macro.id, report, tol);
    }
    std::set<std::string> micro_ids;
    for (const auto& micro : macro.micros) {
      const std::string path = micro_path(macro.id, micro.id);
      if (!micro_ids.insert(micro.id).second) {
        add(report, path, "micro.id_unique", Severity::Error, "duplicate micro id");
      }
      if (!std::isfinite(micro.scr)) {
        add(report, path, "micro.scr", Severity::Error, "SCR is not finite");
      } else if (micro.scr < 0.0) {
        add(report, path, "micro.scr", Severity::Error, "SCR is negative");
      }
    }
  }
  return report;
}

double min_eigenvalue(const CorrelationMatrix& corr, const Tolerances& tol) {
  if (corr.dim() == 0) throw Error(ErrorKind::InvalidInput, "", "empty matrix");
  if (!symmetric(corr, tol.symmetry)) {
    throw Error(ErrorKind::NonSymmetric, "", "eigenvalues need a symmetric matrix");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(corr),
                                                        Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

bool is_psd(const CorrelationMatrix& corr, const Tolerances& tol) {
  return corr.dim() == 0 || min_eigenvalue(corr, tol) >= -tol.psd;
}

bool tree_is_psd(const RiskTree& tree, const Tolerances& tol) {
  if (!is_psd(tree.corr, tol)) return false;
  return std::all_of(tree.macros.begin(), tree.macros.end(),
                     [&](const MacroRisk& m) { return is_psd(m.corr, tol); });
}

CorrelationMatrix clip_to_psd(const CorrelationMatrix& corr) {
  const std::size_t n = corr.dim();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(corr));
  const Eigen::VectorXd clipped = solver.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd repaired =
      solver.eigenvectors() * clipped.asDiagonal() * solver.eigenvectors().transpose();
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      const double d = std::sqrt(repaired(ii, ii) * repaired(jj, jj));
      // A zero diagonal means the whole row vanished; fall back to independence.
      double v = d > 0.0 ? repaired(ii, jj) / d : 0.0;
      v = std::clamp(v, -1.0, 1.0);
      out[i * n + j] = i == j ? 1.0 : v;
    }
  }
  // Symmetrize against rounding in the reconstruction.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (out[i * n + j] + out[j * n + i]);
      out[i * n + j] = out[j * n + i] = v;
    }
  return CorrelationMatrix(n, std::move(out));
}

}  // namespace scralloc
