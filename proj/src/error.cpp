#include "scralloc/error.hpp"

namespace scralloc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonSymmetric: return "NonSymmetric";
    case ErrorKind::NegativeRadicand: return "NegativeRadicand";
    case ErrorKind::ZeroTotalScr: return "ZeroTotalScr";
    case ErrorKind::ZeroMacroScr: return "ZeroMacroScr";
    case ErrorKind::ZeroCapitalWithIncome: return "ZeroCapitalWithIncome";
    case ErrorKind::InvalidNode: return "InvalidNode";
    case ErrorKind::NotPsd: return "NotPsd";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::NoFeasibleScenario: return "NoFeasibleScenario";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorKind kind, const std::string& path, const std::string& message) {
  std::string out(to_string(kind));
  if (!path.empty()) {
    out += " at ";
    out += path;
  }
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorKind kind, std::string path, const std::string& message)
    : std::runtime_error(compose(kind, path, message)), kind_(kind), path_(std::move(path)), message_(message) {}

}  // namespace scralloc
