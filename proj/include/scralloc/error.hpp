#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scralloc {

enum class ErrorKind {
  InvalidInput,
  DimensionMismatch,
  NonSymmetric,
  NegativeRadicand,
  ZeroTotalScr,
  ZeroMacroScr,
  ZeroCapitalWithIncome,
  InvalidNode,
  NotPsd,
  EmptyWindow,
  NoFeasibleScenario,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

// Domain error. `path` names the offending node ("macro", "macro/micro",
// "scenario:<id>", a JSON pointer, ...) and may be empty.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string path, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& path() const noexcept { return path_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string path_;
  std::string message_;
};

}  // namespace scralloc
