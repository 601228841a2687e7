#pragma once

#include <stdexcept>
#include <string>

namespace bnfit {

enum class ErrorKind {
  Syntax,
  UnsupportedVersion,
  UnknownVariable,
  DuplicateVariable,
  Cardinality,
  Cycle,
  Normalization,
  ScopeMismatch,
  Dominance,
  SubnetBudget,
  DenseCeiling,
  InvalidArgument,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Syntax: return "syntax";
    case ErrorKind::UnsupportedVersion: return "unsupported-version";
    case ErrorKind::UnknownVariable: return "unknown-variable";
    case ErrorKind::DuplicateVariable: return "duplicate-variable";
    case ErrorKind::Cardinality: return "cardinality";
    case ErrorKind::Cycle: return "cycle";
    case ErrorKind::Normalization: return "normalization";
    case ErrorKind::ScopeMismatch: return "scope-mismatch";
    case ErrorKind::Dominance: return "dominance";
    case ErrorKind::SubnetBudget: return "subnet-budget";
    case ErrorKind::DenseCeiling: return "dense-ceiling";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

// All library failures are reported through this type. The message names
// the offending variable, row or cell where one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace bnfit
