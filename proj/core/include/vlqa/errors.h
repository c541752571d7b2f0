#pragma once

#include <stdexcept>
#include <string>

namespace vlqa {

// Every failure raised by the library carries a kind so the CLI can map it
// onto a stable exit code.
enum class ErrorKind {
  kDimension,
  kNumeric,
  kVocabulary,
  kStructure,
  kSchema,
  kCategory,
  kDegenerateInput,
  kEvaluation,
  kConfiguration,
  kTemplate,
  kPrecondition,
  kDivergence,
  kIo,
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ErrorKindName(kind)) + " error: " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  // 2 configuration, 3 data, 4 numeric divergence.
  int exit_code() const;

 private:
  ErrorKind kind_;
};

inline const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kVocabulary: return "vocabulary";
    case ErrorKind::kStructure: return "structure";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kCategory: return "category";
    case ErrorKind::kDegenerateInput: return "degenerate-input";
    case ErrorKind::kEvaluation: return "evaluation";
    case ErrorKind::kConfiguration: return "configuration";
    case ErrorKind::kTemplate: return "template";
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

inline int Error::exit_code() const {
  switch (kind_) {
    case ErrorKind::kConfiguration:
    case ErrorKind::kCategory:
    case ErrorKind::kPrecondition:
      return 2;
    case ErrorKind::kNumeric:
    case ErrorKind::kDivergence:
      return 4;
    default:
      return 3;
  }
}

}  // namespace vlqa
