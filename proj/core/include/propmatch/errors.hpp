#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace propmatch {

enum class ErrorKind {
  kMalformedParse,
  kDuplicateId,
  kDanglingParse,
  kBadVectorFile,
  kDimensionMismatch,
  kEmptyCorpus,
  kIllegalEdit,
  kDegenerateLabels,
  kBadInstance,
  kBadLabel,
  kInsufficientData,
  kBadInput,
};

std::string_view ErrorKindName(ErrorKind kind);

// Base of every error raised by the library. The kind is stable and is what
// callers (CLI, HTTP layer) switch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define PROPMATCH_DEFINE_ERROR(Name)                                     \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& message)                            \
        : Error(ErrorKind::k##Name, message) {}                          \
  };

PROPMATCH_DEFINE_ERROR(MalformedParse)
PROPMATCH_DEFINE_ERROR(DuplicateId)
PROPMATCH_DEFINE_ERROR(DanglingParse)
PROPMATCH_DEFINE_ERROR(BadVectorFile)
PROPMATCH_DEFINE_ERROR(DimensionMismatch)
PROPMATCH_DEFINE_ERROR(EmptyCorpus)
PROPMATCH_DEFINE_ERROR(IllegalEdit)
PROPMATCH_DEFINE_ERROR(BadInstance)
PROPMATCH_DEFINE_ERROR(BadLabel)
PROPMATCH_DEFINE_ERROR(InsufficientData)
PROPMATCH_DEFINE_ERROR(BadInput)

#undef PROPMATCH_DEFINE_ERROR

inline std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMalformedParse: return "MalformedParse";
    case ErrorKind::kDuplicateId: return "DuplicateId";
    case ErrorKind::kDanglingParse: return "DanglingParse";
    case ErrorKind::kBadVectorFile: return "BadVectorFile";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kEmptyCorpus: return "EmptyCorpus";
    case ErrorKind::kIllegalEdit: return "IllegalEdit";
    case ErrorKind::kDegenerateLabels: return "DegenerateLabels";
    case ErrorKind::kBadInstance: return "BadInstance";
    case ErrorKind::kBadLabel: return "BadLabel";
    case ErrorKind::kInsufficientData: return "InsufficientData";
    case ErrorKind::kBadInput: return "BadInput";
  }
  return "Unknown";
}

}  // namespace propmatch
