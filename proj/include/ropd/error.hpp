#pragma once

#include <stdexcept>
#include <string>

namespace ropd {

/// Every failure the library reports, one kind per named contract violation.
enum class ErrorKind {
  // parsing / schema
  ParseError,
  SchemaMismatch,
  ConstraintViolation,
  PassRateWarning,
  LengthMismatch,
  EmptyRubric,
  EmptyInput,
  EmptyPool,
  // gateway
  RateLimited,
  Timeout,
  BadStatus,
  EmptyReply,
  CorruptEntry,
  PartialFailure,
  // grpo
  GroupTooSmall,
  TokenOutOfVocab,
  NonFiniteLoss,
  ShapeMismatch,
  // orchestrator
  ResumeMismatch,
  DatasetEmpty,
  MissingLabels,
  // analyzer
  MalformedRecord,
  SingleClass,
  NoCommonCells,
  FieldAbsent,
  // cli / config
  ConfigError,
  IoError,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::ConstraintViolation: return "ConstraintViolation";
    case ErrorKind::PassRateWarning: return "PassRateWarning";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyRubric: return "EmptyRubric";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyPool: return "EmptyPool";
    case ErrorKind::RateLimited: return "RateLimited";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::BadStatus: return "BadStatus";
    case ErrorKind::EmptyReply: return "EmptyReply";
    case ErrorKind::CorruptEntry: return "CorruptEntry";
    case ErrorKind::PartialFailure: return "PartialFailure";
    case ErrorKind::GroupTooSmall: return "GroupTooSmall";
    case ErrorKind::TokenOutOfVocab: return "TokenOutOfVocab";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ResumeMismatch: return "ResumeMismatch";
    case ErrorKind::DatasetEmpty: return "DatasetEmpty";
    case ErrorKind::MissingLabels: return "MissingLabels";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::NoCommonCells: return "NoCommonCells";
    case ErrorKind::FieldAbsent: return "FieldAbsent";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace ropd
