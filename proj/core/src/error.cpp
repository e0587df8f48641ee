#include "owttt/error.hpp"

namespace owttt {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::DegenerateEmbedding: return "DegenerateEmbedding";
  case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
  case ErrorCode::EmptyPrototypeSet: return "EmptyPrototypeSet";
  case ErrorCode::EmptyWindow: return "EmptyWindow";
  case ErrorCode::EmptyClass: return "EmptyClass";
  case ErrorCode::EmptyNovelPool: return "EmptyNovelPool";
  case ErrorCode::UnknownLabel: return "UnknownLabel";
  case ErrorCode::NumericalFailure: return "NumericalFailure";
  case ErrorCode::EmptyRecords: return "EmptyRecords";
  case ErrorCode::MissingPopulation: return "MissingPopulation";
  case ErrorCode::InvalidSpec: return "InvalidSpec";
  case ErrorCode::InvalidArgument: return "InvalidArgument";
  case ErrorCode::ConfigError: return "ConfigError";
  case ErrorCode::MissingArtifacts: return "MissingArtifacts";
  case ErrorCode::IoError: return "IoError";
  case ErrorCode::RuntimeError: return "RuntimeError";
  }
  return "Unknown";
}

} // namespace owttt
