#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace owttt {

enum class ErrorCode {
  DegenerateEmbedding,
  NonFiniteGradient,
  EmptyPrototypeSet,
  EmptyWindow,
  EmptyClass,
  EmptyNovelPool,
  UnknownLabel,
  NumericalFailure,
  EmptyRecords,
  MissingPopulation,
  InvalidSpec,
  InvalidArgument,
  ConfigError,
  MissingArtifacts,
  IoError,
  RuntimeError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries a machine-readable code so the
// CLI can emit a structured error record.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

// A stage failure inside run_stream, tagged with the batch it happened in.
class BatchError : public Error {
public:
  BatchError(ErrorCode code, const std::string &what, std::size_t batch)
      : Error(code, what), batch_(batch) {}

  std::size_t batch() const noexcept { return batch_; }

private:
  std::size_t batch_;
};

} // namespace owttt
