#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace iqn {

enum class ErrorCode {
  kSingularUpdate,
  kDegenerateDirection,
  kInvalidTau,
  kNonPositiveDiagonal,
  kSingularA,
  kSingularAggregate,
  kDegenerateProblem,
  kLazyInconsistency,
  kMalformedLine,
  kEmptyDataset,
  kInvalidSpec,
  kInvalidConfig,
  kIo,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        detail_(what) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

class MalformedLine : public Error {
 public:
  MalformedLine(std::size_t line_no, const std::string& what)
      : Error(ErrorCode::kMalformedLine,
              "line " + std::to_string(line_no) + ": " + what),
        line_no_(line_no) {}

  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

/// Solver failure annotated with the iteration at which it occurred.
class StepError : public Error {
 public:
  StepError(long iteration, const Error& cause)
      : Error(cause.code(),
              "at t=" + std::to_string(iteration) + ": " + cause.detail()),
        iteration_(iteration) {}

  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

}  // namespace iqn
