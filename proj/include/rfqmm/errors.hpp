#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rfqmm {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kSuccess = 0,
  kConfig = 2,
  kNumeric = 3,
  kIo = 4,
};

class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error("config error: " + what, ExitCode::kConfig) {}
};

class UnknownPreset : public Error {
 public:
  explicit UnknownPreset(const std::string& name)
      : Error("unknown preset '" + name + "'", ExitCode::kConfig) {}
};

class RowSumViolation : public Error {
 public:
  RowSumViolation(std::size_t row, double sum)
      : Error("generator row " + std::to_string(row) + " sums to " +
                  std::to_string(sum) + ", expected 0",
              ExitCode::kConfig),
        row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class NegativeOffDiagonal : public Error {
 public:
  NegativeOffDiagonal(std::size_t row, std::size_t col)
      : Error("generator entry (" + std::to_string(row) + "," +
                  std::to_string(col) + ") has the wrong sign",
              ExitCode::kConfig),
        row_(row),
        col_(col) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t col() const noexcept { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

class SingularChain : public Error {
 public:
  explicit SingularChain(const std::string& what)
      : Error("singular chain: " + what, ExitCode::kNumeric) {}
};

class StepAfterDone : public Error {
 public:
  StepAfterDone() : Error("step() called on a finished episode", ExitCode::kNumeric) {}
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(const std::string& what)
      : Error("non-finite loss: " + what, ExitCode::kNumeric) {}
};

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& what)
      : Error("shape mismatch: " + what, ExitCode::kIo) {}
};

class ChecksumMismatch : public Error {
 public:
  explicit ChecksumMismatch(const std::string& what)
      : Error("checksum mismatch: " + what, ExitCode::kIo) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io error: " + what, ExitCode::kIo) {}
};

}  // namespace rfqmm
