// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace trajset {

/// Diagnostic category carried by every library exception. The CLI maps
/// each category to a distinct exit code.
enum class ErrorCategory {
  kShape,
  kConfig,
  kData,
  kTask,
  kNumeric,
  kContract,
  kIo,
};

const char* to_string(ErrorCategory c);
int exit_code(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorCategory::kShape, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorCategory::kConfig, w) {}
};
struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorCategory::kData, w) {}
};
struct TaskError : Error {
  explicit TaskError(const std::string& w) : Error(ErrorCategory::kTask, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorCategory::kNumeric, w) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& w) : Error(ErrorCategory::kContract, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCategory::kIo, w) {}
};

}  // namespace trajset
