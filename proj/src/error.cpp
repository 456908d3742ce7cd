// SPDX-License-Identifier: Apache-2.0
#include "trajset/error.hpp"

namespace trajset {

const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kShape: return "shape";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kData: return "data";
    case ErrorCategory::kTask: return "task";
    case ErrorCategory::kNumeric: return "numeric";
    case ErrorCategory::kContract: return "contract";
    case ErrorCategory::kIo: return "io";
  }
  return "unknown";
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kShape: return 3;
    case ErrorCategory::kConfig: return 4;
    case ErrorCategory::kData: return 5;
    case ErrorCategory::kTask: return 6;
    case ErrorCategory::kNumeric: return 7;
    case ErrorCategory::kContract: return 8;
    case ErrorCategory::kIo: return 9;
  }
  return 1;
}

}  // namespace trajset
