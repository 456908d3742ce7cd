// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace trajset {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarning = 2, kError = 3, kOff = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();
void log_message(LogLevel level, const std::string& msg);

inline void log_info(const std::string& msg) { log_message(LogLevel::kInfo, msg); }
inline void log_warning(const std::string& msg) { log_message(LogLevel::kWarning, msg); }

}  // namespace trajset
