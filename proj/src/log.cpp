// SPDX-License-Identifier: Apache-2.0
#include "trajset/log.hpp"

#include <atomic>
#include <iostream>

namespace trajset {

namespace {
std::atomic<LogLevel> g_level{LogLevel::kInfo};
}

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log_message(LogLevel level, const std::string& msg) {
  if (level < g_level.load()) return;
  static const char* kTags[] = {"debug", "info", "warning", "error"};
  std::cerr << '[' << kTags[static_cast<int>(level)] << "] " << msg << '\n';
}

}  // namespace trajset
