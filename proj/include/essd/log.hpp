#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace essd {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

namespace detail {

inline LogLevel level_from_env() {
  const char* v = std::getenv("ESSD_LOG");
  if (v == nullptr) return LogLevel::warn;
  std::string_view s(v);
  if (s == "error") return LogLevel::error;
  if (s == "warn") return LogLevel::warn;
  if (s == "info") return LogLevel::info;
  if (s == "debug") return LogLevel::debug;
  return LogLevel::warn;
}

inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

inline LogLevel& log_level() {
  static LogLevel lvl = detail::level_from_env();
  return lvl;
}

inline void log(LogLevel lvl, const std::string& msg) {
  if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
  const char* tag = "warn";
  switch (lvl) {
    case LogLevel::error: tag = "error"; break;
    case LogLevel::warn: tag = "warn"; break;
    case LogLevel::info: tag = "info"; break;
    case LogLevel::debug: tag = "debug"; break;
  }
  std::lock_guard<std::mutex> lock(detail::log_mutex());
  std::cerr << "[" << tag << "] " << msg << "\n";
}

inline void log_warn(const std::string& msg) { log(LogLevel::warn, msg); }
inline void log_info(const std::string& msg) { log(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log(LogLevel::debug, msg); }

}  // namespace essd
