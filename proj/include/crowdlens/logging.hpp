#pragma once

#include <string>

namespace crowdlens {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Active level, parsed once from CROWDLENS_LOG_LEVEL (default warn).
LogLevel log_level();

/// Writes "[level] message" to stderr when level is enabled.
void log_msg(LogLevel level, const std::string& message);

inline void log_error(const std::string& m) { log_msg(LogLevel::Error, m); }
inline void log_warn(const std::string& m) { log_msg(LogLevel::Warn, m); }
inline void log_info(const std::string& m) { log_msg(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log_msg(LogLevel::Debug, m); }

} // namespace crowdlens
