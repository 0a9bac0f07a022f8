#pragma once

#include <cstdarg>

namespace fbcontrol {

enum class LogLevel { quiet = 0, warn = 1, info = 2, debug = 3 };

/// Level comes from the FBCONTROL_LOG environment variable
/// (quiet|warn|info|debug, default warn).  Messages go to stderr.
LogLevel log_level();
void set_log_level(LogLevel level);

void log_msg(LogLevel level, const char* fmt, ...)
#if defined(__GNUC__)
    __attribute__((format(printf, 2, 3)))
#endif
    ;

#define FBC_LOG_INFO(...) ::fbcontrol::log_msg(::fbcontrol::LogLevel::info, __VA_ARGS__)
#define FBC_LOG_WARN(...) ::fbcontrol::log_msg(::fbcontrol::LogLevel::warn, __VA_ARGS__)
#define FBC_LOG_DEBUG(...) ::fbcontrol::log_msg(::fbcontrol::LogLevel::debug, __VA_ARGS__)

}
