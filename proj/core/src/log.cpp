#include "fbcontrol/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace fbcontrol {

namespace {

LogLevel parse_env_level() {
  const char* env = std::getenv("FBCONTROL_LOG");
  if (!env) return LogLevel::warn;
  if (std::strcmp(env, "quiet") == 0) return LogLevel::quiet;
  if (std::strcmp(env, "warn") == 0) return LogLevel::warn;
  if (std::strcmp(env, "info") == 0) return LogLevel::info;
  if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
  return LogLevel::warn;
}

LogLevel g_level = parse_env_level();

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
    default: return "";
  }
}

}  // namespace

LogLevel log_level() { return g_level; }

void set_log_level(LogLevel level) { g_level = level; }

void log_msg(LogLevel level, const char* fmt, ...) {
  if (level == LogLevel::quiet || static_cast<int>(level) > static_cast<int>(g_level)) return;
  std::fprintf(stderr, "[fbcontrol %s] ", level_tag(level));
  va_list args;
  va_start(args, fmt);
  std::vfprintf(stderr, fmt, args);
  va_end(args);
  std::fputc('\n', stderr);
}

}
