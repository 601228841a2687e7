#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string_view>

// Minimal stderr logger. Verbosity comes from BNFIT_LOG
// (quiet | warn | info | debug), default warn.
namespace bnfit::log {

enum class Level { Quiet = 0, Warn = 1, Info = 2, Debug = 3 };

inline Level level_from_env() {
  const char* env = std::getenv("BNFIT_LOG");
  if (env == nullptr) return Level::Warn;
  std::string_view v(env);
  if (v == "quiet") return Level::Quiet;
  if (v == "info") return Level::Info;
  if (v == "debug") return Level::Debug;
  return Level::Warn;
}

inline Level& threshold() {
  static Level lvl = level_from_env();
  return lvl;
}

inline bool enabled(Level lvl) { return static_cast<int>(lvl) <= static_cast<int>(threshold()); }

template <typename... Args>
void write(Level lvl, const char* tag, const char* fmt, Args... args) {
  if (!enabled(lvl)) return;
  std::fprintf(stderr, "[bnfit %s] ", tag);
  if constexpr (sizeof...(Args) == 0) {
    std::fputs(fmt, stderr);
  } else {
    std::fprintf(stderr, fmt, args...);
  }
  std::fputc('\n', stderr);
}

template <typename... Args>
void warn(const char* fmt, Args... args) { write(Level::Warn, "warn", fmt, args...); }
template <typename... Args>
void info(const char* fmt, Args... args) { write(Level::Info, "info", fmt, args...); }
template <typename... Args>
void debug(const char* fmt, Args... args) { write(Level::Debug, "debug", fmt, args...); }

}  // namespace bnfit::log
