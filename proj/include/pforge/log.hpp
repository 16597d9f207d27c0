#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

// Leveled logging to stderr, gated by the PAJAMA_FORGE_LOG environment
// variable (error|warn|info|debug, default info). stdout stays reserved for
// machine-readable output.

namespace pforge::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

inline Level threshold() {
    static const Level level = [] {
        const char* env = std::getenv("PAJAMA_FORGE_LOG");
        if (env == nullptr) return Level::info;
        if (std::strcmp(env, "error") == 0) return Level::error;
        if (std::strcmp(env, "warn") == 0) return Level::warn;
        if (std::strcmp(env, "debug") == 0) return Level::debug;
        return Level::info;
    }();
    return level;
}

template <typename... Args>
void emit(Level level, const char* tag, const char* fmt, Args... args) {
    if (level > threshold()) return;
    std::fprintf(stderr, "[%s] ", tag);
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
}

template <typename... Args>
void error(const char* fmt, Args... args) { emit(Level::error, "error", fmt, args...); }
template <typename... Args>
void warn(const char* fmt, Args... args) { emit(Level::warn, "warn", fmt, args...); }
template <typename... Args>
void info(const char* fmt, Args... args) { emit(Level::info, "info", fmt, args...); }
template <typename... Args>
void debug(const char* fmt, Args... args) { emit(Level::debug, "debug", fmt, args...); }

} // namespace pforge::log
