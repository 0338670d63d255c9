#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <string>

namespace crowdcluster {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

/// Threshold comes from CROWDCLUSTER_LOG (debug|info|warn|error|off), default warn.
inline LogLevel log_threshold() {
    static const LogLevel level = [] {
        const char* env = std::getenv("CROWDCLUSTER_LOG");
        if (env == nullptr) return LogLevel::warn;
        if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
        if (std::strcmp(env, "info") == 0) return LogLevel::info;
        if (std::strcmp(env, "warn") == 0) return LogLevel::warn;
        if (std::strcmp(env, "error") == 0) return LogLevel::error;
        if (std::strcmp(env, "off") == 0) return LogLevel::off;
        return LogLevel::warn;
    }();
    return level;
}

/// Optional capture hook; when set it replaces the stderr writer entirely.
inline std::function<void(LogLevel, const std::string&)>& log_sink() {
    static std::function<void(LogLevel, const std::string&)> sink;
    return sink;
}

inline void log_message(LogLevel level, const std::string& msg) {
    if (log_sink()) {
        log_sink()(level, msg);
        return;
    }
    if (level < log_threshold()) return;
    const char* tag = "warn";
    switch (level) {
        case LogLevel::debug: tag = "debug"; break;
        case LogLevel::info: tag = "info"; break;
        case LogLevel::warn: tag = "warn"; break;
        case LogLevel::error: tag = "error"; break;
        case LogLevel::off: return;
    }
    std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}

inline void log_debug(const std::string& msg) { log_message(LogLevel::debug, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::info, msg); }
inline void log_warn(const std::string& msg) { log_message(LogLevel::warn, msg); }
inline void log_error(const std::string& msg) { log_message(LogLevel::error, msg); }

}  // namespace crowdcluster
