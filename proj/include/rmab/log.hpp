#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace rmab {

enum class LogLevel { Off = 0, Error = 1, Info = 2, Debug = 3 };

/// Verbosity from the RMAB_MFP_LOG environment variable
/// (off | error | info | debug), read once. Default: error.
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("RMAB_MFP_LOG");
        if (!env) return LogLevel::Error;
        if (std::strcmp(env, "off") == 0) return LogLevel::Off;
        if (std::strcmp(env, "info") == 0) return LogLevel::Info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        return LogLevel::Error;
    }();
    return level;
}

inline void log(LogLevel at, const std::string& msg) {
    if (static_cast<int>(at) <= static_cast<int>(log_level()))
        std::fprintf(stderr, "[rmab] %s\n", msg.c_str());
}

}  // namespace rmab
