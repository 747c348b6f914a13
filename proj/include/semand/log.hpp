#pragma once

// Minimal stderr logger; verbosity comes from SEMAND_LOG
// (error, warn, info, debug). Default is warn.

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace semand {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel log_level()
{
    static const LogLevel level = [] {
        const char* env = std::getenv("SEMAND_LOG");
        const std::string v = env ? env : "";
        if (v == "error") return LogLevel::error;
        if (v == "info") return LogLevel::info;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

inline void log(LogLevel level, const std::string& msg)
{
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    static std::mutex mu;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::lock_guard lock(mu);
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

inline void log_info(const std::string& msg) { log(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log(LogLevel::debug, msg); }
inline void log_warn(const std::string& msg) { log(LogLevel::warn, msg); }

} // namespace semand
