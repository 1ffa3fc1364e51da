#include "delaycast/log.hpp"

#include <cstdlib>
#include <iostream>

namespace delaycast {

LogLevel log_threshold() {
    static LogLevel level = [] {
        const char* env = std::getenv("DELAYCAST_LOG");
        if (!env) return LogLevel::warn;
        std::string v(env);
        if (v == "error") return LogLevel::error;
        if (v == "info") return LogLevel::info;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

void log_message(LogLevel level, const std::string& msg) {
    if (level > log_threshold()) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::cerr << "[delaycast:" << names[static_cast<int>(level)] << "] " << msg
              << "\n";
}

}  // namespace delaycast
