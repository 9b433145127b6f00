#include "dna/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string_view>

namespace dna::log {
namespace {

Level level_from_env() {
    const char* env = std::getenv("DNA_LOG_LEVEL");
    if (env == nullptr) return Level::info;
    const std::string_view v(env);
    if (v == "error") return Level::error;
    if (v == "debug") return Level::debug;
    return Level::info;
}

std::atomic<int>& current() {
    static std::atomic<int> lvl{static_cast<int>(level_from_env())};
    return lvl;
}

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

void emit(const char* tag, const std::string& msg) {
    std::lock_guard<std::mutex> lock(sink_mutex());
    std::cerr << "[dna " << tag << "] " << msg << '\n';
}

}  // namespace

Level level() { return static_cast<Level>(current().load()); }

void set_level(Level lvl) { current().store(static_cast<int>(lvl)); }

void error(const std::string& msg) { emit("error", msg); }

// Warnings are shown at info level and above.
void warn(const std::string& msg) {
    if (level() >= Level::info) emit("warn", msg);
}

void info(const std::string& msg) {
    if (level() >= Level::info) emit("info", msg);
}

void debug(const std::string& msg) {
    if (level() >= Level::debug) emit("debug", msg);
}

}  // namespace dna::log
