#pragma once

#include <string>

namespace dna::log {

enum class Level { error = 0, info = 1, debug = 2 };

// Reads DNA_LOG_LEVEL once; unset or unrecognized values mean `info`.
Level level();
void set_level(Level lvl);

inline bool debug_enabled() { return level() >= Level::debug; }

void error(const std::string& msg);
void warn(const std::string& msg);
void info(const std::string& msg);
void debug(const std::string& msg);

}  // namespace dna::log
