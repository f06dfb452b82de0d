#pragma once

#include <string_view>

namespace mlg::log {

enum class Level { Debug, Info, Warn, Error, Off };

void set_level(Level level);
Level level();

void write(Level level, std::string_view message);
inline void info(std::string_view m) { write(Level::Info, m); }
inline void warn(std::string_view m) { write(Level::Warn, m); }
inline void debug(std::string_view m) { write(Level::Debug, m); }
// Warns the first time a given message is seen in this process.
void warn_once(std::string_view m);

}  // namespace mlg::log
