#include "mlg/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>
#include <set>
#include <string>

namespace mlg::log {
namespace {

std::atomic<Level> g_level{Level::Warn};
std::mutex g_mutex;
std::set<std::string, std::less<>> g_seen;

const char* tag(Level l) {
  switch (l) {
    case Level::Debug:
      return "debug";
    case Level::Info:
      return "info";
    case Level::Warn:
      return "warning";
    case Level::Error:
      return "error";
    default:
      return "";
  }
}

}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void write(Level l, std::string_view message) {
  if (l < g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::fprintf(stderr, "[%s] %.*s\n", tag(l), static_cast<int>(message.size()), message.data());
}

}  // namespace mlg::log

namespace mlg::log {

void warn_once(std::string_view message) {
  {
    std::lock_guard lock(g_mutex);
    if (!g_seen.emplace(message).second) return;
  }
  warn(message);
}

}  // namespace mlg::log
