#include "evdistill/logging.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <unordered_set>

namespace evdistill::log {

namespace {

Level parse_env() {
  const char* raw = std::getenv("EVDISTILL_LOG");
  if (raw == nullptr) return Level::warn;
  const std::string v(raw);
  if (v == "error") return Level::error;
  if (v == "warn") return Level::warn;
  if (v == "info") return Level::info;
  if (v == "debug") return Level::debug;
  std::cerr << "[warn] unknown EVDISTILL_LOG value '" << v << "', using 'warn'\n";
  return Level::warn;
}

const char* tag(Level level) {
  switch (level) {
    case Level::error: return "[error] ";
    case Level::warn: return "[warn] ";
    case Level::info: return "[info] ";
    case Level::debug: return "[debug] ";
  }
  return "";
}

}  // namespace

Level threshold() {
  static const Level cached = parse_env();
  return cached;
}

bool enabled(Level level) {
  return static_cast<int>(level) <= static_cast<int>(threshold());
}

void write(Level level, std::string_view message) {
  if (!enabled(level)) return;
  std::cerr << tag(level) << message << '\n';
}

void warn_once(std::string_view message) {
  static std::mutex mu;
  static std::unordered_set<std::string> seen;
  {
    const std::lock_guard<std::mutex> lock(mu);
    if (!seen.emplace(message).second) return;
  }
  warn(message);
}

}  // namespace evdistill::log
