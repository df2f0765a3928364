#include "v2g/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <mutex>
#include <string>

namespace v2g::log {
namespace {

std::shared_ptr<spdlog::logger>& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("v2g");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return instance;
}

spdlog::level::level_enum to_spdlog(Level level) {
  switch (level) {
    case Level::Error: return spdlog::level::err;
    case Level::Warn: return spdlog::level::warn;
    case Level::Info: return spdlog::level::info;
    case Level::Debug: return spdlog::level::debug;
  }
  return spdlog::level::warn;
}

}  // namespace

void init_from_env() {
  static std::once_flag once;
  std::call_once(once, [] {
    const char* env = std::getenv("V2G_LOG");
    if (env == nullptr) return;
    const std::string value(env);
    if (value == "error") set_level(Level::Error);
    else if (value == "warn") set_level(Level::Warn);
    else if (value == "info") set_level(Level::Info);
    else if (value == "debug") set_level(Level::Debug);
  });
}

void set_level(Level level) { logger()->set_level(to_spdlog(level)); }

void warn(std::string_view message) { logger()->warn("{}", message); }
void info(std::string_view message) { logger()->info("{}", message); }
void debug(std::string_view message) { logger()->debug("{}", message); }
void error(std::string_view message) { logger()->error("{}", message); }

}  // namespace v2g::log
