#pragma once

#include <string_view>

namespace v2g::log {

enum class Level { Error, Warn, Info, Debug };

// Reads V2G_LOG (error|warn|info|debug) once; later calls are no-ops.
void init_from_env();
void set_level(Level level);

void warn(std::string_view message);
void info(std::string_view message);
void debug(std::string_view message);
void error(std::string_view message);

}  // namespace v2g::log
