#pragma once

#include <string_view>

namespace merge::log {

enum class Level { quiet = 0, warn = 1, info = 2 };

void set_level(Level level) noexcept;
Level level() noexcept;

void warn(std::string_view msg);
void info(std::string_view msg);

} // namespace merge::log
