#include "merge/log.hpp"

#include <atomic>
#include <iostream>

namespace merge::log {

namespace {
std::atomic<Level> g_level{Level::warn};
}

void set_level(Level l) noexcept { g_level.store(l); }
Level level() noexcept { return g_level.load(); }

void warn(std::string_view msg) {
    if (level() >= Level::warn) std::cerr << "warning: " << msg << '\n';
}

void info(std::string_view msg) {
    if (level() >= Level::info) std::cerr << msg << '\n';
}

} // namespace merge::log
