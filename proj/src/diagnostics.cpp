#include "pcov/diagnostics.hpp"

#include <iostream>
#include <mutex>

namespace pcov {
namespace {

std::mutex& handler_mutex() {
    static std::mutex m;
    return m;
}

WarningHandler& current_handler() {
    static WarningHandler h = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
    return h;
}

}  // namespace

void warn(std::string_view message) {
    std::lock_guard lock(handler_mutex());
    if (current_handler()) current_handler()(message);
}

WarningHandler set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(handler_mutex());
    WarningHandler previous = std::move(current_handler());
    current_handler() = std::move(handler);
    return previous;
}

}  // namespace pcov
