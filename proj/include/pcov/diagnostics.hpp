#pragma once

#include <functional>
#include <string_view>

namespace pcov {

using WarningHandler = std::function<void(std::string_view)>;

// Non-fatal conditions (short lag windows, K=1 samplers) are routed here.
// The default handler writes to stderr; simulation drivers install a quiet one.
void warn(std::string_view message);
WarningHandler set_warning_handler(WarningHandler handler);

class ScopedWarningHandler {
public:
    explicit ScopedWarningHandler(WarningHandler handler)
        : previous_(set_warning_handler(std::move(handler))) {}
    ~ScopedWarningHandler() { set_warning_handler(std::move(previous_)); }
    ScopedWarningHandler(const ScopedWarningHandler&) = delete;
    ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

private:
    WarningHandler previous_;
};

}  // namespace pcov
