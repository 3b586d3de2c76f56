#pragma once

#include <charconv>
#include <string>

namespace sdperl {

// Shortest round-trip decimal form. All persisted reals go through this so
// re-emitted artifacts are byte-identical.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace sdperl
