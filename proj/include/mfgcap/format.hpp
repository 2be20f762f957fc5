#pragma once

#include <charconv>
#include <string>

namespace mfgcap {

/// Shortest decimal that round-trips to the same double; locale independent.
/// Negative zero prints as 0.
inline std::string format_number(double v) {
    if (v == 0.0) v = 0.0;
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace mfgcap
