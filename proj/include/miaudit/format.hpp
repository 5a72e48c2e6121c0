#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

namespace miaudit {

// Shortest round-trip representation; used for full-precision CSV/JSON cells.
inline std::string format_full(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Compact label for grid values (0.5, 1, 3, ...).
inline std::string format_label(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// Fixed 3-decimal cell format, ties rounded half-even on the scaled value.
inline std::string format3(double v) {
    const double scaled = v * 1000.0;
    long long n = std::llrint(scaled);  // default FE_TONEAREST = half-even
    const bool neg = n < 0;
    unsigned long long a = neg ? static_cast<unsigned long long>(-n)
                               : static_cast<unsigned long long>(n);
    char frac[8];
    std::snprintf(frac, sizeof(frac), "%03llu", a % 1000ULL);
    return (neg ? std::string("-") : std::string()) + std::to_string(a / 1000ULL) + "." + frac;
}

}  // namespace miaudit
