#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

#include "twsf/errors.hpp"

namespace twsf {

// 17 significant digits: doubles round-trip exactly through this format.
inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s, const char* what) {
    const char* p = s.c_str();
    char* end = nullptr;
    double v = std::strtod(p, &end);
    if (end == p || *end != '\0')
        throw ParseError(std::string(what) + ": not a number: '" + s + "'");
    return v;
}

inline int64_t parse_int(const std::string& s, const char* what) {
    const char* p = s.c_str();
    char* end = nullptr;
    long long v = std::strtoll(p, &end, 10);
    if (end == p || *end != '\0')
        throw ParseError(std::string(what) + ": not an integer: '" + s + "'");
    return static_cast<int64_t>(v);
}

}  // namespace twsf
