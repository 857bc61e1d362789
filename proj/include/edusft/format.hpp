#pragma once

#include <cstdio>
#include <string>

namespace edusft {

// 0.8468 -> "84.68%"
inline std::string format_percent(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", ratio * 100.0);
    return buf;
}

}  // namespace edusft
