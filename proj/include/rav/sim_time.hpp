#pragma once

#include <cmath>
#include <cstdint>

namespace rav {

// Simulated time and durations are integer microseconds.
using SimTime = std::int64_t;

constexpr SimTime us_per_ms = 1000;

inline SimTime us_from_ms(double ms) {
    return static_cast<SimTime>(std::floor(ms * 1000.0));
}

inline double ms_from_us(SimTime us) {
    return static_cast<double>(us) / 1000.0;
}

}  // namespace rav
