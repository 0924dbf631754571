#pragma once

// Naive reference evaluations of the attention metrics, written straight from their
// definitions and sharing no code with the optimized implementations. Intended for
// small maps (N <= 256) in tests.

#include <cstddef>

#include "rhythm/matrix.hpp"

namespace rhythm::oracle {

inline double brute_force_waad(const SquareMatrix& map, std::size_t t, std::size_t window,
                               bool include_sink = true) {
    double total = 0.0;
    for (std::size_t s = include_sink ? 0 : 1; s <= t; ++s) {
        double dist = static_cast<double>(t) - static_cast<double>(s);
        if (dist > static_cast<double>(window)) dist = static_cast<double>(window);
        total += map(t, s) * dist;
    }
    return total;
}

inline double brute_force_fai(const SquareMatrix& map, std::size_t s, std::size_t horizon_lo,
                              std::size_t horizon_hi, const IndexRange& response) {
    const std::size_t n = map.size();
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const bool in_response = t >= response.begin && t < response.end;
        const bool in_window = t >= s + horizon_lo && t <= s + horizon_hi && t <= n - 1;
        if (in_response && in_window) {
            total += map(t, s);
            ++count;
        }
    }
    return count == 0 ? 0.0 : total / static_cast<double>(count);
}

inline double brute_force_span(const SquareMatrix& map, const IndexRange& response) {
    double total = 0.0;
    std::size_t rows = 0;
    for (std::size_t t = response.begin; t < response.end; ++t) {
        for (std::size_t s = 0; s <= t; ++s) {
            total += map(t, s) * (static_cast<double>(t) - static_cast<double>(s));
        }
        ++rows;
    }
    return total / static_cast<double>(rows);
}

} // namespace rhythm::oracle
