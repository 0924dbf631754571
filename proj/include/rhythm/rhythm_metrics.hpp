#pragma once

// Per-token attention-rhythm series: windowed backward distance (WAAD), future
// attention influence (FAI), predictive entropy, successive WAAD differences, and
// the selection primitives (top-quantile, peak detection) built on them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rhythm/error.hpp"
#include "rhythm/index_set.hpp"
#include "rhythm/matrix.hpp"

namespace rhythm {

enum class PeakMethod { TopQ, LocalMax };

inline std::string to_string(PeakMethod m) {
    return m == PeakMethod::TopQ ? "topq" : "local-max";
}

inline PeakMethod parse_peak_method(const std::string& s) {
    if (s == "topq") return PeakMethod::TopQ;
    if (s == "local-max") return PeakMethod::LocalMax;
    throw Error("unknown-method", "unknown peak method '" + s + "'");
}

struct MetricParams {
    std::size_t window = 10;
    std::size_t horizon_lo = 10;
    std::size_t horizon_hi = 50;
    double q = 0.4;
    PeakMethod peak_method = PeakMethod::TopQ;
    double peak_kappa = 1.0;
    // When false, column 0 (the attention sink) is left out of the WAAD sum.
    bool include_sink = true;

    void validate() const {
        if (window < 1) throw Error("invalid-params", "window must be >= 1");
        if (horizon_lo >= horizon_hi) throw Error("invalid-params", "horizon_lo must be < horizon_hi");
        if (!(q > 0.0 && q <= 1.0)) throw Error("quantile-out-of-range", "q must lie in (0, 1]");
    }
};

/// WAAD over the rows of `range`: sum_s A[t][s] * min(t - s, W). Element i of the
/// result belongs to position range.begin + i.
inline std::vector<double> waad_series(const SquareMatrix& agg_local, const IndexRange& range,
                                       std::size_t window, bool include_sink = true) {
    require_range_within(range, agg_local.size());
    if (window < 1) throw Error("invalid-params", "window must be >= 1");
    std::vector<double> out;
    out.reserve(range.size());
    for (std::size_t t = range.begin; t < range.end; ++t) {
        const auto row = agg_local.row(t);
        double acc = 0.0;
        // Columns closer than the window contribute their exact distance; the rest saturate.
        const std::size_t near_lo = t >= window ? t - window + 1 : 0;
        const std::size_t first = include_sink ? 0 : 1;
        double far_mass = 0.0;
        for (std::size_t s = first; s < near_lo; ++s) far_mass += row[s];
        for (std::size_t s = std::max(near_lo, first); s < t; ++s) {
            acc += row[s] * static_cast<double>(t - s);
        }
        out.push_back(acc + far_mass * static_cast<double>(window));
    }
    return out;
}

struct FaiSeries {
    std::vector<double> values;  // one per sequence position
    std::vector<bool> covered;   // false where the horizon window held no response row
};

/// FAI for every position s of the sequence: the mean of A[t][s] over response rows
/// t with s + H_lo <= t <= s + H_hi. Positions with an empty window get 0 and are
/// marked uncovered.
inline FaiSeries fai_series(const SquareMatrix& agg_global, const IndexRange& range,
                            std::size_t horizon_lo, std::size_t horizon_hi) {
    const std::size_t n = agg_global.size();
    if (range.end > n) throw Error("dimension-mismatch", "response range exceeds sequence length");
    if (horizon_lo >= horizon_hi) throw Error("invalid-params", "horizon_lo must be < horizon_hi");
    FaiSeries out{std::vector<double>(n, 0.0), std::vector<bool>(n, false)};
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t lo = std::max(s + horizon_lo, range.begin);
        const std::size_t hi = std::min({s + horizon_hi, n - 1, range.end == 0 ? 0 : range.end - 1});
        if (range.empty() || lo > hi) continue;
        double acc = 0.0;
        for (std::size_t t = lo; t <= hi; ++t) acc += agg_global(t, s);
        out.values[s] = acc / static_cast<double>(hi - lo + 1);
        out.covered[s] = true;
    }
    return out;
}

/// Shannon entropy in nats of one probability row, 0 ln 0 := 0.
inline double row_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p) {
        if (v < 0.0 || std::isnan(v)) throw Error("negative-probability", "probability row has a negative entry");
        if (v > 0.0) h -= v * std::log(v);
    }
    return std::max(h, 0.0);
}

inline std::vector<double> entropy_series(const std::vector<std::vector<double>>& prob_rows) {
    std::vector<double> out;
    out.reserve(prob_rows.size());
    for (const auto& row : prob_rows) out.push_back(row_entropy(row));
    return out;
}

inline std::vector<double> waad_delta(std::span<const double> waad) {
    if (waad.size() < 2) throw Error("series-too-short", "delta needs at least two WAAD values");
    std::vector<double> out(waad.size() - 1);
    for (std::size_t t = 0; t + 1 < waad.size(); ++t) out[t] = std::abs(waad[t] - waad[t + 1]);
    return out;
}

inline std::size_t quantile_count(double q, std::size_t n) {
    // Guard against q*n landing a hair above an integer through rounding.
    const double raw = q * static_cast<double>(n);
    const double nearest = std::round(raw);
    const double c = std::abs(raw - nearest) < 1e-9 ? nearest : std::ceil(raw);
    return std::min(n, static_cast<std::size_t>(c));
}

/// Indices of the ceil(q*n) largest values (n = size of `restrict`, or of the whole
/// series). Ties at the cut go to the lower index.
inline IndexSet top_quantile(std::span<const double> series, double q,
                             const std::optional<IndexSet>& restrict = std::nullopt) {
    if (!(q > 0.0 && q <= 1.0)) throw Error("quantile-out-of-range", "q must lie in (0, 1]");
    if (series.empty()) throw Error("empty-series", "cannot select from an empty series");
    std::vector<std::size_t> candidates;
    if (restrict) {
        for (std::size_t i : *restrict) {
            if (i >= series.size()) throw Error("index-out-of-range", "restriction exceeds series");
            candidates.push_back(i);
        }
    } else {
        candidates.resize(series.size());
        std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    }
    const std::size_t take = quantile_count(q, candidates.size());
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return series[a] > series[b]; });
    candidates.resize(take);
    return IndexSet(std::move(candidates), series.size());
}

/// Interior local maxima that also clear mean + kappa * stddev of the series.
inline IndexSet local_max_peaks(std::span<const double> series, double kappa) {
    const std::size_t n = series.size();
    if (n == 0) throw Error("empty-series", "cannot detect peaks in an empty series");
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : series) var += (v - mean) * (v - mean);
    const double threshold = mean + kappa * std::sqrt(var / static_cast<double>(n));
    std::vector<std::size_t> out;
    for (std::size_t t = 1; t + 1 < n; ++t) {
        if (series[t] > series[t - 1] && series[t] >= series[t + 1] && series[t] >= threshold) {
            out.push_back(t);
        }
    }
    return IndexSet(std::move(out), n);
}

inline IndexSet detect_peaks(std::span<const double> series, PeakMethod method, double q,
                             double kappa) {
    if (series.empty()) throw Error("empty-series", "cannot detect peaks in an empty series");
    switch (method) {
    case PeakMethod::TopQ:
        return top_quantile(series, q);
    case PeakMethod::LocalMax:
        return local_max_peaks(series, kappa);
    }
    throw Error("unknown-method", "unknown peak method");
}

inline IndexSet detect_peaks(std::span<const double> series, const MetricParams& p) {
    return detect_peaks(series, p.peak_method, p.q, p.peak_kappa);
}

/// Linearly interpolated percentile (pct in [0, 100]) of a series.
inline double percentile(std::span<const double> series, double pct) {
    if (series.empty()) throw Error("empty-series", "percentile of an empty series");
    std::vector<double> v(series.begin(), series.end());
    std::sort(v.begin(), v.end());
    const double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + (v[hi] - v[lo]) * frac;
}

/// Aligned per-token series for one trace. `waad`, `delta` and `entropy` are indexed by
/// response offset; the FAI series cover every sequence position.
struct RhythmProfile {
    std::size_t response_start = 0;
    std::size_t sequence_length = 0;
    std::vector<double> waad;
    std::vector<double> delta;
    FaiSeries fai_global;
    std::optional<FaiSeries> fai_receiver;
    std::optional<std::vector<double>> entropy;
    MetricParams params;

    std::size_t response_length() const noexcept { return sequence_length - response_start; }

    /// FAI restricted to response positions.
    std::vector<double> response_fai(const FaiSeries& f) const {
        return {f.values.begin() + static_cast<std::ptrdiff_t>(response_start), f.values.end()};
    }
};

} // namespace rhythm
