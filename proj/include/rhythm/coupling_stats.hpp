#pragma once

// Coupling statistics between rhythm series, each reported as observed vs. a
// chance baseline and their relative lift (observed - baseline) / baseline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rhythm/error.hpp"
#include "rhythm/index_set.hpp"

namespace rhythm {

struct LiftStat {
    std::string statistic_name;
    double observed = 0.0;
    double baseline = 0.0;
    double lift = 0.0;  // NaN when the baseline is zero
    std::size_t n_shuffles = 0;
    std::uint64_t seed = 0;
    std::size_t n_traces = 1;
};

inline LiftStat make_lift(std::string name, double observed, double baseline, std::size_t n_shuffles = 0,
                          std::uint64_t seed = 0, std::size_t n_traces = 1) {
    const double lift = baseline != 0.0 ? (observed - baseline) / baseline
                                        : std::numeric_limits<double>::quiet_NaN();
    return {std::move(name), observed, baseline, lift, n_shuffles, seed, n_traces};
}

inline constexpr const char* kEntropyAtWaadPeaks = "entropy_at_waad_peaks";
inline constexpr const char* kReceiverGlobalCooccurrence = "receiver_global_fai_peak_cooccurrence";
inline constexpr const char* kFaiFollowsWaad = "fai_peak_follows_or_coincides_waad_peak";

enum class Aggregation { Micro, Macro };

inline Aggregation parse_aggregation(const std::string& s) {
    if (s == "micro") return Aggregation::Micro;
    if (s == "macro") return Aggregation::Macro;
    throw Error("invalid-params", "aggregation must be micro or macro, got '" + s + "'");
}

inline std::string to_string(Aggregation a) { return a == Aggregation::Micro ? "micro" : "macro"; }

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Independent stream per Monte Carlo trial, so trials can be evaluated in any order.
inline std::mt19937_64 trial_rng(std::uint64_t seed, std::size_t trial) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(trial))));
}

inline double mean_at(const std::vector<double>& v, const IndexSet& idx, double& sum_out) {
    double s = 0.0;
    for (std::size_t i : idx) s += v[i];
    sum_out = s;
    return s / static_cast<double>(idx.size());
}

// hit[p] is true when some WAAD peak w satisfies 0 <= p - w <= max_lag.
inline std::vector<char> follow_mask(const IndexSet& waad_peaks, std::size_t n, std::size_t max_lag) {
    std::vector<char> hit(n, 0);
    for (std::size_t w : waad_peaks) {
        for (std::size_t p = w; p < n && p <= w + max_lag; ++p) hit[p] = 1;
    }
    return hit;
}

} // namespace detail

// --- single-trace statistics ------------------------------------------------

/// Mean entropy at WAAD peaks against the mean entropy over all response positions.
inline LiftStat entropy_at_peaks_lift(const std::vector<double>& entropy, const IndexSet& peaks) {
    if (peaks.empty()) throw Error("empty-peak-set", "no peaks to average entropy over");
    if (peaks.indices().back() >= entropy.size()) throw Error("index-out-of-range", "peak outside entropy series");
    double peak_sum = 0.0;
    const double observed = detail::mean_at(entropy, peaks, peak_sum);
    const double baseline = std::accumulate(entropy.begin(), entropy.end(), 0.0) / static_cast<double>(entropy.size());
    return make_lift(kEntropyAtWaadPeaks, observed, baseline);
}

/// Fraction of set_a that lies in set_b, against |set_b| / n (set_a placed uniformly).
inline LiftStat cooccurrence_lift(const IndexSet& set_a, const IndexSet& set_b, std::size_t n_positions) {
    if (set_a.empty()) throw Error("empty-set-a", "co-occurrence needs a nonempty first set");
    if (n_positions == 0) throw Error("invalid-params", "n_positions must be positive");
    if (set_a.indices().back() >= n_positions || (!set_b.empty() && set_b.indices().back() >= n_positions)) {
        throw Error("index-out-of-range", "peak set exceeds n_positions");
    }
    const double observed = static_cast<double>(set_a.intersection_size(set_b)) / static_cast<double>(set_a.size());
    const double baseline = static_cast<double>(set_b.size()) / static_cast<double>(n_positions);
    return make_lift(kReceiverGlobalCooccurrence, observed, baseline);
}

/// Fraction of FAI peaks at lag 0..max_lag after some WAAD peak. The baseline re-draws
/// |fai_peaks| distinct positions uniformly over fai_peaks.universe_size(), n_shuffles times.
inline LiftStat follows_or_coincides_lift(const IndexSet& fai_peaks, const IndexSet& waad_peaks, long max_lag,
                                          std::size_t n_shuffles, std::uint64_t seed) {
    if (max_lag < 0) throw Error("invalid-lag", "max_lag must be nonnegative");
    if (n_shuffles < 1) throw Error("invalid-params", "n_shuffles must be >= 1");
    if (fai_peaks.empty()) throw Error("empty-peak-set", "no FAI peaks");
    const std::size_t n = fai_peaks.universe_size();
    const auto hit = detail::follow_mask(waad_peaks, n, static_cast<std::size_t>(max_lag));
    std::size_t observed_hits = 0;
    for (std::size_t p : fai_peaks) observed_hits += hit[p];
    const auto k = static_cast<double>(fai_peaks.size());

    std::vector<std::size_t> positions(n);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    std::vector<std::size_t> draw(fai_peaks.size());
    double baseline_acc = 0.0;
    for (std::size_t trial = 0; trial < n_shuffles; ++trial) {
        auto rng = detail::trial_rng(seed, trial);
        std::sample(positions.begin(), positions.end(), draw.begin(), draw.size(), rng);
        std::size_t hits = 0;
        for (std::size_t p : draw) hits += hit[p];
        baseline_acc += static_cast<double>(hits) / k;
    }
    return make_lift(kFaiFollowsWaad, static_cast<double>(observed_hits) / k,
                     baseline_acc / static_cast<double>(n_shuffles), n_shuffles, seed);
}

// --- corpus-level statistics ------------------------------------------------

/// Peak sets of one trace, all indexed by response offset.
struct CouplingTrace {
    std::size_t n_positions = 0;
    std::optional<std::vector<double>> entropy;
    IndexSet waad_peaks;
    IndexSet fai_global_peaks;
    std::optional<IndexSet> fai_receiver_peaks;
};

struct CouplingParams {
    long max_lag = 1;
    std::size_t n_shuffles = 1000;
    std::uint64_t seed = 0;
    Aggregation aggregation = Aggregation::Micro;
};

namespace detail {

inline LiftStat macro_average(std::string name, const std::vector<LiftStat>& per_trace, std::size_t n_shuffles,
                              std::uint64_t seed) {
    double obs = 0.0;
    double base = 0.0;
    for (const auto& s : per_trace) {
        obs += s.observed;
        base += s.baseline;
    }
    const auto n = static_cast<double>(per_trace.size());
    return make_lift(std::move(name), obs / n, base / n, n_shuffles, seed, per_trace.size());
}

} // namespace detail

/// Entropy statistic pooled over traces that carry entropy and have WAAD peaks.
/// Returns nullopt if no trace qualifies.
inline std::optional<LiftStat> corpus_entropy_lift(const std::vector<CouplingTrace>& traces, Aggregation agg) {
    double peak_sum = 0.0, all_sum = 0.0;
    std::size_t peak_n = 0, all_n = 0;
    std::vector<LiftStat> per_trace;
    for (const auto& t : traces) {
        if (!t.entropy || t.waad_peaks.empty()) continue;
        per_trace.push_back(entropy_at_peaks_lift(*t.entropy, t.waad_peaks));
        for (std::size_t p : t.waad_peaks) peak_sum += (*t.entropy)[p];
        peak_n += t.waad_peaks.size();
        all_sum += std::accumulate(t.entropy->begin(), t.entropy->end(), 0.0);
        all_n += t.entropy->size();
    }
    if (per_trace.empty()) return std::nullopt;
    if (agg == Aggregation::Macro) return detail::macro_average(kEntropyAtWaadPeaks, per_trace, 0, 0);
    return make_lift(kEntropyAtWaadPeaks, peak_sum / static_cast<double>(peak_n),
                     all_sum / static_cast<double>(all_n), 0, 0, per_trace.size());
}

/// Receiver/global FAI peak co-occurrence. The pooled baseline is the expected overlap
/// sum_i |A_i| |B_i| / n_i over sum_i |A_i|.
inline std::optional<LiftStat> corpus_cooccurrence_lift(const std::vector<CouplingTrace>& traces, Aggregation agg) {
    double hits = 0.0, expected = 0.0, total = 0.0;
    std::vector<LiftStat> per_trace;
    for (const auto& t : traces) {
        if (!t.fai_receiver_peaks || t.fai_receiver_peaks->empty()) continue;
        const auto& a = *t.fai_receiver_peaks;
        per_trace.push_back(cooccurrence_lift(a, t.fai_global_peaks, t.n_positions));
        hits += static_cast<double>(a.intersection_size(t.fai_global_peaks));
        expected += static_cast<double>(a.size()) * static_cast<double>(t.fai_global_peaks.size()) /
                    static_cast<double>(t.n_positions);
        total += static_cast<double>(a.size());
    }
    if (per_trace.empty()) return std::nullopt;
    if (agg == Aggregation::Macro) return detail::macro_average(kReceiverGlobalCooccurrence, per_trace, 0, 0);
    return make_lift(kReceiverGlobalCooccurrence, hits / total, expected / total, 0, 0, per_trace.size());
}

/// FAI-follows-WAAD statistic. Each shuffle trial re-draws every trace's FAI peaks from
/// one per-trial stream, visiting traces in input order.
inline std::optional<LiftStat> corpus_follows_lift(const std::vector<CouplingTrace>& traces, const CouplingParams& p) {
    if (p.max_lag < 0) throw Error("invalid-lag", "max_lag must be nonnegative");
    if (p.n_shuffles < 1) throw Error("invalid-params", "n_shuffles must be >= 1");
    std::vector<const CouplingTrace*> used;
    for (const auto& t : traces) {
        if (!t.fai_global_peaks.empty()) used.push_back(&t);
    }
    if (used.empty()) return std::nullopt;

    std::vector<std::vector<char>> masks;
    std::size_t observed_hits = 0, total = 0;
    for (const auto* t : used) {
        masks.push_back(detail::follow_mask(t->waad_peaks, t->n_positions, static_cast<std::size_t>(p.max_lag)));
        for (std::size_t q : t->fai_global_peaks) observed_hits += masks.back()[q];
        total += t->fai_global_peaks.size();
    }

    std::vector<double> trial_frac_pooled(p.n_shuffles, 0.0);
    std::vector<double> per_trace_baseline(used.size(), 0.0);
    std::vector<std::size_t> positions;
    std::vector<std::size_t> draw;
    for (std::size_t trial = 0; trial < p.n_shuffles; ++trial) {
        auto rng = detail::trial_rng(p.seed, trial);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < used.size(); ++i) {
            const auto* t = used[i];
            positions.resize(t->n_positions);
            std::iota(positions.begin(), positions.end(), std::size_t{0});
            draw.resize(t->fai_global_peaks.size());
            std::sample(positions.begin(), positions.end(), draw.begin(), draw.size(), rng);
            std::size_t h = 0;
            for (std::size_t q : draw) h += masks[i][q];
            hits += h;
            per_trace_baseline[i] += static_cast<double>(h) / static_cast<double>(draw.size());
        }
        trial_frac_pooled[trial] = static_cast<double>(hits) / static_cast<double>(total);
    }

    if (p.aggregation == Aggregation::Macro) {
        std::vector<LiftStat> per_trace;
        for (std::size_t i = 0; i < used.size(); ++i) {
            std::size_t h = 0;
            for (std::size_t q : used[i]->fai_global_peaks) h += masks[i][q];
            const double obs = static_cast<double>(h) / static_cast<double>(used[i]->fai_global_peaks.size());
            per_trace.push_back(make_lift(kFaiFollowsWaad, obs, per_trace_baseline[i] / static_cast<double>(p.n_shuffles)));
        }
        return detail::macro_average(kFaiFollowsWaad, per_trace, p.n_shuffles, p.seed);
    }
    const double baseline =
        std::accumulate(trial_frac_pooled.begin(), trial_frac_pooled.end(), 0.0) / static_cast<double>(p.n_shuffles);
    return make_lift(kFaiFollowsWaad, static_cast<double>(observed_hits) / static_cast<double>(total), baseline,
                     p.n_shuffles, p.seed, used.size());
}

inline std::vector<LiftStat> coupling_report(const std::vector<CouplingTrace>& traces, const CouplingParams& p) {
    std::vector<LiftStat> out;
    if (auto s = corpus_entropy_lift(traces, p.aggregation)) out.push_back(*s);
    if (auto s = corpus_cooccurrence_lift(traces, p.aggregation)) out.push_back(*s);
    if (auto s = corpus_follows_lift(traces, p)) out.push_back(*s);
    return out;
}

inline nlohmann::json to_json(const LiftStat& s, const nlohmann::json& params) {
    nlohmann::json j;
    j["statistic_name"] = s.statistic_name;
    j["observed"] = s.observed;
    j["baseline"] = s.baseline;
    j["lift"] = std::isfinite(s.lift) ? nlohmann::json(s.lift) : nlohmann::json(nullptr);
    j["n_traces"] = s.n_traces;
    j["n_shuffles"] = s.n_shuffles;
    j["seed"] = s.seed;
    j["params"] = params;
    return j;
}

/// CSV with one row per statistic: name, random baseline, observed, lift (%).
inline void write_coupling_csv(std::ostream& os, const std::vector<LiftStat>& stats) {
    os << "statistic,random,observed,lift_percent\n";
    for (const auto& s : stats) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%+.2f\n", s.statistic_name.c_str(), s.baseline, s.observed,
                      100.0 * s.lift);
        os << buf;
    }
}

} // namespace rhythm
