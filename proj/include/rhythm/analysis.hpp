#pragma once

// Single-trace composition: validate -> group heads -> aggregate -> rhythm profile ->
// credit weights / coupling peak sets.

#include <optional>
#include <set>
#include <string>

#include "rhythm/config.hpp"
#include "rhythm/coupling_stats.hpp"
#include "rhythm/credit_shaping.hpp"
#include "rhythm/error.hpp"
#include "rhythm/head_analysis.hpp"
#include "rhythm/rhythm_metrics.hpp"
#include "rhythm/tensor_io.hpp"

namespace rhythm {

struct TraceAnalysis {
    HeadSpanTable spans;
    HeadGroups groups;
    std::set<HeadId> receivers;
    AggregatedMap local_map;
    AggregatedMap global_map;
    RhythmProfile profile;
};

/// Throws "validation-failed" (first violation in the message) if the stack is invalid.
inline void require_valid(const AttentionStack& stack, const LayerPolicy& policy) {
    const auto report = validate_stack(stack, policy);
    if (!report.ok()) {
        const auto& v = report.violations.front();
        throw Error("validation-failed", v.rule + " at " + v.location + " (measured " + std::to_string(v.measured) +
                                             "), " + std::to_string(report.violations.size()) + " violation(s)");
    }
}

/// `fixed_groups` replaces per-trace grouping (corpus span mode).
inline TraceAnalysis analyze_trace(const AttentionStack& stack, const TokenTrace& trace, const RunConfig& cfg,
                                   const std::optional<HeadGroups>& fixed_groups = std::nullopt) {
    require_valid(stack, LayerPolicy{cfg.strict_layers});
    if (trace.tokens.size() != stack.sequence_length) {
        throw Error("dimension-mismatch", "trace has " + std::to_string(trace.tokens.size()) +
                                              " tokens but the dump has N=" + std::to_string(stack.sequence_length));
    }
    const IndexRange range = trace.response_range();
    if (range.empty()) throw Error("empty-response-range", "trace has no response tokens");
    if (range.size() < 2) throw Error("series-too-short", "need at least two response tokens");

    TraceAnalysis a;
    a.spans = span_table(stack, range);
    a.groups = fixed_groups ? *fixed_groups : group_heads(a.spans, cfg.head_quantile);
    a.local_map = aggregate_group(stack, a.groups.local_set, GroupKind::Local);
    a.global_map = aggregate_group(stack, a.groups.global_set, GroupKind::Global);

    const auto receiver_scores = score_receivers(stack, range);
    if (!receiver_scores.scores.empty()) a.receivers = select_receivers(receiver_scores, cfg.receiver_quantile);

    auto& p = a.profile;
    p.params = cfg.metrics;
    p.response_start = range.begin;
    p.sequence_length = stack.sequence_length;
    p.waad = waad_series(a.local_map.map, range, cfg.metrics.window, cfg.metrics.include_sink);
    p.delta = waad_delta(p.waad);
    p.fai_global = fai_series(a.global_map.map, range, cfg.metrics.horizon_lo, cfg.metrics.horizon_hi);
    if (!a.receivers.empty()) {
        const auto recv = aggregate_group(stack, a.receivers, GroupKind::Receiver);
        p.fai_receiver = fai_series(recv.map, range, cfg.metrics.horizon_lo, cfg.metrics.horizon_hi);
    }
    p.entropy = trace.entropy;
    return a;
}

inline CreditWeights compute_weights(const RhythmProfile& p, CreditScheme scheme, const CreditParams& params) {
    switch (scheme) {
    case CreditScheme::Local:
        return gamma_local(p.delta, params, p.response_length());
    case CreditScheme::Global:
        return gamma_global(p.response_fai(p.fai_global), params);
    case CreditScheme::Coupled:
        return gamma_coupled(p.response_fai(p.fai_global), p.waad, p.delta, params);
    }
    throw Error("invalid-params", "unknown credit scheme");
}

/// Peak sets over response offsets for the coupling statistics.
inline CouplingTrace coupling_trace(const RhythmProfile& p) {
    CouplingTrace c;
    c.n_positions = p.response_length();
    c.entropy = p.entropy;
    c.waad_peaks = detect_peaks(p.waad, p.params);
    c.fai_global_peaks = detect_peaks(p.response_fai(p.fai_global), p.params);
    if (p.fai_receiver) c.fai_receiver_peaks = detect_peaks(p.response_fai(*p.fai_receiver), p.params);
    return c;
}

} // namespace rhythm
