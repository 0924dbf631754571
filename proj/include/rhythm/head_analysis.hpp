#pragma once

// Head-level analysis: backward attention span per head, local/global grouping by
// span quantile, group-mean attention maps, and receiver-head scoring by the excess
// kurtosis of column-wise inbound attention.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "rhythm/error.hpp"
#include "rhythm/matrix.hpp"
#include "rhythm/rhythm_metrics.hpp"
#include "rhythm/tensor_io.hpp"

namespace rhythm {

/// Attention-weighted mean backward distance over the rows in `range`.
inline double head_span(const SquareMatrix& map, const IndexRange& range) {
    require_range_within(range, map.size());
    double total = 0.0;
    for (std::size_t t = range.begin; t < range.end; ++t) {
        const auto row = map.row(t);
        double acc = 0.0;
        for (std::size_t s = 0; s < t; ++s) acc += row[s] * static_cast<double>(t - s);
        total += acc;
    }
    return total / static_cast<double>(range.size());
}

struct HeadSpanTable {
    std::map<HeadId, double> spans;
    IndexRange response_range;
};

inline HeadSpanTable span_table(const AttentionStack& stack, const IndexRange& range) {
    HeadSpanTable table{{}, range};
    for (const auto& e : stack.entries) table.spans[e.id] = head_span(e.map, range);
    return table;
}

/// Element-wise mean of several span tables over the same head set. Used when head
/// groups are fixed once per corpus instead of per trace.
inline HeadSpanTable average_span_tables(const std::vector<HeadSpanTable>& tables) {
    if (tables.empty()) throw Error("empty-group", "no span tables to average");
    HeadSpanTable out{{}, {}};
    for (const auto& [id, _] : tables.front().spans) out.spans[id] = 0.0;
    for (const auto& t : tables) {
        if (t.spans.size() != out.spans.size()) throw Error("missing-head", "span tables cover different heads");
        for (const auto& [id, v] : t.spans) {
            auto it = out.spans.find(id);
            if (it == out.spans.end()) throw Error("missing-head", "head " + to_string(id) + " not in every table");
            it->second += v;
        }
    }
    for (auto& [_, v] : out.spans) v /= static_cast<double>(tables.size());
    return out;
}

struct HeadGroups {
    std::set<HeadId> local_set;
    std::set<HeadId> global_set;
    double quantile = 0.3;
};

namespace detail {

// Heads ordered by ascending score, ties by ascending (layer, head).
inline std::vector<std::pair<HeadId, double>> ranked(const std::map<HeadId, double>& scores) {
    std::vector<std::pair<HeadId, double>> v(scores.begin(), scores.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    return v;
}

} // namespace detail

/// Bottom ceil(q*H) heads by span form the local set, top ceil(q*H) the global set.
inline HeadGroups group_heads(const HeadSpanTable& table, double quantile) {
    if (!(quantile > 0.0 && quantile <= 0.5)) {
        throw Error("quantile-out-of-range", "head quantile must lie in (0, 0.5]");
    }
    if (table.spans.empty()) throw Error("empty-group", "span table is empty");
    const std::size_t total = table.spans.size();
    const std::size_t k = quantile_count(quantile, total);
    if (2 * k > total) {
        throw Error("quantile-out-of-range",
                    "ceil(q*H) local plus global heads exceed the " + std::to_string(total) + " heads available");
    }
    const auto order = detail::ranked(table.spans);
    HeadGroups g{{}, {}, quantile};
    for (std::size_t i = 0; i < k; ++i) {
        g.local_set.insert(order[i].first);
        g.global_set.insert(order[total - 1 - i].first);
    }
    return g;
}

enum class GroupKind { Local, Global, Receiver };

inline std::string to_string(GroupKind g) {
    switch (g) {
    case GroupKind::Local: return "local";
    case GroupKind::Global: return "global";
    case GroupKind::Receiver: return "receiver";
    }
    return "none";
}

struct AggregatedMap {
    SquareMatrix map;
    GroupKind source_group = GroupKind::Local;
    std::size_t member_count = 0;
};

/// Unweighted element-wise mean of the member heads' maps.
inline AggregatedMap aggregate_group(const AttentionStack& stack, const std::set<HeadId>& group,
                                     GroupKind kind) {
    if (group.empty()) throw Error("empty-group", "cannot aggregate an empty head group");
    const std::size_t n = stack.sequence_length;
    AggregatedMap out{SquareMatrix(n), kind, group.size()};
    auto acc = out.map.values();
    for (const auto& id : group) {
        const HeadMap* hm = stack.find(id);
        if (hm == nullptr) throw Error("missing-head", "head " + to_string(id) + " not in stack");
        const auto src = hm->map.values();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += src[i];
    }
    const double inv = 1.0 / static_cast<double>(group.size());
    for (auto& v : acc) v *= inv;
    return out;
}

/// Excess kurtosis of the column-mean inbound attention c_s = mean_{t in R, t >= s} A[t][s],
/// over every column reached by at least one response row. Throws
/// "degenerate-distribution" when all c_s coincide.
inline double receiver_score(const SquareMatrix& map, const IndexRange& range) {
    require_range_within(range, map.size());
    std::vector<double> col_means;
    for (std::size_t s = 0; s < range.end; ++s) {
        const std::size_t first = std::max(s, range.begin);
        double acc = 0.0;
        for (std::size_t t = first; t < range.end; ++t) acc += map(t, s);
        col_means.push_back(acc / static_cast<double>(range.end - first));
    }
    const auto n = static_cast<double>(col_means.size());
    double mean = 0.0;
    for (double c : col_means) mean += c;
    mean /= n;
    double m2 = 0.0;
    double m4 = 0.0;
    for (double c : col_means) {
        const double d = c - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m4 /= n;
    if (m2 <= 1e-24 * std::max(mean * mean, 1e-300)) {
        throw Error("degenerate-distribution", "column means are constant; kurtosis undefined");
    }
    return m4 / (m2 * m2) - 3.0;
}

struct ReceiverScores {
    std::map<HeadId, double> scores;       // heads with a defined kurtosis
    std::vector<HeadId> degenerate;        // excluded from ranking
};

inline ReceiverScores score_receivers(const AttentionStack& stack, const IndexRange& range) {
    ReceiverScores out;
    for (const auto& e : stack.entries) {
        try {
            out.scores[e.id] = receiver_score(e.map, range);
        } catch (const Error& err) {
            if (err.code() != "degenerate-distribution") throw;
            out.degenerate.push_back(e.id);
        }
    }
    return out;
}

/// Top ceil(q*H) heads by kurtosis, same tie rule as group_heads.
inline std::set<HeadId> select_receivers(const ReceiverScores& scores, double quantile) {
    if (!(quantile > 0.0 && quantile <= 1.0)) throw Error("quantile-out-of-range", "receiver quantile must lie in (0, 1]");
    if (scores.scores.empty()) throw Error("empty-group", "no head has a defined receiver score");
    const auto order = detail::ranked(scores.scores);
    const std::size_t k = quantile_count(quantile, order.size());
    std::set<HeadId> out;
    for (std::size_t i = 0; i < k; ++i) out.insert(order[order.size() - 1 - i].first);
    return out;
}

/// CSV `layer,head,span,group`, one row per head in (layer, head) order.
inline void write_span_csv(std::ostream& os, const HeadSpanTable& table, const HeadGroups& groups,
                           const std::set<HeadId>& receivers = {}) {
    os << "layer,head,span,group\n";
    for (const auto& [id, span] : table.spans) {
        std::string group = "none";
        if (groups.local_set.contains(id)) group = "local";
        else if (groups.global_set.contains(id)) group = "global";
        else if (receivers.contains(id)) group = "receiver";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", span);
        os << id.layer << ',' << id.head << ',' << buf << ',' << group << '\n';
    }
}

} // namespace rhythm
