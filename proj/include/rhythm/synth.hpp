#pragma once

// Synthetic causal attention maps with planted structure (chunk sawtooth, anchor
// columns), random valid maps for property tests, and whole synthetic traces
// (stack + token trace) for end-to-end runs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rhythm/error.hpp"
#include "rhythm/index_set.hpp"
#include "rhythm/matrix.hpp"
#include "rhythm/tensor_io.hpp"

namespace rhythm {

struct SawtoothSpec {
    std::size_t n_tokens = 0;
    std::vector<std::size_t> chunk_lengths;
    std::size_t onset_lookback = 20;
    double within_chunk_locality = 0.9;
    // Relative perturbation of the background weights, 0 = exactly uniform.
    double jitter = 0.0;

    std::vector<std::size_t> onsets() const {
        std::vector<std::size_t> out;
        std::size_t pos = 0;
        for (std::size_t len : chunk_lengths) {
            out.push_back(pos);
            pos += len;
        }
        return out;
    }

    void validate() const {
        std::size_t total = 0;
        for (std::size_t len : chunk_lengths) {
            if (len == 0) throw Error("invalid-spec", "chunk lengths must be positive");
            total += len;
        }
        if (total != n_tokens || n_tokens == 0) throw Error("invalid-spec", "chunk lengths must sum to n_tokens");
        if (!(within_chunk_locality > 0.0 && within_chunk_locality <= 1.0)) {
            throw Error("invalid-spec", "within_chunk_locality must lie in (0, 1]");
        }
        if (onset_lookback == 0) throw Error("invalid-spec", "onset_lookback must be positive");
        if (!(jitter >= 0.0 && jitter < 1.0)) throw Error("invalid-spec", "jitter must lie in [0, 1)");
    }
};

struct AnchorSpec {
    std::size_t n_tokens = 0;
    IndexSet anchor_positions;
    double anchor_mass = 0.1;
    double jitter = 0.0;

    void validate() const {
        if (n_tokens == 0) throw Error("invalid-spec", "n_tokens must be positive");
        if (anchor_positions.universe_size() > n_tokens ||
            (!anchor_positions.empty() && anchor_positions.indices().back() >= n_tokens)) {
            throw Error("invalid-spec", "anchor positions exceed n_tokens");
        }
        if (!(anchor_mass > 0.0 && anchor_mass < 1.0)) throw Error("invalid-spec", "anchor_mass must lie in (0, 1)");
        // Row n-1 sees every anchor below it.
        std::size_t reachable = 0;
        for (std::size_t a : anchor_positions) reachable += a < n_tokens - 1;
        if (anchor_mass * static_cast<double>(reachable) >= 1.0) {
            throw Error("invalid-spec", "anchor mass times reachable anchors must stay below 1");
        }
        if (!(jitter >= 0.0 && jitter < 1.0)) throw Error("invalid-spec", "jitter must lie in [0, 1)");
    }
};

namespace detail {

// Spreads `mass` over row[cols...] with weights 1 + jitter * U(-1, 1), renormalized.
inline void spread(std::span<double> row, const std::vector<std::size_t>& cols, double mass, double jitter,
                   std::mt19937_64& rng) {
    if (cols.empty() || mass <= 0.0) return;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> w(cols.size(), 1.0);
    if (jitter > 0.0) {
        for (auto& x : w) x += jitter * u(rng);
    }
    double total = 0.0;
    for (double x : w) total += x;
    for (std::size_t i = 0; i < cols.size(); ++i) row[cols[i]] += mass * w[i] / total;
}

} // namespace detail

/// Chunk onsets (t > 0) put all mass at distance min(onset_lookback, t); interior rows put
/// `within_chunk_locality` on t-1 and spread the rest over s < t-1.
inline SquareMatrix make_sawtooth_map(const SawtoothSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    const std::size_t n = spec.n_tokens;
    SquareMatrix m(n);
    const auto onset_list = spec.onsets();
    std::vector<bool> is_onset(n, false);
    for (std::size_t o : onset_list) is_onset[o] = true;

    m(0, 0) = 1.0;
    std::vector<std::size_t> cols;
    for (std::size_t t = 1; t < n; ++t) {
        auto row = m.row(t);
        if (is_onset[t]) {
            row[t - std::min(spec.onset_lookback, t)] = 1.0;
            continue;
        }
        if (t == 1) {
            row[0] = 1.0;
            continue;
        }
        row[t - 1] = spec.within_chunk_locality;
        cols.resize(t - 1);
        for (std::size_t s = 0; s + 1 < t; ++s) cols[s] = s;
        detail::spread(row, cols, 1.0 - spec.within_chunk_locality, spec.jitter, rng);
    }
    return m;
}

/// Every row t gives anchor_mass to each anchor column s < t and spreads the remainder
/// over the other columns s <= t.
inline SquareMatrix make_anchor_map(const AnchorSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    const std::size_t n = spec.n_tokens;
    SquareMatrix m(n);
    std::vector<std::size_t> others;
    for (std::size_t t = 0; t < n; ++t) {
        auto row = m.row(t);
        others.clear();
        std::size_t anchors_before = 0;
        for (std::size_t s = 0; s <= t; ++s) {
            if (s < t && spec.anchor_positions.contains(s)) {
                row[s] = spec.anchor_mass;
                ++anchors_before;
            } else {
                others.push_back(s);
            }
        }
        detail::spread(row, others, 1.0 - spec.anchor_mass * static_cast<double>(anchors_before), spec.jitter, rng);
    }
    return m;
}

/// Random causal row-stochastic map. Each row draws from a Dirichlet-like distribution
/// whose concentration varies per row, so both diffuse and peaked rows occur.
inline SquareMatrix random_causal_map(std::size_t n, std::mt19937_64& rng) {
    SquareMatrix m(n);
    std::uniform_real_distribution<double> conc(0.1, 3.0);
    for (std::size_t t = 0; t < n; ++t) {
        std::gamma_distribution<double> g(conc(rng), 1.0);
        auto row = m.row(t);
        double total = 0.0;
        for (std::size_t s = 0; s <= t; ++s) {
            row[s] = g(rng) + 1e-300;
            total += row[s];
        }
        for (std::size_t s = 0; s <= t; ++s) row[s] /= total;
    }
    return m;
}

// --- whole synthetic traces ----------------------------------------------------

enum class SynthKind { Sawtooth, Anchor };

inline SynthKind parse_synth_kind(const std::string& s) {
    if (s == "sawtooth") return SynthKind::Sawtooth;
    if (s == "anchor") return SynthKind::Anchor;
    throw Error("invalid-params", "synth kind must be sawtooth or anchor, got '" + s + "'");
}

inline std::string to_string(SynthKind k) { return k == SynthKind::Sawtooth ? "sawtooth" : "anchor"; }

struct SynthTraceSpec {
    SynthKind kind = SynthKind::Sawtooth;
    std::size_t n_tokens = 128;
    std::size_t prompt_length = 16;
    std::uint32_t layer_count = 36;
    std::uint16_t heads_per_layer = 4;
    std::size_t min_chunk = 8;
    std::size_t max_chunk = 16;
    std::size_t onset_lookback = 20;
    double locality = 0.95;
    std::size_t n_anchors = 4;
    double anchor_mass = 0.1;
    std::size_t horizon_lo = 10;  // anchors are kept where their FAI window is nonempty
};

struct SynthTrace {
    AttentionStack stack;
    TokenTrace trace;
    std::vector<std::size_t> planted;  // absolute positions: chunk onsets or anchors
};

/// Heads with even index carry near-diagonal (local) structure, odd heads diffuse or
/// anchored (global) structure. Layers follow the strict layer policy.
inline SynthTrace make_synthetic_trace(const SynthTraceSpec& spec, std::uint64_t seed) {
    if (spec.prompt_length == 0 || spec.prompt_length >= spec.n_tokens) {
        throw Error("invalid-spec", "prompt_length must lie in (0, n_tokens)");
    }
    if (spec.min_chunk < 2 || spec.max_chunk < spec.min_chunk) throw Error("invalid-spec", "bad chunk length range");
    std::mt19937_64 rng(seed);
    const std::size_t n = spec.n_tokens;
    SynthTrace out;

    SawtoothSpec saw{n, {}, spec.onset_lookback, spec.locality, 0.2};
    AnchorSpec anchors{n, IndexSet({}, n), spec.anchor_mass, 0.2};

    if (spec.kind == SynthKind::Sawtooth) {
        std::uniform_int_distribution<std::size_t> len(spec.min_chunk, spec.max_chunk);
        std::size_t pos = 0;
        while (pos < n) {
            std::size_t l = std::min(len(rng), n - pos);
            if (n - pos - l > 0 && n - pos - l < spec.min_chunk) l = n - pos;
            saw.chunk_lengths.push_back(l);
            pos += l;
        }
        for (std::size_t o : saw.onsets()) {
            if (o >= spec.prompt_length) out.planted.push_back(o);
        }
    } else {
        saw.chunk_lengths = {n};
        const std::size_t last = n > spec.horizon_lo + 1 ? n - spec.horizon_lo - 1 : 0;
        if (last <= spec.prompt_length) throw Error("invalid-spec", "response too short for anchors");
        std::vector<std::size_t> candidates;
        for (std::size_t s = spec.prompt_length; s <= last; ++s) candidates.push_back(s);
        std::vector<std::size_t> chosen(std::min(spec.n_anchors, candidates.size()));
        std::sample(candidates.begin(), candidates.end(), chosen.begin(), chosen.size(), rng);
        anchors.anchor_positions = IndexSet(chosen, n);
        out.planted = anchors.anchor_positions.indices();
    }

    out.stack.sequence_length = n;
    out.stack.layer_count = spec.layer_count;
    for (std::uint32_t layer : required_layers(spec.layer_count)) {
        for (std::uint16_t h = 0; h < spec.heads_per_layer; ++h) {
            const std::uint64_t head_seed = rng();
            HeadMap hm{{static_cast<std::uint16_t>(layer), h}, {}};
            hm.map = (h % 2 == 0) ? make_sawtooth_map(saw, head_seed) : make_anchor_map(anchors, head_seed);
            out.stack.entries.push_back(std::move(hm));
        }
    }

    std::uniform_int_distribution<std::int64_t> tok(3, 50000);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        out.trace.tokens.push_back({tok(rng), (i < spec.prompt_length ? "p" : "r") + std::to_string(i)});
    }
    out.trace.response_start = spec.prompt_length;
    std::vector<double> entropy;
    for (std::size_t i = spec.prompt_length; i < n; ++i) {
        const bool planted = std::binary_search(out.planted.begin(), out.planted.end(), i);
        entropy.push_back(0.05 + 0.3 * unit(rng) + (planted && spec.kind == SynthKind::Sawtooth ? 0.6 : 0.0));
    }
    out.trace.entropy = std::move(entropy);
    out.trace.reward = unit(rng) < 0.5 ? 0.0 : 1.0;
    out.trace.extra["planted"] = {{"kind", to_string(spec.kind)}, {"positions", out.planted}};
    return out;
}

} // namespace rhythm
