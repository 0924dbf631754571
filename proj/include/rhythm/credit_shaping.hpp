#pragma once

// Per-token advantage scaling factors gamma_t for three credit schemes:
//   local   - amplify tokens at the largest WAAD transitions (preplan tokens),
//   global  - amplify tokens with the highest future attention influence (anchors),
//   coupled - amplify anchors, but move a fraction alpha of the bonus of each locally
//             dominated anchor back to the transition token that introduced it.
// Also: group-normalized advantages and a reference clipped-surrogate evaluator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rhythm/error.hpp"
#include "rhythm/index_set.hpp"
#include "rhythm/rhythm_metrics.hpp"

namespace rhythm {

enum class CreditScheme { Local, Global, Coupled };

inline std::string to_string(CreditScheme s) {
    switch (s) {
    case CreditScheme::Local: return "local";
    case CreditScheme::Global: return "global";
    case CreditScheme::Coupled: return "coupled";
    }
    return "?";
}

inline CreditScheme parse_credit_scheme(const std::string& s) {
    if (s == "local") return CreditScheme::Local;
    if (s == "global") return CreditScheme::Global;
    if (s == "coupled") return CreditScheme::Coupled;
    throw Error("invalid-params", "unknown credit scheme '" + s + "'");
}

/// Which token of the pair (t, t+1) receives the credit for delta_t.
enum class DeltaCredit { Earlier, Later };

inline constexpr double kTauWaadPercentile = 30.0;
inline constexpr double kTauDeltaPercentile = 70.0;

struct CreditParams {
    double gamma_amp = 1.5;
    double q = 0.4;
    double alpha = 0.5;
    // Unset thresholds resolve per trace to the 30th WAAD / 70th delta percentile.
    std::optional<double> tau_waad;
    std::optional<double> tau_delta;
    std::size_t k = 2;
    bool nonneg_only = true;
    DeltaCredit delta_credit = DeltaCredit::Earlier;

    void validate() const {
        if (!(gamma_amp >= 1.0)) throw Error("invalid-params", "gamma_amp must be >= 1");
        if (!(q > 0.0 && q <= 1.0)) throw Error("quantile-out-of-range", "q must lie in (0, 1]");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("invalid-params", "alpha must lie in [0, 1]");
        if (tau_waad && !(*tau_waad >= 0.0)) throw Error("invalid-params", "tau_waad must be >= 0");
        if (tau_delta && !(*tau_delta >= 0.0)) throw Error("invalid-params", "tau_delta must be >= 0");
        if (k < 1) throw Error("invalid-params", "k must be >= 1");
    }
};

struct CreditWeights {
    CreditScheme scheme = CreditScheme::Global;
    std::vector<double> gamma;  // one per response token
    IndexSet selected_local;
    IndexSet selected_global;
    IndexSet dominated;
    std::map<std::size_t, std::size_t> intro_map;  // dominated anchor -> intro position
    CreditParams params;                           // thresholds resolved
};

// --- GRPO advantage ------------------------------------------------------------

struct GroupAdvantage {
    std::vector<double> values;
    bool degenerate = false;
};

/// (r_i - mean) / std with the population standard deviation. A zero-variance group
/// yields all zeros and sets `degenerate`.
inline GroupAdvantage group_normalized_advantage(std::span<const double> rewards) {
    if (rewards.size() < 2) throw Error("group-too-small", "a group needs at least two rewards");
    const auto n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / n);
    GroupAdvantage out{std::vector<double>(rewards.size(), 0.0), false};
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
        out.degenerate = true;
        return out;
    }
    for (std::size_t i = 0; i < rewards.size(); ++i) out.values[i] = (rewards[i] - mean) / sd;
    return out;
}

// --- gamma schemes -------------------------------------------------------------

/// n_response defaults to len(delta); the credited position of delta_t is t, or t+1
/// with DeltaCredit::Later.
inline CreditWeights gamma_local(std::span<const double> delta, const CreditParams& params,
                                 std::size_t n_response = 0) {
    params.validate();
    if (delta.empty()) throw Error("empty-series", "delta series is empty");
    const std::size_t shift = params.delta_credit == DeltaCredit::Later ? 1 : 0;
    if (n_response == 0) n_response = delta.size() + shift;
    if (n_response < delta.size() + shift) throw Error("misaligned-series", "n_response too small for delta series");

    const auto picked = top_quantile(delta, params.q);
    std::vector<std::size_t> credited;
    for (std::size_t t : picked) credited.push_back(t + shift);

    CreditWeights w;
    w.scheme = CreditScheme::Local;
    w.params = params;
    w.gamma.assign(n_response, 1.0);
    for (std::size_t t : credited) w.gamma[t] = 1.0 + (params.gamma_amp - 1.0);
    w.selected_local = IndexSet(std::move(credited), n_response);
    w.selected_global = IndexSet({}, n_response);
    w.dominated = IndexSet({}, n_response);
    return w;
}

inline CreditWeights gamma_global(std::span<const double> fai, const CreditParams& params) {
    params.validate();
    if (fai.empty()) throw Error("empty-series", "FAI series is empty");
    CreditWeights w;
    w.scheme = CreditScheme::Global;
    w.params = params;
    w.selected_global = top_quantile(fai, params.q);
    w.gamma.assign(fai.size(), 1.0);
    for (std::size_t t : w.selected_global) w.gamma[t] = 1.0 + (params.gamma_amp - 1.0);
    w.selected_local = IndexSet({}, fai.size());
    w.dominated = IndexSet({}, fai.size());
    return w;
}

/// Coupled scheme. An anchor t in TopQ(fai) is locally dominated when
/// waad[t] <= tau_waad and max(delta[t-k .. t-1]) >= tau_delta; its intro is the argmax
/// of that window (latest position on ties). Bonuses of a position holding several roles
/// add, capped at 2 (gamma_amp - 1).
inline CreditWeights gamma_coupled(std::span<const double> fai, std::span<const double> waad,
                                   std::span<const double> delta, const CreditParams& params) {
    params.validate();
    const std::size_t n = fai.size();
    if (n == 0) throw Error("empty-series", "FAI series is empty");
    if (waad.size() != n || delta.size() + 1 != n) {
        throw Error("misaligned-series", "fai, waad and delta must cover the same response positions");
    }

    CreditWeights w;
    w.scheme = CreditScheme::Coupled;
    w.params = params;
    w.params.tau_waad = params.tau_waad.value_or(percentile(waad, kTauWaadPercentile));
    w.params.tau_delta = params.tau_delta.value_or(
        delta.empty() ? std::numeric_limits<double>::infinity() : percentile(delta, kTauDeltaPercentile));
    const double tau_waad = *w.params.tau_waad;
    const double tau_delta = *w.params.tau_delta;
    const double bonus = params.gamma_amp - 1.0;

    w.selected_global = top_quantile(fai, params.q);
    std::vector<std::size_t> dominated;
    std::set<std::size_t> intros;
    for (std::size_t t : w.selected_global) {
        if (t == 0 || waad[t] > tau_waad) continue;
        const std::size_t lo = t > params.k ? t - params.k : 0;
        std::size_t best = t - 1;
        for (std::size_t u = t - 1; u + 1 > lo; --u) {
            if (delta[u] > delta[best]) best = u;
            if (u == 0) break;
        }
        if (delta[best] >= tau_delta) {
            dominated.push_back(t);
            w.intro_map[t] = best;
            intros.insert(best);
        }
    }
    w.dominated = IndexSet(dominated, n);

    std::vector<double> extra(n, 0.0);
    for (std::size_t t : w.selected_global) {
        extra[t] += w.dominated.contains(t) ? (1.0 - params.alpha) * bonus : bonus;
    }
    for (std::size_t u : intros) extra[u] += params.alpha * bonus;
    w.gamma.resize(n);
    for (std::size_t t = 0; t < n; ++t) w.gamma[t] = 1.0 + std::min(extra[t], 2.0 * bonus);
    w.selected_local = IndexSet({}, n);
    return w;
}

// --- applying the weights --------------------------------------------------------

enum class AdvantageSource { Gae, GroupNormalized, External };

struct AdvantageSeries {
    std::vector<double> values;
    AdvantageSource source = AdvantageSource::External;
};

/// gamma_t * A_t, leaving negative advantages untouched when nonneg_only is set.
inline AdvantageSeries shape_advantages(const AdvantageSeries& adv, const CreditWeights& weights,
                                        const CreditParams& params) {
    if (adv.values.size() != weights.gamma.size()) {
        throw Error("length-mismatch", "advantage and gamma series differ in length");
    }
    AdvantageSeries out{adv.values, adv.source};
    for (std::size_t t = 0; t < out.values.size(); ++t) {
        const double a = adv.values[t];
        if (!std::isfinite(a)) throw Error("invalid-params", "advantage values must be finite");
        if (a >= 0.0 || !params.nonneg_only) out.values[t] = weights.gamma[t] * a;
    }
    return out;
}

/// min(r A gamma, clip(r, 1 - eps, 1 + eps) A gamma) for one token.
inline double shaped_token_objective(double ratio, double adv, double gamma, double epsilon) {
    const double scaled = adv * gamma;
    const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    return std::min(ratio * scaled, clipped * scaled);
}

// --- export ------------------------------------------------------------------------

namespace detail {

inline nlohmann::json optional_number(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
}

} // namespace detail

inline nlohmann::json to_json(const CreditParams& p, CreditScheme scheme) {
    nlohmann::json j;
    j["scheme"] = to_string(scheme);
    j["gamma_amp"] = p.gamma_amp;
    j["q"] = p.q;
    j["alpha"] = p.alpha;
    j["k"] = p.k;
    j["tau_waad"] = detail::optional_number(p.tau_waad);
    j["tau_delta"] = detail::optional_number(p.tau_delta);
    j["nonneg_only"] = p.nonneg_only;
    j["delta_credit"] = p.delta_credit == DeltaCredit::Earlier ? "t" : "t+1";
    return j;
}

/// One line of the weight export consumed by external trainers. Indices are response
/// offsets (0 = first response token).
inline nlohmann::json weights_record(const std::string& trace_id, const CreditWeights& w) {
    nlohmann::json intro = nlohmann::json::object();
    for (const auto& [anchor, pos] : w.intro_map) intro[std::to_string(anchor)] = pos;
    nlohmann::json j;
    j["trace_id"] = trace_id;
    j["gamma"] = w.gamma;
    j["selected_local"] = w.selected_local.indices();
    j["selected_global"] = w.selected_global.indices();
    j["dominated"] = w.dominated.indices();
    j["intro_map"] = std::move(intro);
    j["params"] = to_json(w.params, w.scheme);
    return j;
}

} // namespace rhythm
