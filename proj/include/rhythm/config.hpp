#pragma once

// Run configuration: a flat `key = value` file (TOML subset: strings may be quoted,
// `#` starts a comment). Every default is the published constant where one exists.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "rhythm/coupling_stats.hpp"
#include "rhythm/credit_shaping.hpp"
#include "rhythm/error.hpp"
#include "rhythm/rhythm_metrics.hpp"

namespace rhythm {

enum class SpanMode { PerTrace, Corpus };

struct RunConfig {
    MetricParams metrics;
    CreditParams credit;
    double head_quantile = 0.3;
    double receiver_quantile = 0.3;
    CouplingParams coupling{1, 1000, 0, Aggregation::Micro};
    SpanMode span_mode = SpanMode::PerTrace;
    bool strict_layers = false;
    std::string inputs;  // glob over .attd files; each pairs with a sibling <stem>.json trace
    std::filesystem::path output_dir = "rhythm_out";
    std::size_t workers = 1;

    void validate() const {
        metrics.validate();
        credit.validate();
        if (!(head_quantile > 0.0 && head_quantile <= 0.5)) {
            throw Error("quantile-out-of-range", "head_quantile must lie in (0, 0.5]");
        }
        if (!(receiver_quantile > 0.0 && receiver_quantile <= 1.0)) {
            throw Error("quantile-out-of-range", "receiver_quantile must lie in (0, 1]");
        }
        if (coupling.max_lag < 0) throw Error("invalid-lag", "max_lag must be nonnegative");
        if (coupling.n_shuffles < 1) throw Error("invalid-params", "n_shuffles must be >= 1");
        if (workers < 1) throw Error("invalid-params", "workers must be >= 1");
    }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw Error("config-error", "'" + key + "' expects a number, got '" + v + "'");
    }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw Error("config-error", "'" + key + "' expects a nonnegative integer, got '" + v + "'");
    }
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw Error("config-error", "'" + key + "' expects true or false, got '" + v + "'");
}

} // namespace detail

/// Applies one setting. Unknown keys are an error.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "window") c.metrics.window = to_uint(key, value);
    else if (key == "horizon_lo") c.metrics.horizon_lo = to_uint(key, value);
    else if (key == "horizon_hi") c.metrics.horizon_hi = to_uint(key, value);
    else if (key == "q") c.metrics.q = c.credit.q = to_double(key, value);
    else if (key == "peak_method") c.metrics.peak_method = parse_peak_method(value);
    else if (key == "peak_kappa") c.metrics.peak_kappa = to_double(key, value);
    else if (key == "include_sink") c.metrics.include_sink = to_bool(key, value);
    else if (key == "gamma_amp") c.credit.gamma_amp = to_double(key, value);
    else if (key == "alpha") c.credit.alpha = to_double(key, value);
    else if (key == "k") c.credit.k = to_uint(key, value);
    else if (key == "tau_waad") c.credit.tau_waad = value == "auto" ? std::nullopt : std::optional(to_double(key, value));
    else if (key == "tau_delta") c.credit.tau_delta = value == "auto" ? std::nullopt : std::optional(to_double(key, value));
    else if (key == "nonneg_only") c.credit.nonneg_only = to_bool(key, value);
    else if (key == "delta_credit") {
        if (value == "t") c.credit.delta_credit = DeltaCredit::Earlier;
        else if (value == "t+1") c.credit.delta_credit = DeltaCredit::Later;
        else throw Error("config-error", "delta_credit must be t or t+1");
    }
    else if (key == "head_quantile") c.head_quantile = to_double(key, value);
    else if (key == "receiver_quantile") c.receiver_quantile = to_double(key, value);
    else if (key == "max_lag") c.coupling.max_lag = static_cast<long>(to_uint(key, value));
    else if (key == "n_shuffles") c.coupling.n_shuffles = to_uint(key, value);
    else if (key == "seed") c.coupling.seed = to_uint(key, value);
    else if (key == "aggregation") c.coupling.aggregation = parse_aggregation(value);
    else if (key == "span_mode") {
        if (value == "per-trace") c.span_mode = SpanMode::PerTrace;
        else if (value == "corpus") c.span_mode = SpanMode::Corpus;
        else throw Error("config-error", "span_mode must be per-trace or corpus");
    }
    else if (key == "strict_layers") c.strict_layers = to_bool(key, value);
    else if (key == "inputs") c.inputs = value;
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "workers") c.workers = to_uint(key, value);
    else throw Error("config-error", "unknown config key '" + key + "'");
}

/// Relative `inputs` / `output_dir` values resolve against `base_dir` when given.
inline RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir = {}) {
    RunConfig c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::trim(detail::strip_comment(line));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error("config-error", "line " + std::to_string(lineno) + ": expected key = value");
        }
        const auto key = detail::trim(line.substr(0, eq));
        auto value = detail::trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        apply_setting(c, key, value);
    }
    if (!base_dir.empty()) {
        if (!c.inputs.empty() && std::filesystem::path(c.inputs).is_relative()) c.inputs = (base_dir / c.inputs).string();
        if (c.output_dir.is_relative()) c.output_dir = base_dir / c.output_dir;
    }
    c.validate();
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("io-error", "cannot open config " + path.string());
    return parse_run_config(in, path.parent_path());
}

/// Snapshot of every setting that can influence results (excludes paths and worker count).
inline nlohmann::json config_snapshot(const RunConfig& c) {
    nlohmann::json j;
    j["window"] = c.metrics.window;
    j["horizon_lo"] = c.metrics.horizon_lo;
    j["horizon_hi"] = c.metrics.horizon_hi;
    j["q"] = c.metrics.q;
    j["peak_method"] = to_string(c.metrics.peak_method);
    j["peak_kappa"] = c.metrics.peak_kappa;
    j["include_sink"] = c.metrics.include_sink;
    j["credit"] = to_json(c.credit, CreditScheme::Global);
    j["credit"].erase("scheme");
    j["head_quantile"] = c.head_quantile;
    j["receiver_quantile"] = c.receiver_quantile;
    j["max_lag"] = c.coupling.max_lag;
    j["n_shuffles"] = c.coupling.n_shuffles;
    j["seed"] = c.coupling.seed;
    j["aggregation"] = to_string(c.coupling.aggregation);
    j["span_mode"] = c.span_mode == SpanMode::PerTrace ? "per-trace" : "corpus";
    j["strict_layers"] = c.strict_layers;
    return j;
}

} // namespace rhythm
