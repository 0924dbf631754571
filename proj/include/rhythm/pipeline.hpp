#pragma once

// Corpus runs over (dump, trace) pairs. Output layout under cfg.output_dir:
//   profiles/<id>.csv|.json   heads/<id>.csv   coupling.json   coupling.csv
//   weights/<id>.jsonl        weights/summary.json             manifest.json
// Traces are processed by a bounded worker pool; everything is written in trace-id
// order so results do not depend on the number of workers. A failing trace is recorded
// in the manifest and never aborts the others.

#include <glob.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "rhythm/analysis.hpp"
#include "rhythm/config.hpp"
#include "rhythm/coupling_stats.hpp"
#include "rhythm/credit_shaping.hpp"
#include "rhythm/digest.hpp"
#include "rhythm/error.hpp"
#include "rhythm/format.hpp"
#include "rhythm/head_analysis.hpp"
#include "rhythm/profile_export.hpp"
#include "rhythm/tensor_io.hpp"
#include "rhythm/version.hpp"

namespace rhythm {

namespace fs = std::filesystem;

struct TraceInput {
    std::string trace_id;
    fs::path dump_path;
    fs::path trace_path;
};

/// Dumps matching the glob, sorted by trace id (the file stem).
inline std::vector<TraceInput> discover_inputs(const std::string& pattern) {
    std::vector<TraceInput> out;
    if (pattern.empty()) return out;
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) {
            fs::path p = g.gl_pathv[i];
            fs::path trace = p;
            trace.replace_extension(".json");
            out.push_back({p.stem().string(), p, trace});
        }
    }
    globfree(&g);
    if (rc != 0 && rc != GLOB_NOMATCH) throw Error("io-error", "glob failed for '" + pattern + "'");
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.trace_id < b.trace_id; });
    return out;
}

struct TraceRecord {
    std::string trace_id;
    bool ok = false;
    std::string error_code;
    std::string error_message;
    std::string dump_sha256;
    std::string trace_sha256;
    std::vector<std::string> outputs;  // relative to the output directory
    double wall_ms = 0.0;
};

struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::vector<TraceInput> inputs;
    std::vector<TraceRecord> traces;
    std::vector<std::string> corpus_outputs;
    std::size_t workers = 1;
    double total_wall_ms = 0.0;

    std::size_t n_failed() const {
        return static_cast<std::size_t>(std::count_if(traces.begin(), traces.end(), [](const auto& t) { return !t.ok; }));
    }
};

namespace detail {

inline void write_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("io-error", "cannot write " + tmp.string());
        out << content;
        if (!out) throw Error("io-error", "short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (std::size_t i = next++; i < count; i = next++) fn(i);
    };
    const std::size_t n = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(count, 1));
    if (n <= 1) {
        body();
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(body);
}

struct LoadedTrace {
    AttentionStack stack;
    TokenTrace trace;
};

inline LoadedTrace load_pair(const TraceInput& in, TraceRecord& rec) {
    const auto dump_bytes = read_file_bytes(in.dump_path);
    rec.dump_sha256 = sha256_hex(dump_bytes);
    const auto text = read_file_text(in.trace_path);
    rec.trace_sha256 = sha256_hex(std::as_bytes(std::span(text.data(), text.size())));
    return {parse_attention_dump(dump_bytes), parse_token_trace(text)};
}

inline double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

/// Corpus span mode: groups from the mean span table over every trace that loads.
inline std::optional<HeadGroups> corpus_groups(const RunConfig& cfg, const std::vector<TraceInput>& inputs) {
    if (cfg.span_mode != SpanMode::Corpus) return std::nullopt;
    std::vector<std::optional<HeadSpanTable>> tables(inputs.size());
    parallel_for(inputs.size(), cfg.workers, [&](std::size_t i) {
        try {
            TraceRecord scratch;
            auto loaded = load_pair(inputs[i], scratch);
            require_valid(loaded.stack, LayerPolicy{cfg.strict_layers});
            tables[i] = span_table(loaded.stack, loaded.trace.response_range());
        } catch (const std::exception&) {
            // reported by the main pass
        }
    });
    std::vector<HeadSpanTable> ok;
    for (auto& t : tables) {
        if (t) ok.push_back(std::move(*t));
    }
    if (ok.empty()) return std::nullopt;
    return group_heads(average_span_tables(ok), cfg.head_quantile);
}

} // namespace detail

inline nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json inputs = nlohmann::json::array();
    nlohmann::json traces = nlohmann::json::array();
    nlohmann::json timings = nlohmann::json::object();
    for (std::size_t i = 0; i < m.traces.size(); ++i) {
        const auto& r = m.traces[i];
        inputs.push_back({{"trace_id", r.trace_id},
                          {"dump", m.inputs[i].dump_path.string()},
                          {"dump_sha256", r.dump_sha256},
                          {"trace", m.inputs[i].trace_path.string()},
                          {"trace_sha256", r.trace_sha256}});
        nlohmann::json t = {{"trace_id", r.trace_id}, {"status", r.ok ? "ok" : "failed"}, {"outputs", r.outputs}};
        if (!r.ok) {
            t["error_code"] = r.error_code;
            t["error"] = r.error_message;
        }
        traces.push_back(std::move(t));
        timings[r.trace_id] = r.wall_ms;
    }
    return {{"artifact_version", kVersion},
            {"command", m.command},
            {"config", m.config},
            {"inputs", std::move(inputs)},
            {"traces", std::move(traces)},
            {"corpus_outputs", m.corpus_outputs},
            {"n_traces", m.traces.size()},
            {"n_failed", m.n_failed()},
            // Everything that legitimately differs between otherwise identical runs.
            {"runtime", {{"workers", m.workers}, {"total_wall_ms", m.total_wall_ms}, {"trace_wall_ms", std::move(timings)}}}};
}

namespace detail {

template <typename PerTrace, typename Finish>
RunManifest run_corpus(const RunConfig& cfg, std::string command, std::vector<TraceInput> inputs,
                       PerTrace&& per_trace, Finish&& finish) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    RunManifest m;
    m.command = std::move(command);
    m.config = config_snapshot(cfg);
    m.inputs = std::move(inputs);
    m.workers = cfg.workers;
    m.traces.resize(m.inputs.size());
    fs::create_directories(cfg.output_dir);

    const auto groups = corpus_groups(cfg, m.inputs);
    parallel_for(m.inputs.size(), cfg.workers, [&](std::size_t i) {
        const auto t_start = std::chrono::steady_clock::now();
        auto& rec = m.traces[i];
        rec.trace_id = m.inputs[i].trace_id;
        try {
            auto loaded = load_pair(m.inputs[i], rec);
            auto analysis = analyze_trace(loaded.stack, loaded.trace, cfg, groups);
            per_trace(i, rec, loaded, analysis);
            rec.ok = true;
        } catch (const Error& e) {
            rec.error_code = e.code();
            rec.error_message = e.what();
        } catch (const std::exception& e) {
            rec.error_code = "internal-error";
            rec.error_message = e.what();
        }
        rec.wall_ms = ms_since(t_start);
    });
    finish(m);
    m.total_wall_ms = ms_since(t0);
    write_atomic(cfg.output_dir / "manifest.json", to_json(m).dump(2) + "\n");
    return m;
}

} // namespace detail

namespace detail {

inline void write_coupling_outputs(const RunConfig& cfg, RunManifest& m,
                                   std::vector<std::optional<CouplingTrace>>& coupling) {
    std::vector<CouplingTrace> ok;
    for (std::size_t i = 0; i < m.traces.size(); ++i) {
        if (m.traces[i].ok && coupling[i]) ok.push_back(std::move(*coupling[i]));
    }
    const auto stats = coupling_report(ok, cfg.coupling);
    nlohmann::json params = {{"metrics", to_json(cfg.metrics)},
                             {"max_lag", cfg.coupling.max_lag},
                             {"aggregation", to_string(cfg.coupling.aggregation)}};
    nlohmann::json report = nlohmann::json::array();
    for (const auto& s : stats) report.push_back(to_json(s, params));
    write_atomic(cfg.output_dir / "coupling.json", report.dump(2) + "\n");
    std::ostringstream csv;
    write_coupling_csv(csv, stats);
    write_atomic(cfg.output_dir / "coupling.csv", csv.str());
    m.corpus_outputs = {"coupling.json", "coupling.csv"};
}

} // namespace detail

/// Profiles, head tables and the coupling report for every trace in the corpus.
inline RunManifest run_analysis(const RunConfig& cfg) {
    auto inputs = discover_inputs(cfg.inputs);
    std::vector<std::optional<CouplingTrace>> coupling(inputs.size());
    return detail::run_corpus(
        cfg, "analyze", std::move(inputs),
        [&](std::size_t i, TraceRecord& rec, const detail::LoadedTrace& loaded, const TraceAnalysis& a) {
            const auto& id = rec.trace_id;
            std::ostringstream csv;
            write_profile_csv(csv, a.profile, loaded.trace.tokens);
            detail::write_atomic(cfg.output_dir / "profiles" / (id + ".csv"), csv.str());
            detail::write_atomic(cfg.output_dir / "profiles" / (id + ".json"),
                                 profile_json(a.profile, loaded.trace.tokens).dump() + "\n");
            std::ostringstream heads;
            write_span_csv(heads, a.spans, a.groups, a.receivers);
            detail::write_atomic(cfg.output_dir / "heads" / (id + ".csv"), heads.str());
            rec.outputs = {"profiles/" + id + ".csv", "profiles/" + id + ".json", "heads/" + id + ".csv"};
            coupling[i] = coupling_trace(a.profile);
        },
        [&](RunManifest& m) { detail::write_coupling_outputs(cfg, m, coupling); });
}

/// Coupling report only; no per-trace outputs.
inline RunManifest run_coupling(const RunConfig& cfg) {
    auto inputs = discover_inputs(cfg.inputs);
    std::vector<std::optional<CouplingTrace>> coupling(inputs.size());
    return detail::run_corpus(
        cfg, "couple", std::move(inputs),
        [&](std::size_t i, TraceRecord&, const detail::LoadedTrace&, const TraceAnalysis& a) {
            coupling[i] = coupling_trace(a.profile);
        },
        [&](RunManifest& m) { detail::write_coupling_outputs(cfg, m, coupling); });
}

namespace detail {

inline nlohmann::json size_summary(const std::vector<std::size_t>& sizes) {
    if (sizes.empty()) return nullptr;
    const auto [mn, mx] = std::minmax_element(sizes.begin(), sizes.end());
    double sum = 0.0;
    for (auto s : sizes) sum += static_cast<double>(s);
    return {{"min", *mn}, {"max", *mx}, {"mean", sum / static_cast<double>(sizes.size())}};
}

} // namespace detail

inline RunManifest run_credit(const RunConfig& cfg, CreditScheme scheme) {
    auto inputs = discover_inputs(cfg.inputs);
    std::vector<std::optional<CreditWeights>> weights(inputs.size());
    std::vector<std::optional<std::pair<std::string, double>>> rewards(inputs.size());
    return detail::run_corpus(
        cfg, "weights:" + to_string(scheme), std::move(inputs),
        [&](std::size_t i, TraceRecord& rec, const detail::LoadedTrace& loaded, const TraceAnalysis& a) {
            auto w = compute_weights(a.profile, scheme, cfg.credit);
            detail::write_atomic(cfg.output_dir / "weights" / (rec.trace_id + ".jsonl"),
                                 weights_record(rec.trace_id, w).dump() + "\n");
            rec.outputs = {"weights/" + rec.trace_id + ".jsonl"};
            if (loaded.trace.reward && loaded.trace.group_id) {
                rewards[i] = std::pair(*loaded.trace.group_id, *loaded.trace.reward);
            }
            weights[i] = std::move(w);
        },
        [&](RunManifest& m) {
            std::vector<std::size_t> n_local, n_global, n_dominated;
            std::map<std::string, std::size_t> histogram;
            std::map<std::string, std::vector<std::pair<std::string, double>>> groups;
            for (std::size_t i = 0; i < m.traces.size(); ++i) {
                if (!m.traces[i].ok || !weights[i]) continue;
                const auto& w = *weights[i];
                n_local.push_back(w.selected_local.size());
                n_global.push_back(w.selected_global.size());
                n_dominated.push_back(w.dominated.size());
                for (double g : w.gamma) ++histogram[format_double(g)];
                if (rewards[i]) groups[rewards[i]->first].emplace_back(m.traces[i].trace_id, rewards[i]->second);
            }
            nlohmann::json advantages = nlohmann::json::object();
            for (const auto& [gid, members] : groups) {
                if (members.size() < 2) continue;
                std::vector<double> r;
                for (const auto& mbr : members) r.push_back(mbr.second);
                const auto adv = group_normalized_advantage(r);
                nlohmann::json g = {{"degenerate", adv.degenerate}, {"advantage", nlohmann::json::object()}};
                for (std::size_t j = 0; j < members.size(); ++j) g["advantage"][members[j].first] = adv.values[j];
                advantages[gid] = std::move(g);
            }
            nlohmann::json summary = {{"scheme", to_string(scheme)},
                                      {"n_traces", n_global.size()},
                                      {"selected_local", detail::size_summary(n_local)},
                                      {"selected_global", detail::size_summary(n_global)},
                                      {"dominated", detail::size_summary(n_dominated)},
                                      {"gamma_histogram", histogram},
                                      {"group_advantages", std::move(advantages)},
                                      {"params", to_json(cfg.credit, scheme)}};
            detail::write_atomic(cfg.output_dir / "weights" / "summary.json", summary.dump(2) + "\n");
            m.corpus_outputs = {"weights/summary.json"};
        });
}

} // namespace rhythm
