#pragma once

// Command-line front end. Exit status: 0 success, 1 validation or data failure,
// 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rhythm/analysis.hpp"
#include "rhythm/config.hpp"
#include "rhythm/error.hpp"
#include "rhythm/perturbation.hpp"
#include "rhythm/pipeline.hpp"
#include "rhythm/plot.hpp"
#include "rhythm/synth.hpp"
#include "rhythm/tensor_io.hpp"
#include "rhythm/version.hpp"

namespace rhythm {

inline constexpr const char* kConfigEnvVar = "RHYTHM_CONFIG";

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline RunConfig resolve_config(const std::string& flag_value, std::optional<std::size_t> workers,
                                const std::string& output_dir) {
    std::string path = flag_value;
    if (path.empty()) {
        if (const char* env = std::getenv(kConfigEnvVar)) path = env;
    }
    if (path.empty()) throw UsageError(std::string("--config is required (or set ") + kConfigEnvVar + ")");
    RunConfig cfg = load_run_config(path);
    if (workers) cfg.workers = *workers;
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    cfg.validate();
    return cfg;
}

inline std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline int report_manifest(const RunManifest& m, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    out << (cfg.output_dir / "manifest.json").string() << '\n';
    for (const auto& t : m.traces) {
        if (!t.ok) err << "trace " << t.trace_id << " failed: " << t.error_message << '\n';
    }
    return m.n_failed() == 0 ? kExitOk : kExitFailure;
}

} // namespace detail

inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
    CLI::App app{"Attention-rhythm metrics and token credit weights", "rhythm"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // validate
    auto* validate = app.add_subcommand("validate", "Check an ATTD dump against the attention-map invariants");
    std::string dump_path;
    bool strict = false, as_json = false;
    validate->add_option("dump", dump_path, "ATTD file")->required();
    validate->add_flag("--strict", strict, "Also require the five middle-third layers");
    validate->add_flag("--json", as_json, "Print the report as JSON");

    // analyze / couple / weights share config flags
    std::string config_path, output_dir, scheme_name = "coupled";
    std::optional<std::size_t> workers;
    auto add_run_flags = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, std::string("Run config (default: $") + kConfigEnvVar + ")");
        sub->add_option("--workers", workers, "Worker threads");
        sub->add_option("--output-dir", output_dir, "Override the configured output directory");
    };
    auto* analyze = app.add_subcommand("analyze", "Profiles, head tables and coupling report for a corpus");
    add_run_flags(analyze);
    auto* couple = app.add_subcommand("couple", "Coupling statistics only");
    add_run_flags(couple);
    auto* weights = app.add_subcommand("weights", "Per-token credit weights for a corpus");
    add_run_flags(weights);
    weights->add_option("--scheme", scheme_name, "local | global | coupled")
        ->check(CLI::IsMember({"local", "global", "coupled"}));

    // perturb
    auto* perturb = app.add_subcommand("perturb", "Jaccard report over counterfactual rollout pairs");
    std::string pairs_path, stoplist_path, out_path;
    perturb->add_option("--pairs", pairs_path, "JSON-lines rollout pairs")->required();
    perturb->add_option("--stoplist", stoplist_path, "Plain-text stoplist (default: built-in English list)");
    perturb->add_option("--out", out_path, "Write the report here instead of stdout");

    // synth
    auto* synth = app.add_subcommand("synth", "Write synthetic dumps and traces with planted structure");
    std::string kind_name, synth_dir;
    std::size_t count = 1;
    std::uint64_t seed = 0;
    SynthTraceSpec synth_spec;
    synth->add_option("--kind", kind_name, "sawtooth | anchor")->required()->check(CLI::IsMember({"sawtooth", "anchor"}));
    synth->add_option("--out-dir", synth_dir, "Output directory")->required();
    synth->add_option("--count", count, "Number of traces");
    synth->add_option("--seed", seed, "Base seed");
    synth->add_option("--tokens", synth_spec.n_tokens, "Sequence length");
    synth->add_option("--prompt", synth_spec.prompt_length, "Prompt length");
    synth->add_option("--layers", synth_spec.layer_count, "Model layer count");
    synth->add_option("--heads", synth_spec.heads_per_layer, "Heads per sampled layer");
    synth->add_option("--anchors", synth_spec.n_anchors, "Planted anchors (anchor kind)");

    // plot
    auto* plot = app.add_subcommand("plot", "Render one trace's profile as SVG or CSV");
    std::string trace_id, panels_arg = "waad,fai-global", format_name = "svg", peaks_name = "local-max",
                                  heatmap_name = "local";
    plot->add_option("--trace", trace_id, "Trace id (file stem in the configured inputs)")->required();
    plot->add_option("--panels", panels_arg, "Comma-separated: attention-heatmap,waad,fai-global,fai-receiver,entropy");
    plot->add_option("--format", format_name, "svg | csv")->check(CLI::IsMember({"svg", "csv"}));
    plot->add_option("--peaks", peaks_name, "Peak markers: local-max | topq | none")
        ->check(CLI::IsMember({"local-max", "topq", "none"}));
    plot->add_option("--heatmap", heatmap_name, "Aggregated map for the heatmap: local | global")
        ->check(CLI::IsMember({"local", "global"}));
    plot->add_option("--out", out_path, "Output file (default: stdout)");
    plot->add_option("--config", config_path, std::string("Run config (default: $") + kConfigEnvVar + ")");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kExitOk;
    } catch (const CLI::Success&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (validate->parsed()) {
            const auto stack = load_attention_dump(dump_path);
            const auto report = validate_stack(stack, LayerPolicy{strict});
            if (as_json) {
                nlohmann::json v = nlohmann::json::array();
                for (const auto& x : report.violations) v.push_back({{"rule", x.rule}, {"location", x.location}, {"measured", x.measured}});
                out << nlohmann::json{{"ok", report.ok()}, {"violations", v}}.dump(2) << '\n';
            } else if (report.ok()) {
                out << "ok: N=" << stack.sequence_length << " L=" << stack.layer_count << " heads=" << stack.entries.size() << '\n';
            } else {
                constexpr std::size_t kShown = 20;
                for (std::size_t i = 0; i < std::min(kShown, report.violations.size()); ++i) {
                    const auto& x = report.violations[i];
                    out << x.rule << ' ' << x.location << ' ' << format_double(x.measured) << '\n';
                }
                out << report.violations.size() << " violation(s)\n";
            }
            return report.ok() ? kExitOk : kExitFailure;
        }
        if (analyze->parsed()) {
            const auto cfg = detail::resolve_config(config_path, workers, output_dir);
            return detail::report_manifest(run_analysis(cfg), cfg, out, err);
        }
        if (couple->parsed()) {
            const auto cfg = detail::resolve_config(config_path, workers, output_dir);
            const auto m = run_coupling(cfg);
            out << detail::read_file_text(cfg.output_dir / "coupling.json");
            return m.n_failed() == 0 ? kExitOk : kExitFailure;
        }
        if (weights->parsed()) {
            const auto cfg = detail::resolve_config(config_path, workers, output_dir);
            return detail::report_manifest(run_credit(cfg, parse_credit_scheme(scheme_name)), cfg, out, err);
        }
        if (perturb->parsed()) {
            std::ifstream in(pairs_path);
            if (!in) throw Error("io-error", "cannot open " + pairs_path);
            const Stoplist stop = stoplist_path.empty() ? default_stoplist() : load_stoplist(stoplist_path);
            const auto report = perturbation_report(parse_rollout_pairs(in), stop);
            const auto text = to_json(report, stop).dump(2) + "\n";
            if (out_path.empty()) {
                out << text;
            } else {
                detail::write_atomic(out_path, text);
            }
            return kExitOk;
        }
        if (synth->parsed()) {
            synth_spec.kind = parse_synth_kind(kind_name);
            std::filesystem::create_directories(synth_dir);
            for (std::size_t i = 0; i < count; ++i) {
                const auto t = make_synthetic_trace(synth_spec, detail::splitmix64(seed + i));
                char stem[64];
                std::snprintf(stem, sizeof stem, "%s_%03zu", kind_name.c_str(), i);
                const auto base = std::filesystem::path(synth_dir) / stem;
                write_attention_dump(t.stack, base.string() + ".attd");
                write_token_trace(t.trace, base.string() + ".json");
                out << base.string() << ".attd\n";
            }
            return kExitOk;
        }
        if (plot->parsed()) {
            const auto cfg = detail::resolve_config(config_path, std::nullopt, "");
            std::optional<TraceInput> input;
            for (auto& in : discover_inputs(cfg.inputs)) {
                if (in.trace_id == trace_id) input = in;
            }
            if (!input) throw Error("missing-trace", "no trace '" + trace_id + "' among the configured inputs");
            const auto a = analyze_trace(load_attention_dump(input->dump_path), load_token_trace(input->trace_path), cfg);
            PlotSpec spec;
            spec.format = format_name == "svg" ? PlotFormat::Svg : PlotFormat::Csv;
            for (const auto& name : detail::split_csv_list(panels_arg)) {
                try {
                    spec.panels.push_back(parse_panel(name));
                } catch (const Error& e) {
                    throw detail::UsageError(e.what());
                }
            }
            if (spec.panels.empty()) throw detail::UsageError("--panels must name at least one panel");
            if (peaks_name != "none") {
                const auto method = parse_peak_method(peaks_name);
                for (Panel panel : spec.panels) {
                    if (auto s = detail::panel_series(a.profile, panel)) {
                        spec.highlight[panel] = detect_peaks(*s, method, cfg.metrics.q, cfg.metrics.peak_kappa);
                    }
                }
            }
            const PlotData data{&a.profile, heatmap_name == "local" ? &a.local_map : &a.global_map};
            const auto doc = emit_plot(data, spec);
            if (out_path.empty()) {
                out << doc;
            } else {
                detail::write_atomic(out_path, doc);
            }
            return kExitOk;
        }
    } catch (const detail::UsageError& e) {
        err << "usage error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

} // namespace rhythm
