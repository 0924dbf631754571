#pragma once

// Static SVG / CSV rendering of rhythm profiles: one stacked panel per series over the
// response positions, plus an optional heatmap of an aggregated attention map. Output is
// a pure function of its inputs (fixed-precision coordinates, no timestamps).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rhythm/error.hpp"
#include "rhythm/format.hpp"
#include "rhythm/head_analysis.hpp"
#include "rhythm/index_set.hpp"
#include "rhythm/rhythm_metrics.hpp"

namespace rhythm {

enum class Panel { AttentionHeatmap, Waad, FaiGlobal, FaiReceiver, Entropy };

inline std::string to_string(Panel p) {
    switch (p) {
    case Panel::AttentionHeatmap: return "attention-heatmap";
    case Panel::Waad: return "waad";
    case Panel::FaiGlobal: return "fai-global";
    case Panel::FaiReceiver: return "fai-receiver";
    case Panel::Entropy: return "entropy";
    }
    return "?";
}

inline Panel parse_panel(const std::string& s) {
    for (Panel p : {Panel::AttentionHeatmap, Panel::Waad, Panel::FaiGlobal, Panel::FaiReceiver, Panel::Entropy}) {
        if (to_string(p) == s) return p;
    }
    throw Error("invalid-params", "unknown panel '" + s + "'");
}

enum class PlotFormat { Svg, Csv };

struct PlotSpec {
    std::vector<Panel> panels;
    std::map<Panel, IndexSet> highlight;  // response offsets to mark per panel
    PlotFormat format = PlotFormat::Svg;
};

struct PlotData {
    const RhythmProfile* profile = nullptr;
    const AggregatedMap* heatmap = nullptr;
};

inline constexpr std::size_t kMaxHeatmapCells = 1024;

namespace detail {

inline std::optional<std::vector<double>> panel_series(const RhythmProfile& p, Panel panel) {
    switch (panel) {
    case Panel::Waad: return p.waad;
    case Panel::FaiGlobal: return p.response_fai(p.fai_global);
    case Panel::FaiReceiver:
        if (!p.fai_receiver) return std::nullopt;
        return p.response_fai(*p.fai_receiver);
    case Panel::Entropy: return p.entropy;
    case Panel::AttentionHeatmap: return std::nullopt;
    }
    return std::nullopt;
}

inline std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

// Five-stop ramp sampled from viridis; luminance rises monotonically.
inline std::string ramp_color(double x) {
    static constexpr double stops[5][3] = {
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
    x = std::clamp(x, 0.0, 1.0) * 4.0;
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(x), 3);
    const double f = x - static_cast<double>(i);
    char buf[8];
    int rgb[3];
    for (int c = 0; c < 3; ++c) rgb[c] = static_cast<int>(std::lround(stops[i][c] + (stops[i + 1][c] - stops[i][c]) * f));
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
    return buf;
}

/// Block max-pooling so the rendered grid has at most kMaxHeatmapCells per side.
inline std::pair<SquareMatrix, std::size_t> pool_for_display(const SquareMatrix& m) {
    const std::size_t n = m.size();
    const std::size_t factor = std::max<std::size_t>(1, (n + kMaxHeatmapCells - 1) / kMaxHeatmapCells);
    const std::size_t cells = (n + factor - 1) / factor;
    SquareMatrix out(cells);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t s = 0; s <= t && s < n; ++s) {
            auto& cell = out(t / factor, s / factor);
            cell = std::max(cell, m(t, s));
        }
    }
    return {std::move(out), factor};
}

} // namespace detail

inline std::string emit_csv(const PlotData& data, const PlotSpec& spec) {
    const auto& p = *data.profile;
    std::ostringstream os;
    if (spec.panels.size() == 1 && spec.panels.front() == Panel::AttentionHeatmap) {
        if (data.heatmap == nullptr) throw Error("missing-panel-data", "no aggregated map for the heatmap panel");
        os << "row,col,weight\n";
        const auto& m = data.heatmap->map;
        for (std::size_t t = 0; t < m.size(); ++t) {
            for (std::size_t s = 0; s <= t; ++s) os << t << ',' << s << ',' << format_double(m(t, s)) << '\n';
        }
        return os.str();
    }
    std::vector<std::vector<double>> cols;
    os << "pos";
    for (Panel panel : spec.panels) {
        if (panel == Panel::AttentionHeatmap) {
            throw Error("unsupported-panel-combination", "the heatmap panel can only be exported to CSV on its own");
        }
        auto s = detail::panel_series(p, panel);
        if (!s) throw Error("missing-panel-data", "profile has no data for panel " + to_string(panel));
        cols.push_back(std::move(*s));
        os << ',' << to_string(panel);
    }
    os << '\n';
    for (std::size_t i = 0; i < p.response_length(); ++i) {
        os << p.response_start + i;
        for (const auto& c : cols) os << ',' << format_double(c[i]);
        os << '\n';
    }
    return os.str();
}

inline std::string emit_svg(const PlotData& data, const PlotSpec& spec) {
    const auto& p = *data.profile;
    constexpr double kWidth = 960.0, kMargin = 48.0, kSeriesHeight = 140.0, kGap = 28.0, kHeatmapSide = 480.0;
    const std::size_t n = p.response_length();
    const double plot_w = kWidth - 2 * kMargin;

    std::ostringstream body;
    nlohmann::json meta = {{"response_start", p.response_start}, {"response_length", n}, {"panels", nlohmann::json::array()}};
    double y = kMargin;
    for (Panel panel : spec.panels) {
        meta["panels"].push_back(to_string(panel));
        if (panel == Panel::AttentionHeatmap) {
            if (data.heatmap == nullptr) throw Error("missing-panel-data", "no aggregated map for the heatmap panel");
            const auto [pooled, factor] = detail::pool_for_display(data.heatmap->map);
            meta["heatmap_pooling_factor"] = factor;
            meta["heatmap_source"] = to_string(data.heatmap->source_group);
            double vmax = 0.0;
            for (double v : pooled.values()) vmax = std::max(vmax, v);
            const double cell = kHeatmapSide / static_cast<double>(pooled.size());
            body << "<g class=\"panel\" data-panel=\"attention-heatmap\">\n";
            body << "<text x=\"" << detail::fixed(kMargin) << "\" y=\"" << detail::fixed(y - 6)
                 << "\" font-size=\"12\">attention-heatmap (" << to_string(data.heatmap->source_group) << ")</text>\n";
            for (std::size_t r = 0; r < pooled.size(); ++r) {
                for (std::size_t c = 0; c <= r; ++c) {
                    const double v = pooled(r, c);
                    if (v <= 0.0) continue;
                    body << "<rect x=\"" << detail::fixed(kMargin + c * cell) << "\" y=\"" << detail::fixed(y + r * cell)
                         << "\" width=\"" << detail::fixed(cell) << "\" height=\"" << detail::fixed(cell) << "\" fill=\""
                         << detail::ramp_color(vmax > 0 ? v / vmax : 0.0) << "\"/>\n";
                }
            }
            body << "</g>\n";
            y += kHeatmapSide + kGap;
            continue;
        }

        auto series = detail::panel_series(p, panel);
        if (!series) throw Error("missing-panel-data", "profile has no data for panel " + to_string(panel));
        double lo = *std::min_element(series->begin(), series->end());
        double hi = *std::max_element(series->begin(), series->end());
        if (hi <= lo) hi = lo + 1.0;
        auto px = [&](std::size_t i) { return kMargin + (n > 1 ? plot_w * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0); };
        auto py = [&](double v) { return y + kSeriesHeight - kSeriesHeight * (v - lo) / (hi - lo); };

        body << "<g class=\"panel\" data-panel=\"" << to_string(panel) << "\">\n";
        body << "<text x=\"" << detail::fixed(kMargin) << "\" y=\"" << detail::fixed(y - 6) << "\" font-size=\"12\">"
             << to_string(panel) << " [" << format_double(lo) << ", " << format_double(hi) << "]</text>\n";
        body << "<rect x=\"" << detail::fixed(kMargin) << "\" y=\"" << detail::fixed(y) << "\" width=\""
             << detail::fixed(plot_w) << "\" height=\"" << detail::fixed(kSeriesHeight)
             << "\" fill=\"none\" stroke=\"#bbbbbb\"/>\n";
        body << "<polyline fill=\"none\" stroke=\"#2b5d9b\" stroke-width=\"1\" points=\"";
        for (std::size_t i = 0; i < n; ++i) body << (i ? " " : "") << detail::fixed(px(i)) << ',' << detail::fixed(py((*series)[i]));
        body << "\"/>\n";
        if (auto it = spec.highlight.find(panel); it != spec.highlight.end()) {
            for (std::size_t i : it->second) {
                if (i >= n) continue;
                body << "<circle class=\"peak\" data-panel=\"" << to_string(panel) << "\" data-pos=\"" << i
                     << "\" cx=\"" << detail::fixed(px(i)) << "\" cy=\"" << detail::fixed(py((*series)[i]))
                     << "\" r=\"3\" fill=\"#d62728\"/>\n";
            }
        }
        body << "</g>\n";
        y += kSeriesHeight + kGap;
    }

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fixed(kWidth) << "\" height=\""
       << detail::fixed(y + kMargin - kGap) << "\">\n";
    os << "<metadata>" << meta.dump() << "</metadata>\n";
    os << body.str();
    os << "</svg>\n";
    return os.str();
}

inline std::string emit_plot(const PlotData& data, const PlotSpec& spec) {
    if (data.profile == nullptr) throw Error("missing-panel-data", "no profile to plot");
    if (spec.panels.empty()) throw Error("invalid-params", "plot needs at least one panel");
    return spec.format == PlotFormat::Svg ? emit_svg(data, spec) : emit_csv(data, spec);
}

} // namespace rhythm
