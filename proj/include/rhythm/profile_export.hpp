#pragma once

// CSV / JSON export of a RhythmProfile. Rows cover every sequence position; series that
// are undefined at a position (prompt rows, the last delta, absent receiver FAI) are
// left as empty CSV cells / JSON nulls.

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rhythm/format.hpp"
#include "rhythm/rhythm_metrics.hpp"
#include "rhythm/tensor_io.hpp"

namespace rhythm {

inline nlohmann::json to_json(const MetricParams& p) {
    return {{"window", p.window},
            {"horizon_lo", p.horizon_lo},
            {"horizon_hi", p.horizon_hi},
            {"q", p.q},
            {"peak_method", to_string(p.peak_method)},
            {"peak_kappa", p.peak_kappa},
            {"include_sink", p.include_sink}};
}

namespace detail {

struct ProfileRow {
    std::optional<double> waad, delta, fai_global, fai_receiver, entropy;
};

inline ProfileRow profile_row(const RhythmProfile& p, std::size_t pos) {
    ProfileRow r;
    r.fai_global = p.fai_global.values[pos];
    if (p.fai_receiver) r.fai_receiver = p.fai_receiver->values[pos];
    if (pos >= p.response_start) {
        const std::size_t i = pos - p.response_start;
        r.waad = p.waad[i];
        if (i < p.delta.size()) r.delta = p.delta[i];
        if (p.entropy) r.entropy = (*p.entropy)[i];
    }
    return r;
}

inline std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string{}; }

inline nlohmann::json jcell(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

} // namespace detail

inline void write_profile_csv(std::ostream& os, const RhythmProfile& p, const std::vector<Token>& tokens) {
    os << "pos,token,waad,delta,fai_global,fai_receiver,entropy\n";
    for (std::size_t pos = 0; pos < p.sequence_length; ++pos) {
        const auto r = detail::profile_row(p, pos);
        os << pos << ',' << csv_field(pos < tokens.size() ? tokens[pos].text : std::string{}) << ','
           << detail::cell(r.waad) << ',' << detail::cell(r.delta) << ',' << detail::cell(r.fai_global) << ','
           << detail::cell(r.fai_receiver) << ',' << detail::cell(r.entropy) << '\n';
    }
}

inline nlohmann::json profile_json(const RhythmProfile& p, const std::vector<Token>& tokens) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t pos = 0; pos < p.sequence_length; ++pos) {
        const auto r = detail::profile_row(p, pos);
        rows.push_back({{"pos", pos},
                        {"token", pos < tokens.size() ? tokens[pos].text : std::string{}},
                        {"waad", detail::jcell(r.waad)},
                        {"delta", detail::jcell(r.delta)},
                        {"fai_global", detail::jcell(r.fai_global)},
                        {"fai_global_covered", static_cast<bool>(p.fai_global.covered[pos])},
                        {"fai_receiver", detail::jcell(r.fai_receiver)},
                        {"entropy", detail::jcell(r.entropy)}});
    }
    return {{"response_start", p.response_start},
            {"sequence_length", p.sequence_length},
            {"params", to_json(p.params)},
            {"rows", std::move(rows)}};
}

} // namespace rhythm
