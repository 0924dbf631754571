#pragma once

// Counterfactual rollout comparison: content-word sets, Jaccard overlap, and the
// top- vs bottom-FAI deviation report over externally generated rollout pairs.

#include <cctype>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rhythm/error.hpp"

namespace rhythm {

using Stoplist = std::set<std::string>;

/// Common English function words. Mirrors data/stopwords_en.txt.
inline const Stoplist& default_stoplist() {
    static const Stoplist words = {
        "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at",
        "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could",
        "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has",
        "have", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if",
        "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor",
        "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out",
        "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs",
        "them", "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
        "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which", "while", "who",
        "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself", "yourselves",
    };
    return words;
}

/// One word per line; blank lines and lines starting with '#' are skipped.
inline Stoplist load_stoplist(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("io-error", "cannot open stoplist " + path.string());
    Stoplist out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
        std::size_t i = 0;
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        line.erase(0, i);
        if (line.empty() || line.front() == '#') continue;
        for (auto& c : line) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        out.insert(line);
    }
    return out;
}

/// Lowercases ASCII letters and drops ASCII punctuation and whitespace. Non-ASCII
/// bytes are kept as-is.
inline std::string normalize_token(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && (std::ispunct(c) || std::isspace(c) || std::iscntrl(c))) continue;
        out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
    return out;
}

inline std::set<std::string> content_token_set(const std::vector<std::string>& tokens, const Stoplist& stoplist) {
    std::set<std::string> out;
    for (const auto& t : tokens) {
        auto norm = normalize_token(t);
        if (norm.empty() || stoplist.contains(norm)) continue;
        out.insert(std::move(norm));
    }
    return out;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) throw Error("both-empty", "Jaccard is undefined for two empty sets");
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.contains(x);
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

enum class FaiBucket { Top, Bottom };

struct RolloutPair {
    std::size_t position = 0;
    FaiBucket bucket = FaiBucket::Top;
    std::int64_t forced_token_id = 0;
    std::string forced_token_text;
    std::vector<std::string> original_suffix;
    std::vector<std::string> counterfactual_suffix;
    std::string trace_id;
    std::string trial_id;
};

struct PerturbReport {
    double mean_jaccard_top = 0.0;
    double mean_jaccard_bottom = 0.0;
    double prob_top_lt_bottom = 0.0;
    std::size_t n_pairs = 0;
    std::size_t n_matched_trials = 0;
};

namespace detail {

inline std::vector<std::string> string_array(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) throw Error("schema-violation", std::string("missing array '") + key + "'");
    std::vector<std::string> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_string()) throw Error("schema-violation", std::string(key) + " must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

inline std::string id_string(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw Error("schema-violation", "trace_id / trial_id must be a string or integer");
}

} // namespace detail

inline RolloutPair parse_rollout_pair(const nlohmann::json& j) {
    if (!j.is_object()) throw Error("schema-violation", "rollout pair must be an object");
    RolloutPair p;
    if (!j.contains("position") || !j.at("position").is_number_unsigned()) {
        throw Error("schema-violation", "'position' must be a nonnegative integer");
    }
    p.position = j.at("position").get<std::size_t>();
    const auto bucket = j.value("bucket", std::string{});
    if (bucket == "top") p.bucket = FaiBucket::Top;
    else if (bucket == "bottom") p.bucket = FaiBucket::Bottom;
    else throw Error("schema-violation", "'bucket' must be \"top\" or \"bottom\"");
    if (j.contains("forced_token")) {
        const auto& f = j.at("forced_token");
        if (f.is_string()) {
            p.forced_token_text = f.get<std::string>();
        } else if (f.is_object()) {
            p.forced_token_id = f.value("id", std::int64_t{0});
            p.forced_token_text = f.value("text", std::string{});
        } else {
            throw Error("schema-violation", "'forced_token' must be an object or string");
        }
    }
    p.original_suffix = detail::string_array(j, "original_suffix");
    p.counterfactual_suffix = detail::string_array(j, "counterfactual_suffix");
    if (p.original_suffix.empty() || p.counterfactual_suffix.empty()) {
        throw Error("schema-violation", "suffixes must be nonempty");
    }
    if (!j.contains("trace_id") || !j.contains("trial_id")) throw Error("schema-violation", "missing trace_id/trial_id");
    p.trace_id = detail::id_string(j.at("trace_id"));
    p.trial_id = detail::id_string(j.at("trial_id"));
    return p;
}

inline std::vector<RolloutPair> parse_rollout_pairs(std::istream& in) {
    std::vector<RolloutPair> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse_rollout_pair(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error("schema-violation", "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

/// Per-bucket mean Jaccard plus the fraction of (trace_id, trial_id) trials in which the
/// top-bucket rollout overlaps strictly less than the bottom-bucket one.
inline PerturbReport perturbation_report(const std::vector<RolloutPair>& pairs, const Stoplist& stoplist) {
    using Key = std::pair<std::string, std::string>;
    std::map<Key, std::pair<std::vector<double>, std::vector<double>>> trials;
    double top_sum = 0.0, bottom_sum = 0.0;
    std::size_t top_n = 0, bottom_n = 0;
    for (const auto& p : pairs) {
        const double j = jaccard(content_token_set(p.original_suffix, stoplist),
                                 content_token_set(p.counterfactual_suffix, stoplist));
        auto& slot = trials[{p.trace_id, p.trial_id}];
        if (p.bucket == FaiBucket::Top) {
            top_sum += j;
            ++top_n;
            slot.first.push_back(j);
        } else {
            bottom_sum += j;
            ++bottom_n;
            slot.second.push_back(j);
        }
    }
    if (top_n == 0 || bottom_n == 0) throw Error("unmatched-buckets", "need at least one top and one bottom pair");
    std::size_t wins = 0;
    for (const auto& [key, jj] : trials) {
        if (jj.first.size() != 1 || jj.second.size() != 1) {
            throw Error("unmatched-buckets", "trial (" + key.first + ", " + key.second +
                                                 ") needs exactly one top and one bottom pair");
        }
        wins += jj.first.front() < jj.second.front();
    }
    PerturbReport r;
    r.mean_jaccard_top = top_sum / static_cast<double>(top_n);
    r.mean_jaccard_bottom = bottom_sum / static_cast<double>(bottom_n);
    r.prob_top_lt_bottom = static_cast<double>(wins) / static_cast<double>(trials.size());
    r.n_pairs = pairs.size();
    r.n_matched_trials = trials.size();
    return r;
}

inline nlohmann::json to_json(const PerturbReport& r, const Stoplist& stoplist) {
    return {{"mean_jaccard_top", r.mean_jaccard_top},
            {"mean_jaccard_bottom", r.mean_jaccard_bottom},
            {"prob_top_lt_bottom", r.prob_top_lt_bottom},
            {"n_pairs", r.n_pairs},
            {"n_matched_trials", r.n_matched_trials},
            {"stoplist", std::vector<std::string>(stoplist.begin(), stoplist.end())}};
}

} // namespace rhythm
