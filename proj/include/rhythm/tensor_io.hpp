#pragma once

// Attention dumps (binary ATTD format) and token traces (JSON): data types,
// loaders, writers and structural validation.
//
// ATTD layout, all integers little-endian:
//   "ATTD" | u16 version (=1) | u32 N | u32 L | u32 entry_count |
//   entry_count x ( u16 layer | u16 head | N*N binary32 row-major weights )

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rhythm/error.hpp"
#include "rhythm/matrix.hpp"
#include "rhythm/rhythm_metrics.hpp"

namespace rhythm {

inline constexpr double kRowSumTolerance = 1e-4;
inline constexpr std::uint16_t kAttdVersion = 1;

struct HeadId {
    std::uint16_t layer = 0;
    std::uint16_t head = 0;

    friend auto operator<=>(const HeadId&, const HeadId&) = default;
};

inline std::string to_string(const HeadId& h) {
    return "(" + std::to_string(h.layer) + "," + std::to_string(h.head) + ")";
}

struct HeadMap {
    HeadId id;
    SquareMatrix map;
};

struct AttentionStack {
    std::size_t sequence_length = 0;
    std::uint32_t layer_count = 0;
    std::vector<HeadMap> entries;

    const HeadMap* find(const HeadId& id) const {
        for (const auto& e : entries) {
            if (e.id == id) return &e;
        }
        return nullptr;
    }
};

// --- binary dump -------------------------------------------------------------

namespace detail {

class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

    template <typename U>
    U read_le() {
        if (remaining() < sizeof(U)) throw Error("truncated-payload", "unexpected end of dump");
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(std::to_integer<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(U);
        return v;
    }

    float read_f32() { return std::bit_cast<float>(read_le<std::uint32_t>()); }

private:
    std::span<const std::byte> bytes_;
    std::size_t pos_ = 0;
};

template <typename U>
void write_le(std::vector<std::byte>& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
    }
}

inline std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io-error", "cannot open " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::byte> out(raw.size());
    std::memcpy(out.data(), raw.data(), raw.size());
    return out;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io-error", "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("io-error", "short write to " + path.string());
}

inline std::string read_file_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io-error", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace detail

inline AttentionStack parse_attention_dump(std::span<const std::byte> bytes) {
    constexpr std::size_t kHeaderSize = 4 + 2 + 4 + 4 + 4;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "ATTD", 4) != 0) {
        throw Error("bad-magic", "input does not start with ATTD");
    }
    detail::ByteReader r(bytes.subspan(4));
    const auto version = r.read_le<std::uint16_t>();
    if (version != kAttdVersion) {
        throw Error("version-unsupported", "ATTD version " + std::to_string(version));
    }
    AttentionStack stack;
    stack.sequence_length = r.read_le<std::uint32_t>();
    stack.layer_count = r.read_le<std::uint32_t>();
    const auto entry_count = r.read_le<std::uint32_t>();
    const std::size_t n = stack.sequence_length;

    const std::size_t payload = bytes.size() - kHeaderSize;
    const std::size_t per_entry = 4 + 4 * n * n;
    if (payload != per_entry * entry_count) {
        // A payload that divides evenly into entries of another square size means the
        // header disagrees with the data; anything shorter is a truncated file.
        if (entry_count > 0 && payload % entry_count == 0 && payload / entry_count > 4) {
            const std::size_t cells = (payload / entry_count - 4);
            const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(cells / 4))));
            if (cells % 4 == 0 && side * side == cells / 4) {
                throw Error("dimension-mismatch", "header declares N=" + std::to_string(n) +
                                                      " but payload holds " + std::to_string(side) +
                                                      "x" + std::to_string(side) + " maps");
            }
        }
        if (payload > per_entry * entry_count) {
            throw Error("dimension-mismatch", "payload is larger than the header declares");
        }
        throw Error("truncated-payload", "payload shorter than the header declares");
    }

    stack.entries.reserve(entry_count);
    for (std::uint32_t e = 0; e < entry_count; ++e) {
        HeadMap hm;
        hm.id.layer = r.read_le<std::uint16_t>();
        hm.id.head = r.read_le<std::uint16_t>();
        std::vector<double> values(n * n);
        for (auto& v : values) v = static_cast<double>(r.read_f32());
        hm.map = SquareMatrix(n, std::move(values));
        stack.entries.push_back(std::move(hm));
    }
    return stack;
}

inline AttentionStack load_attention_dump(const std::filesystem::path& path) {
    const auto bytes = detail::read_file_bytes(path);
    return parse_attention_dump(bytes);
}

inline std::vector<std::byte> serialize_attention_dump(const AttentionStack& stack) {
    const std::size_t n = stack.sequence_length;
    std::vector<std::byte> out;
    out.reserve(18 + stack.entries.size() * (4 + 4 * n * n));
    for (char c : {'A', 'T', 'T', 'D'}) out.push_back(static_cast<std::byte>(c));
    detail::write_le<std::uint16_t>(out, kAttdVersion);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
    detail::write_le<std::uint32_t>(out, stack.layer_count);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(stack.entries.size()));
    for (const auto& e : stack.entries) {
        if (e.map.size() != n) throw Error("dimension-mismatch", "map size differs from sequence length");
        detail::write_le<std::uint16_t>(out, e.id.layer);
        detail::write_le<std::uint16_t>(out, e.id.head);
        for (double v : e.map.values()) {
            detail::write_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    }
    return out;
}

inline void write_attention_dump(const AttentionStack& stack, const std::filesystem::path& path) {
    detail::write_file_bytes(path, serialize_attention_dump(stack));
}

// --- validation --------------------------------------------------------------

/// Which layers a dump must contain. Strict mode requires exactly five evenly spaced
/// layers between floor(L/3) and floor(2L/3).
struct LayerPolicy {
    bool strict = false;
};

/// The five evenly spaced layer indices in [floor(L/3), floor(2L/3)], rounded half up.
inline std::vector<std::uint32_t> required_layers(std::uint32_t layer_count) {
    const double lo = std::floor(layer_count / 3.0);
    const double hi = std::floor(2.0 * layer_count / 3.0);
    std::vector<std::uint32_t> out;
    for (int i = 0; i < 5; ++i) {
        const double x = lo + (hi - lo) * i / 4.0;
        out.push_back(static_cast<std::uint32_t>(std::floor(x + 0.5)));
    }
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct Violation {
    std::string rule;
    std::string location;
    double measured = 0.0;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }
};

inline ValidationReport validate_stack(const AttentionStack& stack, const LayerPolicy& policy = {}) {
    ValidationReport report;
    auto flag = [&](std::string rule, std::string where, double v) {
        report.violations.push_back({std::move(rule), std::move(where), v});
    };
    const std::size_t n = stack.sequence_length;
    if (n == 0) flag("positive-length", "header", 0.0);
    if (stack.layer_count == 0) flag("positive-layer-count", "header", 0.0);

    std::set<HeadId> seen;
    for (const auto& e : stack.entries) {
        const std::string where = "layer=" + std::to_string(e.id.layer) + ",head=" + std::to_string(e.id.head);
        if (!seen.insert(e.id).second) flag("unique-head", where, 0.0);
        if (e.id.layer >= stack.layer_count) flag("layer-in-range", where, e.id.layer);
        if (e.map.size() != n) {
            flag("dimension", where, static_cast<double>(e.map.size()));
            continue;
        }
        for (std::size_t t = 0; t < n; ++t) {
            const auto row = e.map.row(t);
            double sum = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const double v = row[s];
                if (!std::isfinite(v) || v < 0.0) {
                    flag("nonnegative", where + ",row=" + std::to_string(t) + ",col=" + std::to_string(s), v);
                } else if (s > t && v != 0.0) {
                    flag("causal", where + ",row=" + std::to_string(t) + ",col=" + std::to_string(s), v);
                }
                if (s <= t) sum += v;
            }
            if (std::abs(sum - 1.0) > kRowSumTolerance) {
                flag("row-stochastic", where + ",row=" + std::to_string(t), sum);
            }
        }
    }

    if (policy.strict) {
        std::set<std::uint32_t> present;
        for (const auto& e : stack.entries) present.insert(e.id.layer);
        const auto req = required_layers(stack.layer_count);
        const std::set<std::uint32_t> required(req.begin(), req.end());
        for (auto l : required) {
            if (!present.contains(l)) flag("layer-policy-missing", "layer=" + std::to_string(l), l);
        }
        for (auto l : present) {
            if (!required.contains(l)) flag("layer-policy-unexpected", "layer=" + std::to_string(l), l);
        }
    }
    return report;
}

// --- token traces ------------------------------------------------------------

struct Token {
    std::int64_t id = 0;
    std::string text;

    friend bool operator==(const Token&, const Token&) = default;
};

struct TokenTrace {
    std::vector<Token> tokens;
    std::size_t response_start = 0;
    std::optional<std::vector<double>> entropy;
    // True when `entropy` was derived from prob_rows on load rather than read from the file.
    bool entropy_derived = false;
    std::optional<std::vector<std::vector<double>>> prob_rows;
    std::optional<double> reward;
    std::optional<std::string> group_id;
    // Unrecognised top-level keys, carried through unchanged.
    nlohmann::json extra = nlohmann::json::object();

    std::size_t response_length() const noexcept { return tokens.size() - response_start; }
    IndexRange response_range() const noexcept { return {response_start, tokens.size()}; }
};

namespace detail {

inline std::vector<double> json_number_array(const nlohmann::json& j, const char* key) {
    if (!j.is_array()) throw Error("schema-violation", std::string(key) + " must be an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) throw Error("schema-violation", std::string(key) + " must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

} // namespace detail

inline TokenTrace parse_token_trace(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("schema-violation", std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error("schema-violation", "trace must be a JSON object");
    if (!j.contains("tokens")) throw Error("schema-violation", "missing field 'tokens'");
    if (!j.contains("response_start")) throw Error("schema-violation", "missing field 'response_start'");

    TokenTrace trace;
    const auto& toks = j.at("tokens");
    if (!toks.is_array()) throw Error("schema-violation", "'tokens' must be an array");
    for (const auto& t : toks) {
        if (!t.is_object() || !t.contains("id") || !t.contains("text") || !t.at("id").is_number_integer() ||
            !t.at("text").is_string()) {
            throw Error("schema-violation", "each token needs integer 'id' and string 'text'");
        }
        trace.tokens.push_back({t.at("id").get<std::int64_t>(), t.at("text").get<std::string>()});
    }
    const auto& rs = j.at("response_start");
    if (!rs.is_number_integer()) throw Error("schema-violation", "'response_start' must be an integer");
    const auto start = rs.get<std::int64_t>();
    if (start > 0 && static_cast<std::size_t>(start) == trace.tokens.size()) {
        throw Error("empty-response-range", "response_start equals the token count; the trace has no response");
    }
    if (start <= 0 || static_cast<std::size_t>(start) >= trace.tokens.size()) {
        throw Error("inconsistent-lengths", "response_start must satisfy 0 < response_start < len(tokens)");
    }
    trace.response_start = static_cast<std::size_t>(start);
    const std::size_t n_resp = trace.response_length();

    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& key = it.key();
        const auto& val = it.value();
        if (key == "tokens" || key == "response_start") continue;
        if (key == "entropy") {
            auto e = detail::json_number_array(val, "entropy");
            for (double v : e) {
                if (v < 0.0) throw Error("schema-violation", "entropy values must be nonnegative");
            }
            trace.entropy = std::move(e);
        } else if (key == "prob_rows") {
            if (!val.is_array()) throw Error("schema-violation", "'prob_rows' must be an array");
            std::vector<std::vector<double>> rows;
            for (const auto& row : val) rows.push_back(detail::json_number_array(row, "prob_rows"));
            trace.prob_rows = std::move(rows);
        } else if (key == "reward") {
            if (!val.is_number()) throw Error("schema-violation", "'reward' must be a number");
            trace.reward = val.get<double>();
        } else if (key == "group_id") {
            if (!val.is_string()) throw Error("schema-violation", "'group_id' must be a string");
            trace.group_id = val.get<std::string>();
        } else {
            trace.extra[key] = val;
        }
    }

    if (trace.entropy && trace.entropy->size() != n_resp) {
        throw Error("inconsistent-lengths", "entropy length must equal the number of response tokens");
    }
    if (trace.prob_rows) {
        if (trace.prob_rows->size() != n_resp) {
            throw Error("inconsistent-lengths", "prob_rows must hold one row per response token");
        }
        for (const auto& row : *trace.prob_rows) {
            double sum = 0.0;
            for (double v : row) sum += v;
            if (std::abs(sum - 1.0) > kRowSumTolerance) {
                throw Error("schema-violation", "prob_rows row does not sum to 1");
            }
        }
        if (!trace.entropy) {
            trace.entropy = entropy_series(*trace.prob_rows);
            trace.entropy_derived = true;
        }
    }
    return trace;
}

inline TokenTrace load_token_trace(const std::filesystem::path& path) {
    return parse_token_trace(detail::read_file_text(path));
}

/// Canonical serialization: compact JSON, keys sorted, trailing newline. Derived entropy
/// is not written back, so loading and re-serializing a canonical file is the identity.
inline std::string serialize_token_trace(const TokenTrace& trace) {
    nlohmann::json j = trace.extra;
    nlohmann::json toks = nlohmann::json::array();
    for (const auto& t : trace.tokens) toks.push_back({{"id", t.id}, {"text", t.text}});
    j["tokens"] = std::move(toks);
    j["response_start"] = trace.response_start;
    if (trace.entropy && !trace.entropy_derived) j["entropy"] = *trace.entropy;
    if (trace.prob_rows) j["prob_rows"] = *trace.prob_rows;
    if (trace.reward) j["reward"] = *trace.reward;
    if (trace.group_id) j["group_id"] = *trace.group_id;
    return j.dump() + "\n";
}

inline void write_token_trace(const TokenTrace& trace, const std::filesystem::path& path) {
    const auto text = serialize_token_trace(trace);
    detail::write_file_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

} // namespace rhythm
