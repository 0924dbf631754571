#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "rhythm/matrix.hpp"
#include "rhythm/synth.hpp"
#include "rhythm/tensor_io.hpp"

namespace fixtures {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "rhythm") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline rhythm::SquareMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    rhythm::SquareMatrix m(rows.size());
    for (std::size_t t = 0; t < rows.size(); ++t) {
        for (std::size_t s = 0; s < rows[t].size(); ++s) m(t, s) = rows[t][s];
    }
    return m;
}

inline rhythm::SquareMatrix uniform_causal(std::size_t n) {
    rhythm::SquareMatrix m(n);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t s = 0; s <= t; ++s) m(t, s) = 1.0 / static_cast<double>(t + 1);
    }
    return m;
}

inline rhythm::SquareMatrix identity_map(std::size_t n) {
    rhythm::SquareMatrix m(n);
    for (std::size_t t = 0; t < n; ++t) m(t, t) = 1.0;
    return m;
}

inline rhythm::SquareMatrix sink_map(std::size_t n) {
    rhythm::SquareMatrix m(n);
    for (std::size_t t = 0; t < n; ++t) m(t, 0) = 1.0;
    return m;
}

inline rhythm::AttentionStack single_head_stack(const rhythm::SquareMatrix& m, std::uint32_t layers = 1) {
    rhythm::AttentionStack st;
    st.sequence_length = m.size();
    st.layer_count = layers;
    st.entries.push_back({{0, 0}, m});
    return st;
}

inline std::string trace_json(std::size_t n_tokens, std::size_t response_start) {
    std::string s = "{\"tokens\":[";
    for (std::size_t i = 0; i < n_tokens; ++i) {
        if (i) s += ',';
        s += "{\"id\":" + std::to_string(100 + i) + ",\"text\":\"t" + std::to_string(i) + "\"}";
    }
    return s + "],\"response_start\":" + std::to_string(response_start) + "}";
}

/// Writes <stem>_NNN.attd/.json pairs; returns the planted positions per trace.
inline std::vector<std::vector<std::size_t>> write_corpus(const fs::path& dir, rhythm::SynthKind kind, std::size_t count,
                                                          std::uint64_t seed = 1, std::size_t n_tokens = 96) {
    fs::create_directories(dir);
    std::vector<std::vector<std::size_t>> planted;
    rhythm::SynthTraceSpec spec;
    spec.kind = kind;
    spec.n_tokens = n_tokens;
    for (std::size_t i = 0; i < count; ++i) {
        auto t = rhythm::make_synthetic_trace(spec, seed * 1000 + i);
        t.trace.group_id = "g" + std::to_string(i / 2);
        char stem[32];
        std::snprintf(stem, sizeof stem, "trace_%03zu", i);
        rhythm::write_attention_dump(t.stack, dir / (std::string(stem) + ".attd"));
        rhythm::write_token_trace(t.trace, dir / (std::string(stem) + ".json"));
        planted.push_back(t.planted);
    }
    return planted;
}

/// Relative path -> file contents for every regular file under `root`. The manifest's
/// runtime section (worker count, timings) is dropped.
inline std::map<std::string, std::string> tree_snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), root).string();
        auto text = rhythm::detail::read_file_text(e.path());
        if (rel == "manifest.json") {
            auto j = nlohmann::json::parse(text);
            j.erase("runtime");
            text = j.dump(2);
        }
        out[rel] = std::move(text);
    }
    return out;
}

} // namespace fixtures
