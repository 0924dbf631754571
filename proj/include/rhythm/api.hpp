#pragma once

// In-memory entry points for host-language bindings: dumps arrive as bytes and traces
// as JSON text, so no temporary files are involved. Errors are rhythm::Error, whose
// code() is the string a binding should surface.

#include <cstddef>
#include <span>
#include <string_view>

#include "rhythm/analysis.hpp"
#include "rhythm/config.hpp"
#include "rhythm/credit_shaping.hpp"
#include "rhythm/tensor_io.hpp"
#include "rhythm/version.hpp"

namespace rhythm::api {

inline const char* version() noexcept { return kVersion; }

inline RhythmProfile profile_from_bytes(std::span<const std::byte> dump, std::string_view trace_json,
                                        const RunConfig& cfg = {}) {
    const auto stack = parse_attention_dump(dump);
    const auto trace = parse_token_trace(trace_json);
    return analyze_trace(stack, trace, cfg).profile;
}

inline CreditWeights weights_from_bytes(std::span<const std::byte> dump, std::string_view trace_json,
                                        CreditScheme scheme, const RunConfig& cfg = {}) {
    return compute_weights(profile_from_bytes(dump, trace_json, cfg), scheme, cfg.credit);
}

} // namespace rhythm::api
