// Build a synthetic sawtooth trace in memory, then print the coupled credit weights
// next to the WAAD / FAI series that produced them.
//
//   demo_credit [seed]

#include <cstdio>
#include <cstdlib>

#include "rhythm/rhythm.hpp"

int main(int argc, char** argv) {
    const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;
    rhythm::SynthTraceSpec spec;
    spec.n_tokens = 96;
    const auto synth = rhythm::make_synthetic_trace(spec, seed);

    // Round-trip through the byte-level entry points, as a binding would.
    const auto bytes = rhythm::serialize_attention_dump(synth.stack);
    const auto json = rhythm::serialize_token_trace(synth.trace);
    rhythm::RunConfig cfg;
    const auto profile = rhythm::api::profile_from_bytes(bytes, json, cfg);
    const auto w = rhythm::compute_weights(profile, rhythm::CreditScheme::Coupled, cfg.credit);

    const auto fai = profile.response_fai(profile.fai_global);
    std::printf("%5s %9s %9s %6s %s\n", "pos", "waad", "fai", "gamma", "flags");
    for (std::size_t i = 0; i < w.gamma.size(); ++i) {
        std::printf("%5zu %9.4f %9.4f %6.3f %s%s%s\n", profile.response_start + i, profile.waad[i], fai[i], w.gamma[i],
                    w.selected_global.contains(i) ? "anchor " : "", w.dominated.contains(i) ? "dominated " : "",
                    w.selected_local.contains(i) ? "local" : "");
    }
    std::printf("tau_waad=%.4f tau_delta=%.4f\n", *w.params.tau_waad, *w.params.tau_delta);
    return 0;
}
