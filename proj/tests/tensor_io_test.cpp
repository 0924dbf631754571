#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "fixtures.hpp"
#include "rhythm/synth.hpp"
#include "rhythm/tensor_io.hpp"

using namespace rhythm;

namespace {

std::vector<std::byte> header(std::uint32_t n, std::uint32_t layers, std::uint32_t entries, const char* magic = "ATTD",
                              std::uint16_t version = 1) {
    std::vector<std::byte> out;
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>(magic[i]));
    detail::write_le<std::uint16_t>(out, version);
    detail::write_le<std::uint32_t>(out, n);
    detail::write_le<std::uint32_t>(out, layers);
    detail::write_le<std::uint32_t>(out, entries);
    return out;
}

void append_entry(std::vector<std::byte>& out, std::uint16_t layer, std::uint16_t head, const std::vector<float>& w) {
    detail::write_le<std::uint16_t>(out, layer);
    detail::write_le<std::uint16_t>(out, head);
    for (float f : w) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        detail::write_le<std::uint32_t>(out, bits);
    }
}

std::string error_code(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "no-error";
}

} // namespace

TEST(AttentionDump, SmallestValidDump) {
    auto bytes = header(2, 1, 1);
    append_entry(bytes, 0, 0, {1, 0, 0.5f, 0.5f});
    const auto st = parse_attention_dump(bytes);
    EXPECT_EQ(st.sequence_length, 2u);
    ASSERT_EQ(st.entries.size(), 1u);
    EXPECT_DOUBLE_EQ(st.entries[0].map(1, 0) + st.entries[0].map(1, 1), 1.0);
    EXPECT_TRUE(validate_stack(st).ok());
}

TEST(AttentionDump, HeaderSizeDisagreesWithPayload) {
    auto bytes = header(3, 1, 1);
    append_entry(bytes, 0, 0, {1, 0, 0.5f, 0.5f});
    EXPECT_EQ(error_code([&] { parse_attention_dump(bytes); }), "dimension-mismatch");
}

TEST(AttentionDump, BadMagicAndVersion) {
    auto bad = header(2, 1, 1, "ATTX");
    append_entry(bad, 0, 0, {1, 0, 0.5f, 0.5f});
    EXPECT_EQ(error_code([&] { parse_attention_dump(bad); }), "bad-magic");
    auto v2 = header(2, 1, 1, "ATTD", 2);
    append_entry(v2, 0, 0, {1, 0, 0.5f, 0.5f});
    EXPECT_EQ(error_code([&] { parse_attention_dump(v2); }), "version-unsupported");
    std::vector<std::byte> tiny(3);
    EXPECT_EQ(error_code([&] { parse_attention_dump(tiny); }), "bad-magic");
}

TEST(AttentionDump, TruncatedPayload) {
    auto bytes = header(2, 1, 2);
    append_entry(bytes, 0, 0, {1, 0, 0.5f, 0.5f});
    append_entry(bytes, 0, 1, {1, 0, 0.5f, 0.5f});
    bytes.resize(bytes.size() - 3);
    EXPECT_EQ(error_code([&] { parse_attention_dump(bytes); }), "truncated-payload");
}

TEST(AttentionDump, RoundTripIsByteIdentical) {
    fixtures::TempDir dir;
    SynthTraceSpec spec;
    spec.n_tokens = 64;
    spec.prompt_length = 8;
    spec.layer_count = 36;
    spec.heads_per_layer = 4;
    const auto synth = make_synthetic_trace(spec, 11);
    ASSERT_EQ(synth.stack.entries.size(), 20u);
    const auto p = dir / "fixture.attd";
    write_attention_dump(synth.stack, p);
    const auto original = detail::read_file_bytes(p);
    const auto q = dir / "copy.attd";
    write_attention_dump(load_attention_dump(p), q);
    EXPECT_EQ(detail::read_file_bytes(q), original);
}

TEST(AttentionDump, MissingFileIsIoError) {
    EXPECT_EQ(error_code([] { load_attention_dump("/nonexistent/x.attd"); }), "io-error");
}

TEST(Validation, StrictLayerSetForThirtySixLayers) {
    EXPECT_EQ(required_layers(36), (std::vector<std::uint32_t>{12, 15, 18, 21, 24}));
}

TEST(Validation, StrictPolicyFlagsMissingLayers) {
    auto st = fixtures::single_head_stack(fixtures::uniform_causal(4), 36);
    const auto report = validate_stack(st, LayerPolicy{true});
    EXPECT_FALSE(report.ok());
    bool missing = false, unexpected = false;
    for (const auto& v : report.violations) {
        missing |= v.rule == "layer-policy-missing";
        unexpected |= v.rule == "layer-policy-unexpected";
    }
    EXPECT_TRUE(missing);
    EXPECT_TRUE(unexpected);
    EXPECT_TRUE(validate_stack(st, LayerPolicy{false}).ok());
}

TEST(Validation, RowSummingToPointNine) {
    auto m = fixtures::uniform_causal(3);
    m(2, 0) = 0.3;
    m(2, 1) = 0.3;
    m(2, 2) = 0.3;
    const auto report = validate_stack(fixtures::single_head_stack(m));
    ASSERT_EQ(report.violations.size(), 1u);
    EXPECT_EQ(report.violations[0].rule, "row-stochastic");
    EXPECT_EQ(report.violations[0].location, "layer=0,head=0,row=2");
    EXPECT_NEAR(report.violations[0].measured, 0.9, 1e-12);
}

TEST(Validation, CausalityNegativityAndDuplicates) {
    auto m = fixtures::uniform_causal(3);
    m(0, 1) = 0.2;
    m(0, 0) = 0.8;
    m(1, 0) = -0.1;
    m(1, 1) = 1.1;
    auto st = fixtures::single_head_stack(m);
    st.entries.push_back(st.entries[0]);
    std::set<std::string> rules;
    for (const auto& v : validate_stack(st).violations) rules.insert(v.rule);
    EXPECT_TRUE(rules.count("causal"));
    EXPECT_TRUE(rules.count("nonnegative"));
    EXPECT_TRUE(rules.count("unique-head"));
}

TEST(Validation, ValidTwoTokenFixture) {
    EXPECT_TRUE(validate_stack(fixtures::single_head_stack(fixtures::from_rows({{1, 0}, {0.5, 0.5}}))).ok());
}

TEST(TokenTraceIo, PromptAndResponseLengths) {
    const auto t = parse_token_trace(fixtures::trace_json(5, 3));
    EXPECT_EQ(t.tokens.size(), 5u);
    EXPECT_EQ(t.response_length(), 2u);
    EXPECT_EQ(t.response_range(), (IndexRange{3, 5}));
}

TEST(TokenTraceIo, EntropyOfWrongLength) {
    auto j = nlohmann::json::parse(fixtures::trace_json(5, 3));
    j["entropy"] = {0.1, 0.2, 0.3};
    EXPECT_EQ(error_code([&] { parse_token_trace(j.dump()); }), "inconsistent-lengths");
}

TEST(TokenTraceIo, EntropyFromUniformProbRows) {
    auto j = nlohmann::json::parse(fixtures::trace_json(5, 3));
    j["prob_rows"] = {{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}};
    const auto t = parse_token_trace(j.dump());
    ASSERT_TRUE(t.entropy);
    EXPECT_NEAR((*t.entropy)[0], 1.386294, 1e-6);
    EXPECT_NEAR((*t.entropy)[1], std::log(4.0), 1e-12);
}

TEST(TokenTraceIo, SchemaViolations) {
    EXPECT_EQ(error_code([] { parse_token_trace("{not json"); }), "schema-violation");
    EXPECT_EQ(error_code([] { parse_token_trace(R"({"tokens":[]})"); }), "schema-violation");
    EXPECT_EQ(error_code([] { parse_token_trace(R"({"tokens":[{"id":"x","text":"a"}],"response_start":0})"); }),
              "schema-violation");
    EXPECT_EQ(error_code([] { parse_token_trace(fixtures::trace_json(3, 3)); }), "empty-response-range");
    EXPECT_EQ(error_code([] { parse_token_trace(fixtures::trace_json(3, 4)); }), "inconsistent-lengths");
    EXPECT_EQ(error_code([] { parse_token_trace(fixtures::trace_json(3, 0)); }), "inconsistent-lengths");
}

TEST(TokenTraceIo, CanonicalRoundTripKeepsUnknownFields) {
    auto j = nlohmann::json::parse(fixtures::trace_json(4, 2));
    j["entropy"] = {0.5, 0.25};
    j["reward"] = 1.0;
    j["group_id"] = "g1";
    j["note"] = {{"source", "unit"}};
    const auto once = serialize_token_trace(parse_token_trace(j.dump()));
    EXPECT_EQ(serialize_token_trace(parse_token_trace(once)), once);
    EXPECT_NE(once.find("\"note\""), std::string::npos);
}
