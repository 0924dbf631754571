#include <gtest/gtest.h>

#include <sstream>

#include "rhythm/perturbation.hpp"

using namespace rhythm;

namespace {

using Words = std::vector<std::string>;

RolloutPair pair_of(FaiBucket b, Words orig, Words cf, std::string trial = "0") {
    RolloutPair p;
    p.position = 3;
    p.bucket = b;
    p.original_suffix = std::move(orig);
    p.counterfactual_suffix = std::move(cf);
    p.trace_id = "tr";
    p.trial_id = std::move(trial);
    return p;
}

const Words kTen{"alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet"};

} // namespace

TEST(ContentTokens, NormalizationAndStoplist) {
    const Stoplist stop{"the"};
    EXPECT_TRUE(content_token_set({}, stop).empty());
    EXPECT_EQ(content_token_set({"The", "cat", "the", "CAT", "."}, stop), (std::set<std::string>{"cat"}));
    EXPECT_TRUE(content_token_set({"the", "The", "THE"}, stop).empty());
    EXPECT_EQ(normalize_token(" Don't! "), "dont");
}

TEST(Jaccard, Properties) {
    const std::set<std::string> a{"a", "b", "c"}, b{"b", "c", "d"}, c{"x"};
    EXPECT_EQ(jaccard(a, a), 1.0);
    EXPECT_EQ(jaccard(a, c), 0.0);
    EXPECT_DOUBLE_EQ(jaccard(a, b), 0.5);
    EXPECT_EQ(jaccard(a, b), jaccard(b, a));
    EXPECT_EQ(jaccard(a, {}), 0.0);
    EXPECT_THROW(jaccard({}, {}), Error);
}

TEST(PerturbReport, SingleTrialArithmetic) {
    const Words three(kTen.begin(), kTen.begin() + 3), nine(kTen.begin(), kTen.begin() + 9);
    const auto r = perturbation_report({pair_of(FaiBucket::Top, kTen, three), pair_of(FaiBucket::Bottom, kTen, nine)}, {});
    EXPECT_DOUBLE_EQ(r.mean_jaccard_top, 0.3);
    EXPECT_DOUBLE_EQ(r.mean_jaccard_bottom, 0.9);
    EXPECT_EQ(r.prob_top_lt_bottom, 1.0);
    EXPECT_EQ(r.n_pairs, 2u);
    EXPECT_EQ(r.n_matched_trials, 1u);
}

TEST(PerturbReport, IdenticalSuffixesNeverWinStrictly) {
    const auto r = perturbation_report({pair_of(FaiBucket::Top, kTen, kTen, "0"), pair_of(FaiBucket::Bottom, kTen, kTen, "0"),
                                        pair_of(FaiBucket::Top, kTen, kTen, "1"), pair_of(FaiBucket::Bottom, kTen, kTen, "1")},
                                       default_stoplist());
    EXPECT_EQ(r.mean_jaccard_top, 1.0);
    EXPECT_EQ(r.mean_jaccard_bottom, 1.0);
    EXPECT_EQ(r.prob_top_lt_bottom, 0.0);
}

TEST(PerturbReport, UnmatchedBuckets) {
    try {
        perturbation_report({pair_of(FaiBucket::Top, kTen, kTen, "0"), pair_of(FaiBucket::Bottom, kTen, kTen, "0"),
                             pair_of(FaiBucket::Top, kTen, kTen, "1")},
                            {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "unmatched-buckets");
    }
}

TEST(RolloutPairs, JsonLines) {
    std::istringstream in(
        R"({"position":4,"bucket":"top","forced_token":{"id":7,"text":"so"},"original_suffix":["a","b"],"counterfactual_suffix":["a"],"trace_id":"t1","trial_id":0})"
        "\n\n"
        R"({"position":9,"bucket":"bottom","forced_token":"hmm","original_suffix":["a","b"],"counterfactual_suffix":["b","a"],"trace_id":"t1","trial_id":0})"
        "\n");
    const auto pairs = parse_rollout_pairs(in);
    ASSERT_EQ(pairs.size(), 2u);
    EXPECT_EQ(pairs[0].bucket, FaiBucket::Top);
    EXPECT_EQ(pairs[0].forced_token_text, "so");
    EXPECT_EQ(pairs[1].trial_id, "0");
    const auto r = perturbation_report(pairs, {});
    EXPECT_DOUBLE_EQ(r.mean_jaccard_top, 0.5);
    EXPECT_DOUBLE_EQ(r.mean_jaccard_bottom, 1.0);

    std::istringstream bad(R"({"position":-1,"bucket":"top"})");
    EXPECT_THROW(parse_rollout_pairs(bad), Error);
}

TEST(Stoplist, BundledFileMatchesBuiltIn) {
    EXPECT_EQ(load_stoplist(RHYTHM_DATA_DIR "/stopwords_en.txt"), default_stoplist());
    EXPECT_TRUE(default_stoplist().contains("the"));
}
