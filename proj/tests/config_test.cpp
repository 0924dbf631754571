#include <gtest/gtest.h>

#include <sstream>

#include "rhythm/config.hpp"
#include "rhythm/format.hpp"

using namespace rhythm;

TEST(RunConfigParse, KeysCommentsAndQuotes) {
    std::istringstream in(R"(# corpus settings
window = 12
q = 0.3            # shared by peaks and credit
peak_method = local-max
tau_waad = 1.5
tau_delta = auto
delta_credit = t+1
inputs = "data/*.attd"
output_dir = out
workers = 4
)");
    const auto c = parse_run_config(in, "/base");
    EXPECT_EQ(c.metrics.window, 12u);
    EXPECT_EQ(c.metrics.q, 0.3);
    EXPECT_EQ(c.credit.q, 0.3);
    EXPECT_EQ(c.metrics.peak_method, PeakMethod::LocalMax);
    EXPECT_EQ(c.credit.tau_waad, 1.5);
    EXPECT_FALSE(c.credit.tau_delta);
    EXPECT_EQ(c.credit.delta_credit, DeltaCredit::Later);
    EXPECT_EQ(c.inputs, "/base/data/*.attd");
    EXPECT_EQ(c.output_dir, std::filesystem::path("/base/out"));
    EXPECT_EQ(c.workers, 4u);
}

TEST(RunConfigParse, Errors) {
    auto code_of = [](const std::string& text) {
        std::istringstream in(text);
        try {
            parse_run_config(in);
        } catch (const Error& e) {
            return e.code();
        }
        return std::string("no-error");
    };
    EXPECT_EQ(code_of("colour = blue\n"), "config-error");
    EXPECT_EQ(code_of("window 10\n"), "config-error");
    EXPECT_EQ(code_of("window = -3\n"), "config-error");
    EXPECT_EQ(code_of("include_sink = yes\n"), "config-error");
    EXPECT_EQ(code_of("head_quantile = 0.7\n"), "quantile-out-of-range");
    EXPECT_EQ(code_of("horizon_lo = 60\n"), "invalid-params");
    EXPECT_EQ(code_of(""), "no-error");
}

TEST(RunConfigParse, SnapshotExcludesPathsAndWorkers) {
    RunConfig a, b;
    b.workers = 8;
    b.output_dir = "/elsewhere";
    b.inputs = "/x/*.attd";
    EXPECT_EQ(config_snapshot(a), config_snapshot(b));
    b.coupling.seed = 9;
    EXPECT_NE(config_snapshot(a), config_snapshot(b));
}

TEST(Format, ShortestRoundTripAndCsvQuoting) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(1.5), "1.5");
    EXPECT_EQ(format_double(155.0 / 21.0), "7.380952380952381");
    EXPECT_EQ(csv_field("plain"), "plain");
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}
