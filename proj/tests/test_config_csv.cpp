#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "sde_remle/config.hpp"
#include "sde_remle/csv.hpp"

using namespace sde_remle;

TEST(Config, ParsesTheta) {
  const auto cfg = parse_config("mu0 = 1.0\nomega2_0 = 0.5");
  EXPECT_EQ(cfg.real("mu0"), 1.0);
  EXPECT_EQ(cfg.real("omega2_0"), 0.5);
}

TEST(Config, UnknownKeyHasLine) {
  try {
    parse_config("bogus = 1");
    FAIL();
  } catch (const UnknownKey& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(Config, CommentsAndBlankLines) {
  const auto cfg = parse_config("# header\n\nn = 5   # trailing\n  model = unit\n");
  EXPECT_EQ(cfg.count("n"), 5u);
  EXPECT_EQ(cfg.text("model"), "unit");
  EXPECT_EQ(cfg.line_of("model"), 4u);
}

TEST(Config, ParseErrorsHaveLines) {
  auto line_of = [](const char* text) -> std::size_t {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("n = 4\ndt = fast"), 2u);
  EXPECT_EQ(line_of("n = -4"), 1u);
  EXPECT_EQ(line_of("\n\nnonsense"), 3u);
  EXPECT_EQ(line_of("n = 1\nn = 2"), 2u);
  EXPECT_EQ(line_of("n_schedule = 50, x"), 1u);
  EXPECT_EQ(line_of("dt ="), 1u);
}

TEST(Config, MissingKey) {
  const auto cfg = parse_config("n = 3");
  EXPECT_THROW(cfg.require({"n", "dt"}), MissingKey);
  EXPECT_THROW(cfg.real("dt"), MissingKey);
}

TEST(Config, CanonicalRoundTrip) {
  const auto cfg = parse_config("seed = 9\nmodel = unit\nn_schedule = 50,200, 800\n# c\ndt = 0.01\n");
  const auto again = parse_config(cfg.canonical());
  EXPECT_EQ(cfg, again);
  EXPECT_EQ(again.canonical(), cfg.canonical());
  EXPECT_EQ(again.counts("n_schedule"), (std::vector<std::uint64_t>{50, 200, 800}));
}

TEST(Config, SeedPrecedence) {
  const auto with = parse_config("seed = 5");
  const auto without = parse_config("n = 1");
  ::unsetenv("SDE_REMLE_SEED");
  EXPECT_EQ(resolve_seed(without, std::nullopt), 0u);
  ::setenv("SDE_REMLE_SEED", "77", 1);
  EXPECT_EQ(resolve_seed(without, std::nullopt), 77u);
  EXPECT_EQ(resolve_seed(with, std::nullopt), 5u);
  EXPECT_EQ(resolve_seed(with, 11u), 11u);
  ::setenv("SDE_REMLE_SEED", "x", 1);
  EXPECT_THROW(resolve_seed(without, std::nullopt), ConfigError);
  ::unsetenv("SDE_REMLE_SEED");
}

TEST(Text, FormatRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    double back = 0.0;
    ASSERT_TRUE(parse_double(format_double(x), back));
    EXPECT_EQ(back, x);
  }
}

namespace {

std::vector<Path> read(const std::string& text) {
  std::istringstream in(text);
  return read_paths_csv(in);
}

std::string ingest_error(const std::string& text) {
  try {
    read(text);
  } catch (const IngestError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(PathsCsv, RoundTrip) {
  const auto paths = simulate_ensemble(builtin_model("unit"), {1.0, 0.5},
                                       Design::iid(3, 0.5, 1.0, 0.1, 4), 0);
  std::ostringstream out;
  write_paths_csv(out, paths);
  const auto back = read(out.str());
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].times, paths[i].times);
    EXPECT_EQ(back[i].values, paths[i].values);
    EXPECT_EQ(back[i].subject_index, i);
    EXPECT_FALSE(back[i].phi.has_value());
  }
}

TEST(PathsCsv, DecreasingTimeNamesSubjectAndRow) {
  const auto msg = ingest_error("subject,k,t,x\n0,0,0,1\n0,1,0.5,1\n1,0,0,2\n1,1,0.4,2\n1,2,0.3,2\n");
  EXPECT_NE(msg.find("subject 1"), std::string::npos) << msg;
  EXPECT_NE(msg.find("row 6"), std::string::npos) << msg;
}

TEST(PathsCsv, Rejections) {
  EXPECT_NE(ingest_error(""), "");
  EXPECT_NE(ingest_error("a,b,c,d\n"), "");
  EXPECT_NE(ingest_error("subject,k,t,x\n0,0,0.1,1\n0,1,0.2,1\n"), "");   // t0 != 0
  EXPECT_NE(ingest_error("subject,k,t,x\n0,0,0,1\n"), "");                 // one point
  EXPECT_NE(ingest_error("subject,k,t,x\n0,0,0,1\n0,2,1,1\n"), "");        // k gap
  EXPECT_NE(ingest_error("subject,k,t,x\n0,0,0,1\n0,1,1,nan\n"), "");      // non-finite
  EXPECT_NE(ingest_error("subject,k,t,x\n0,0,0,1\n0,1,1\n"), "");          // short row
  EXPECT_NE(ingest_error("subject,k,t,x\n0,0,0,1\n0,1,1,1\n1,0,0,1\n1,1,1,1\n0,2,2,1\n"), "");
}

TEST(FitCsv, MissingSeIsNA) {
  MleFit fit;
  fit.n = 4;
  fit.boundary.omega2_lo = true;
  const auto row = fit_row(fit);
  EXPECT_NE(row.find("omega2_lo,NA,NA"), std::string::npos) << row;
}

TEST(FailuresCsv, QuotesMessages) {
  EXPECT_EQ(csv_quote("a \"b\",c\nd"), "\"a \"\"b\"\",c d\"");
}
