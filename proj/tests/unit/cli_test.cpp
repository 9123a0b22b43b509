// Copyright 2026 The fsat Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cli/commands.hpp"
#include "cli/selfcheck.hpp"

namespace fsat::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result fsat(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// A small trained model and a held-out split, built once for the suite.
class CliFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("fsat_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    const std::vector<std::string> task = {"--set", "task.alphabet=abc", "--set", "task.feature_dim=8",
                                           "--set", "task.min_tokens=2",  "--set", "task.max_tokens=3",
                                           "--set", "task.min_token_frames=10", "--set", "task.max_token_frames=12",
                                           "--set", "task.edge_frames=2"};
    auto with = [&](std::vector<std::string> a) {
      a.insert(a.end(), task.begin(), task.end());
      return a;
    };
    ASSERT_EQ(fsat(with({"synth", "--out", p("train"), "--speakers", "3", "--environments", "2",
                         "--utterances", "3", "--set", "task.split=train"}))
                  .code,
              0);
    ASSERT_EQ(fsat(with({"synth", "--out", p("test"), "--speakers", "2", "--environments", "2",
                         "--utterances", "2", "--speaker-offset", "10", "--env-offset", "1", "--set",
                         "task.split=test"}))
                  .code,
              0);
    const auto r = fsat({"train", "--out", p("model"), "--manifest", p("train/manifest.tsv"), "--epochs", "4",
                         "--set", "model.model_dim=12", "--set", "model.ff_dim=16", "--set", "model.encoder_blocks=1",
                         "--set", "model.decoder_blocks=1"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static std::string p(const std::string& rel) { return (root_ / rel).string(); }

  static fs::path root_;
};

fs::path CliFixture::root_;

TEST_F(CliFixture, RunDirectoryHoldsConfigSeedAndSummary) {
  for (const char* dir : {"train", "model"}) {
    EXPECT_TRUE(fs::exists(root_ / dir / "config.cfg")) << dir;
    EXPECT_TRUE(fs::exists(root_ / dir / "seed.txt")) << dir;
    EXPECT_EQ(slurp(root_ / dir / "summary.txt").rfind("# fsat-run-summary 1\n", 0), 0u) << dir;
  }
  EXPECT_TRUE(fs::exists(root_ / "model/model.cfg"));
  EXPECT_TRUE(fs::exists(root_ / "model/model.ckpt"));
  EXPECT_NE(slurp(root_ / "model/seed.txt").find("root 1\n"), std::string::npos);
}

TEST_F(CliFixture, AdaptWritesBothPassesAndCache) {
  const auto r = fsat({"adapt", "--out", p("adapt"), "--model", p("model"), "--manifest", p("test/manifest.tsv"),
                       "--mode", "cfa", "--epochs", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"first_pass.hyp", "adapted.hyp", "transforms.cache", "summary.txt", "config.cfg"}) {
    EXPECT_TRUE(fs::exists(root_ / "adapt" / f)) << f;
  }
  EXPECT_EQ(read_hypotheses(root_ / "adapt/adapted.hyp").size(), 8u);
  const std::string summary = slurp(root_ / "adapt/summary.txt");
  EXPECT_NE(summary.find("mode cfa-hub-hub"), std::string::npos);
  EXPECT_NE(summary.find("objective 2 "), std::string::npos);
}

TEST_F(CliFixture, SameSeedGivesByteIdenticalArtifacts) {
  const std::vector<std::string> base = {"adapt", "--model", p("model"), "--manifest", p("test/manifest.tsv"),
                                         "--mode", "cfa", "--bayesian", "--epochs", "2", "--seed", "7"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", p("det_a")});
  b.insert(b.end(), {"--out", p("det_b")});
  ASSERT_EQ(fsat(a).code, 0);
  ASSERT_EQ(fsat(b).code, 0);
  for (const char* f : {"first_pass.hyp", "adapted.hyp", "transforms.cache", "summary.txt", "seed.txt"}) {
    EXPECT_EQ(slurp(root_ / "det_a" / f), slurp(root_ / "det_b" / f)) << f;
  }
}

TEST_F(CliFixture, LfaWithBetaOneMatchesSpeakerOnly) {
  ASSERT_EQ(fsat({"adapt", "--out", p("lfa1"), "--model", p("model"), "--manifest", p("test/manifest.tsv"),
                  "--mode", "lfa", "--beta", "1", "--epochs", "2"})
                .code,
            0);
  ASSERT_EQ(fsat({"adapt", "--out", p("spk"), "--model", p("model"), "--manifest", p("test/manifest.tsv"),
                  "--mode", "speaker", "--spk-kind", "lhuc", "--epochs", "2"})
                .code,
            0);
  EXPECT_EQ(slurp(root_ / "lfa1/adapted.hyp"), slurp(root_ / "spk/adapted.hyp"));
}

TEST_F(CliFixture, ConfigLayersApplyInOrder) {
  {
    std::ofstream f(root_ / "layer.cfg");
    f << "adapt.mode = speaker\nadapt.epochs = 1\n";
  }
  // File over defaults, --set over file, explicit flag over --set.
  ASSERT_EQ(fsat({"adapt", "--out", p("layers"), "--model", p("model"), "--manifest", p("test/manifest.tsv"),
                  "--config", p("layer.cfg"), "--set", "adapt.mode=env", "--set", "adapt.epochs=3", "--epochs", "2"})
                .code,
            0);
  const std::string cfg = slurp(root_ / "layers/config.cfg");
  EXPECT_NE(cfg.find("adapt.mode = env"), std::string::npos) << cfg;
  EXPECT_NE(cfg.find("adapt.epochs = 2"), std::string::npos) << cfg;
}

TEST_F(CliFixture, ScoreReportsGroupsAndWritesTsv) {
  ASSERT_EQ(fsat({"decode", "--out", p("dec"), "--model", p("model"), "--manifest", p("test/manifest.tsv")}).code, 0);
  const auto r = fsat({"score", "--ref", p("test/manifest.tsv"), "--hyp", p("dec/hypotheses.hyp"), "--out",
                       p("score"), "--group-by", "env,speaker"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("env01"), std::string::npos);
  EXPECT_NE(r.out.find("spk10"), std::string::npos);
  EXPECT_TRUE(fs::exists(root_ / "score/report.tsv"));
}

TEST_F(CliFixture, ErrorsMapToDistinctExitCodes) {
  const auto usage = fsat({"adapt", "--no-such-flag"});
  EXPECT_EQ(usage.code, kExitUsage);
  EXPECT_EQ(usage.err.rfind("error: category=usage message=", 0), 0u);

  const auto io = fsat({"adapt", "--out", p("e1"), "--model", p("missing"), "--manifest", p("test/manifest.tsv")});
  EXPECT_EQ(io.code, kExitIo);
  EXPECT_EQ(io.err.rfind("error: category=io message=", 0), 0u);

  const auto config = fsat({"adapt", "--out", p("e2"), "--model", p("model"), "--manifest", p("test/manifest.tsv"),
                            "--mode", "bogus"});
  EXPECT_EQ(config.code, kExitConfig);

  const auto set = fsat({"adapt", "--out", p("e3"), "--model", p("model"), "--manifest", p("test/manifest.tsv"),
                         "--set", "novalue"});
  EXPECT_EQ(set.code, kExitConfig);

  {
    std::ofstream f(root_ / "bad.hyp");
    f << "no header here\n";
  }
  const auto format = fsat({"score", "--ref", p("test/manifest.tsv"), "--hyp", p("bad.hyp")});
  EXPECT_EQ(format.code, kExitFormat);

  const auto state = fsat({"adapt", "--out", p("e4"), "--model", p("model"), "--manifest", p("test/manifest.tsv"),
                           "--passes", "3"});
  EXPECT_NE(state.code, kExitOk);
  EXPECT_NE(state.code, kExitInternal);
}

TEST_F(CliFixture, RapidAdaptFromTrainingCache) {
  ASSERT_EQ(fsat({"train", "--out", p("sat"), "--manifest", p("train/manifest.tsv"), "--epochs", "2", "--adaptive",
                  "--mode", "cfa", "--set", "model.model_dim=12", "--set", "model.ff_dim=16", "--set",
                  "model.encoder_blocks=1", "--set", "model.decoder_blocks=1"})
                .code,
            0);
  ASSERT_TRUE(fs::exists(root_ / "sat/transforms.cache"));
  // Test speakers and the second environment were never trained on.
  const auto matched = fsat({"rapid-adapt", "--out", p("rapid"), "--model", p("sat"), "--manifest",
                             p("test/manifest.tsv"), "--cache", p("sat/transforms.cache"), "--mode", "cfa"});
  EXPECT_NE(matched.code, kExitOk);
  const auto mm = fsat({"rapid-adapt", "--out", p("rapid_mm"), "--model", p("sat"), "--manifest",
                        p("test/manifest.tsv"), "--cache", p("sat/transforms.cache"), "--mode", "cfa", "--pairing",
                        "mm-both"});
  ASSERT_EQ(mm.code, 0) << mm.err;
  EXPECT_EQ(read_hypotheses(root_ / "rapid_mm/hypotheses.hyp").size(), 8u);
}

TEST(Cli, VersionListsEveryFormat) {
  const auto r = fsat({"--version"});
  ASSERT_EQ(r.code, 0);
  for (const char* f : {"feature-archive 1", "checkpoint 1", "transform-cache 1", "hypotheses 1", "run-summary 1"}) {
    EXPECT_NE(r.out.find(f), std::string::npos) << f;
  }
}

TEST(Cli, HelpDocumentsExitCodes) {
  const auto r = fsat({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Exit codes"), std::string::npos);
}

TEST(Cli, HypothesisFileRoundTrip) {
  const fs::path f = fs::temp_directory_path() / ("fsat_hyp_" + std::to_string(::getpid()) + ".hyp");
  asr::Hypothesis a, b;
  a.text = "ab";
  a.score = -1.25;
  b.score = 0.5;
  write_hypotheses(f, {"u1", "u2"}, {a, b});
  const auto back = read_hypotheses(f);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].text, "ab");
  EXPECT_EQ(back[0].score, -1.25);
  EXPECT_EQ(back[1].text, "");
  fs::remove(f);
}

TEST(Cli, SelfcheckSuitesPassAtReducedSizes) {
  SuiteSizes small;
  small.gradient_points = 3;
  small.ctc_tables = 20;
  small.kl_pairs = 10;
  small.snr_triples = 100;
  small.edit_pairs = 100;
  for (const auto& [name, suite] : oracle_suites()) {
    const auto r = suite(small);
    EXPECT_TRUE(r.passed) << name << ": " << r.detail;
  }
}

}  // namespace
}  // namespace fsat::cli
