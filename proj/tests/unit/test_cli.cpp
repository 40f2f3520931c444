// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "qselect/cli.hpp"
#include "qselect/dataset.hpp"
#include "temp_dir.hpp"

using namespace qselect;

namespace {

const std::filesystem::path kFixture = std::filesystem::path(QSELECT_SOURCE_DIR) / "tests" / "fixtures" / "replay20";

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qselect");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> replay_args(const std::string& cmd, const std::filesystem::path& out_dir) {
  return {cmd,           "--config",    (kFixture / "config.json").string(), "--dataset",
          (kFixture / "items.jsonl").string(), "--cache-dir", (kFixture / "cache").string(),
          "--out-dir",   out_dir.string()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const std::filesystem::path& p, const std::string& body) { std::ofstream(p, std::ios::binary) << body; }

class ScopedUnsetKey {
 public:
  ScopedUnsetKey() {
    if (const char* v = std::getenv("QSELECT_API_KEY")) saved_ = v;
    unsetenv("QSELECT_API_KEY");
  }
  ~ScopedUnsetKey() {
    if (saved_) setenv("QSELECT_API_KEY", saved_->c_str(), 1);
  }

 private:
  std::optional<std::string> saved_;
};

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"evaluate", "--k", "many"}).code, kExitUsage);
  const CliRun help = cli({"--help"});
  EXPECT_EQ(help.code, kExitOk);
  EXPECT_NE(help.out.find("evaluate"), std::string::npos);
}

TEST(Cli, LiveWithoutKeyIsConfigError) {
  ScopedUnsetKey guard;
  test::TempDir dir;
  auto args = replay_args("generate", dir.path());
  args.insert(args.end(), {"--backend", "live"});
  const CliRun r = cli(args);
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("QSELECT_API_KEY"), std::string::npos) << r.err;
}

TEST(Cli, BadConfigValues) {
  test::TempDir dir;
  write(dir.path() / "c.json", R"({"kk": 1})");
  EXPECT_EQ(cli({"evaluate", "--config", (dir.path() / "c.json").string()}).code, kExitConfig);
  EXPECT_EQ(cli({"evaluate", "--methods", "quadgram"}).code, kExitConfig);
  EXPECT_EQ(cli({"evaluate", "--backend", "replay", "--cache-dir", (dir.path() / "none").string(), "--dataset",
                 (kFixture / "items.jsonl").string(), "--out-dir", (dir.path() / "o").string()})
                .code,
            kExitConfig);
}

TEST(Cli, MissingReferencesIsDataError) {
  test::TempDir dir;
  write(dir.path() / "items.jsonl", R"({"id":"a","context":"The fox ran.","answer":"ran"})" "\n");
  write(dir.path() / "script.json",
        R"({"rules":[{"contains":"Story:","response":"What did the fox do?"}]})");
  const CliRun r = cli({"evaluate", "--backend", "scripted", "--script", (dir.path() / "script.json").string(),
                     "--dataset", (dir.path() / "items.jsonl").string(), "--methods", "bigram", "--ensemble", "",
                     "--out-dir", (dir.path() / "out").string()});
  EXPECT_EQ(r.code, kExitData) << r.err;
  EXPECT_NE(r.err.find("items lack reference questions: a"), std::string::npos) << r.err;
}

TEST(Cli, ScriptedStagesEndToEnd) {
  test::TempDir dir;
  write(dir.path() / "items.jsonl",
        R"({"id":"a","context":"The fox ran home.","answer":"home","reference_question":"Where did the fox run?"})"
        "\n");
  write(dir.path() / "script.json",
        R"({"rules":[{"contains":"Story:","response":"Where did the fox run?"}]})");
  const std::vector<std::string> common = {"--backend",  "scripted", "--script", (dir.path() / "script.json").string(),
                                           "--dataset", (dir.path() / "items.jsonl").string(), "--k", "3",
                                           "--methods", "unigram,bigram", "--ensemble", "unigram+bigram",
                                           "--out-dir", (dir.path() / "out").string()};
  for (const char* stage : {"ingest", "generate", "score", "select"}) {
    std::vector<std::string> args = {stage};
    args.insert(args.end(), common.begin(), common.end());
    const CliRun r = cli(args);
    ASSERT_EQ(r.code, kExitOk) << stage << ": " << r.err;
  }
  const auto sets = read_candidates_jsonl(dir.path() / "out" / "candidates.jsonl");
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets[0].sampled.size(), 3u);
  std::size_t lines = 0;
  read_jsonl(dir.path() / "out" / "selections.jsonl", [&](const nlohmann::json& j, std::size_t) {
    EXPECT_EQ(j.at("selected_question"), "Where did the fox run?");
    ++lines;
  });
  EXPECT_EQ(lines, 3u);

  std::vector<std::string> args = {"report"};
  args.insert(args.end(), common.begin(), common.end());
  const CliRun rep = cli(args);
  ASSERT_EQ(rep.code, kExitOk) << rep.err;
  EXPECT_NE(rep.out.find("uni-gram + bi-gram"), std::string::npos) << rep.out;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / "results.csv"));
}

TEST(Cli, ReplayEvaluateIsDeterministic) {
  ScopedUnsetKey guard;
  test::TempDir dir;
  const CliRun a = cli(replay_args("evaluate", dir.path() / "a"));
  const CliRun b = cli(replay_args("evaluate", dir.path() / "b"));
  ASSERT_EQ(a.code, kExitOk) << a.err;
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_EQ(a.out, b.out);
  for (const char* f : {"results.json", "results.csv", "results.txt", "selections.jsonl"}) {
    EXPECT_EQ(slurp(dir.path() / "a" / f), slurp(dir.path() / "b" / f)) << f;
  }
  EXPECT_NE(a.out.find("M_max (upperbound)"), std::string::npos);
}

TEST(Cli, ReplayMissIsBackendError) {
  test::TempDir dir;
  std::filesystem::create_directories(dir.path() / "empty");
  auto args = replay_args("generate", dir.path() / "out");
  args[6] = (dir.path() / "empty").string();
  const CliRun r = cli(args);
  EXPECT_EQ(r.code, kExitBackend) << r.err;
  EXPECT_NE(r.err.find("generation calls failed"), std::string::npos) << r.err;
}

TEST(Cli, CacheStats) {
  const CliRun r = cli({"cache-stats", "--cache-dir", (kFixture / "cache").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_GT(j.at("records").get<std::size_t>(), 1000u);
  EXPECT_EQ(j.at("by_backend").at("scripted"), j.at("records"));
}

TEST(Cli, BinaryExitCodes) {
  EXPECT_EQ(WEXITSTATUS(std::system((std::string(QSELECT_CLI_PATH) + " >/dev/null 2>&1").c_str())), kExitUsage);
  EXPECT_EQ(WEXITSTATUS(std::system((std::string(QSELECT_CLI_PATH) + " --help >/dev/null 2>&1").c_str())), kExitOk);
}
