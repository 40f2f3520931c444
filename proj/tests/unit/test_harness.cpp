// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "qselect/harness.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace qselect;

namespace {

std::shared_ptr<ScriptedBackend> synthetic_backend() {
  auto b = std::make_shared<ScriptedBackend>();
  b->add_responder(test::synthetic_response);
  return b;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.methods = {Method::ngram(1), Method::ngram(2), Method::ngram(3), Method::roundtrip(),
               Method::ops(),    Method::aps(),     Method::oracle_max(), Method::oracle_min()};
  c.ensembles = {Method::parse("bigram+aps+roundtrip"), Method::parse("aps+roundtrip")};
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Scripted responses keyed on the sample index of a generation request.
class IndexedQg final : public CompletionBackend {
 public:
  std::map<std::size_t, std::string> by_index;
  std::vector<std::size_t> seen;
  std::mutex mu;

  std::string complete(const CompletionRequest& r, std::size_t index) override {
    std::lock_guard<std::mutex> lock(mu);
    seen.push_back(index);
    if (r.temperature == 0.0 && index < kRetrySampleOffset) return "Greedy question?";
    auto it = by_index.find(index);
    if (it == by_index.end()) throw BackendError(BackendErrorKind::network, "down");
    return it->second;
  }
  BackendKind kind() const override { return BackendKind::scripted; }
};

const GenerationItem kItem{"x", "The fox found a key.", "a key", "What did the fox find?", DatasetTag::generic};

}  // namespace

TEST(Sampling, KPlusOneCalls) {
  ScriptedBackend b;
  b.add_rule("Story:", "Who found it?");
  const auto out = sample_candidates(kItem, b, 5, 0.7);
  EXPECT_EQ(b.call_count(), 6u);
  EXPECT_EQ(out.candidates.sampled.size(), 5u);
  EXPECT_EQ(out.candidates.greedy, "Who found it?");
  EXPECT_TRUE(out.candidates.flagged.empty());
  EXPECT_EQ(out.failures.total(), 0u);
  EXPECT_NO_THROW(out.candidates.check());
}

TEST(Sampling, EmptyRetriedOnceThenSentinel) {
  IndexedQg b;
  b.by_index = {{0, "  "}, {kRetrySampleOffset, "Recovered?"}, {1, "\n"}, {kRetrySampleOffset + 1, ""},
                {2, "Fine?"}};
  const auto out = sample_candidates(kItem, b, 3, 0.7);
  EXPECT_EQ(out.candidates.sampled, (std::vector<std::string>{"Recovered?", "", "Fine?"}));
  EXPECT_EQ(out.candidates.flagged, (std::vector<bool>{false, true, false}));
  EXPECT_EQ(out.failures.empty_generations, 1u);
  EXPECT_EQ(out.failures.sampling_backend_failures, 0u);
  EXPECT_EQ(out.candidates.eligible_count(), 2u);
  EXPECT_NO_THROW(out.candidates.check());
}

TEST(Sampling, BackendErrorFlagsSlot) {
  IndexedQg b;
  b.by_index = {{0, "Ok?"}};
  const auto out = sample_candidates(kItem, b, 2, 0.7);
  EXPECT_EQ(out.candidates.flagged, (std::vector<bool>{false, true}));
  EXPECT_EQ(out.failures.sampling_backend_failures, 1u);
}

TEST(Sampling, ZeroKRejected) {
  ScriptedBackend b;
  EXPECT_THROW(sample_candidates(kItem, b, 0, 0.7), InvalidArgument);
}

TEST(Evaluate, OraclesMatchBounds) {
  auto b = synthetic_backend();
  const auto items = test::synthetic_items(20);
  const auto out = run_experiment(items, *b, small_config());
  const auto& t = out.table;
  EXPECT_EQ(t.items, 20u);
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (!t.columns[c].per_item_mean) continue;
    EXPECT_DOUBLE_EQ(t.row("oracle_max").values[c], t.row(kRowUpperbound).values[c]);
    EXPECT_DOUBLE_EQ(t.row("oracle_min").values[c], t.row(kRowLowerbound).values[c]);
  }
  EXPECT_TRUE(t.tautology_violations().empty());
}

TEST(Evaluate, RowOrderFollowsGroups) {
  auto b = synthetic_backend();
  const auto cfg = small_config();
  const auto out = run_experiment(test::synthetic_items(4), *b, cfg);
  std::vector<std::string> keys;
  for (const auto& r : out.table.rows) keys.push_back(r.key);
  std::vector<std::string> expected = {"greedy", "sample_avg", "lowerbound", "upperbound"};
  for (const auto& m : cfg.methods) expected.push_back(m.name());
  for (const auto& m : cfg.ensembles) expected.push_back(m.name());
  EXPECT_EQ(keys, expected);
  ASSERT_EQ(out.table.columns.size(), 2u);
  EXPECT_EQ(out.table.columns[0].name, "bleu4 (sentence mean)");
  EXPECT_FALSE(out.table.columns[1].per_item_mean);
}

TEST(Evaluate, HandComputedCandidateFixture) {
  // Candidate 2 repeats the reference; unigram overlap with the context
  // prefers candidate 1.
  const GenerationItem item{"a", "The fox found a key.", "a key", "What did the fox find?", DatasetTag::generic};
  CandidateSet c;
  c.item_id = "a";
  c.k = 3;
  c.greedy = "What is it?";
  c.sampled = {"Zebra yonder?", "The fox found a key?", "What did the fox find?"};
  ItemScores s = score_item(item, c, {Method::ngram(1)}, nullptr);
  const auto out = evaluate({item}, {c}, {s}, {Method::ngram(1), Method::oracle_max()}, {}, MetricName::rouge_l);
  const auto& t = out.table;
  ASSERT_EQ(t.columns.size(), 1u);
  EXPECT_EQ(t.columns[0].name, "rouge_l");
  EXPECT_DOUBLE_EQ(t.row("upperbound").values[0], 1.0);
  EXPECT_DOUBLE_EQ(t.row("lowerbound").values[0], 0.0);
  const double mid = metric_value(c.sampled[1], *item.reference_question, MetricName::rouge_l);
  EXPECT_DOUBLE_EQ(t.row("sample_avg").values[0], (0.0 + mid + 1.0) / 3.0);
  EXPECT_DOUBLE_EQ(t.row("unigram").values[0], mid);
  EXPECT_DOUBLE_EQ(t.row("greedy").values[0],
                   metric_value(c.greedy, *item.reference_question, MetricName::rouge_l));
  ASSERT_EQ(out.selections.size(), 2u);
  EXPECT_EQ(out.selections[0].selected_question, "The fox found a key?");
  EXPECT_EQ(out.selections[1].selected_question, "What did the fox find?");
}

TEST(Evaluate, AllTiedGivesEqualBounds) {
  const GenerationItem item{"a", "Ctx here.", "here", "Where is it?", DatasetTag::generic};
  CandidateSet c;
  c.item_id = "a";
  c.k = 3;
  c.greedy = "Where is it?";
  c.sampled = {"Where is it?", "Where is it?", "Where is it?"};
  const ItemScores s = score_item(item, c, {Method::ngram(2)}, nullptr);
  const auto out = evaluate({item}, {c}, {s}, {Method::ngram(2)}, {}, MetricName::bleu4);
  const auto& t = out.table;
  EXPECT_EQ(t.row("lowerbound").values[0], t.row("upperbound").values[0]);
  EXPECT_EQ(t.row("sample_avg").values[0], t.row("upperbound").values[0]);
  EXPECT_EQ(t.row("bigram").ties, 1u);
}

TEST(Evaluate, FlaggedSlotsNeverSelected) {
  const GenerationItem item{"a", "The fox found a key.", "a key", "What did the fox find?", DatasetTag::generic};
  CandidateSet c;
  c.item_id = "a";
  c.k = 2;
  c.greedy = "What?";
  c.sampled = {"", "Zebra?"};
  c.flagged = {true, false};
  const ItemScores s = score_item(item, c, {Method::ngram(1)}, nullptr);
  const auto out = evaluate({item}, {c}, {s}, {Method::ngram(1), Method::oracle_max()}, {}, MetricName::bleu4);
  for (const auto& sel : out.selections) {
    ASSERT_TRUE(sel.result.has_value());
    EXPECT_EQ(sel.result->selected_index, 1u);
  }
}

TEST(Evaluate, MissingReferencesListsIds) {
  GenerationItem a = kItem;
  GenerationItem b = kItem;
  b.id = "y";
  b.reference_question.reset();
  try {
    evaluate({a, b}, {}, {}, {}, {}, MetricName::bleu4);
    FAIL();
  } catch (const MissingReferences& e) {
    EXPECT_EQ(e.ids(), std::vector<std::string>{"y"});
  }
}

TEST(Evaluate, InputOrderDoesNotChangeTable) {
  auto b = synthetic_backend();
  auto items = test::synthetic_items(6);
  PipelineRun run;
  const auto cfg = small_config();
  const auto forward = run_experiment(items, *b, cfg, &run);
  auto ri = items;
  auto rc = run.candidates;
  auto rs = run.scores;
  std::reverse(ri.begin(), ri.end());
  std::reverse(rc.begin(), rc.end());
  std::reverse(rs.begin(), rs.end());
  const auto backward = evaluate(ri, rc, rs, cfg.methods, cfg.ensembles, cfg.metric, run.sampling_failures);
  EXPECT_EQ(render_csv(forward.table), render_csv(backward.table));
}

TEST(Tautology, ViolationsReported) {
  ResultTable t;
  t.columns = {{"m", true}, {"c", false}};
  t.rows = {{"greedy", "g", RowGroup::baseline, {0.9, 0.9}},   {"sample_avg", "s", RowGroup::baseline, {0.5, 0.5}},
            {"lowerbound", "l", RowGroup::baseline, {0.2, 0.2}}, {"upperbound", "u", RowGroup::baseline, {0.8, 0.8}},
            {"bigram", "b", RowGroup::method, {0.85, 0.95}}};
  const auto v = t.tautology_violations();
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].find("bigram"), std::string::npos);
}

TEST(Report, DeterministicAndRoundTrips) {
  auto b = synthetic_backend();
  const auto items = test::synthetic_items(5);
  const auto cfg = small_config();
  const auto t1 = run_experiment(items, *b, cfg).table;
  const auto t2 = run_experiment(items, *b, cfg).table;
  EXPECT_EQ(render_csv(t1), render_csv(t2));
  EXPECT_EQ(render_text(t1), render_text(t2));
  EXPECT_EQ(t1.to_json().dump(), ResultTable::from_json(t1.to_json()).to_json().dump());

  const ResultTable parsed = parse_csv(render_csv(t1));
  ASSERT_EQ(parsed.rows.size(), t1.rows.size());
  EXPECT_EQ(parsed.columns, t1.columns);
  for (std::size_t r = 0; r < t1.rows.size(); ++r) {
    EXPECT_EQ(parsed.rows[r].key, t1.rows[r].key);
    EXPECT_EQ(parsed.rows[r].label, t1.rows[r].label);
    EXPECT_EQ(parsed.rows[r].group, t1.rows[r].group);
    for (std::size_t c = 0; c < t1.columns.size(); ++c) {
      EXPECT_NEAR(parsed.rows[r].values[c], t1.rows[r].values[c], 1e-6);
    }
  }
}

TEST(Report, TextLayout) {
  auto b = synthetic_backend();
  const auto t = run_experiment(test::synthetic_items(3), *b, small_config()).table;
  const std::string text = render_text(t);
  const auto base = text.find("baselines");
  const auto sel = text.find("question selection");
  const auto ens = text.find("ensembles");
  ASSERT_NE(base, std::string::npos);
  EXPECT_LT(base, sel);
  EXPECT_LT(sel, ens);
  EXPECT_EQ(text.rfind("Reference-based evaluation over 3 items", 0), 0u);
  EXPECT_EQ(render_csv(t).rfind("row,label,group,items,ties,no_eligible,", 0), 0u);
}

TEST(Report, BaselinesOnly) {
  auto b = synthetic_backend();
  ExperimentConfig cfg;
  const auto t = run_experiment(test::synthetic_items(3), *b, cfg).table;
  EXPECT_EQ(t.rows.size(), 4u);
  EXPECT_TRUE(t.tautology_violations().empty());
  EXPECT_EQ(render_text(t).find("ensembles"), std::string::npos);
}

TEST(Report, EmitWritesThreeFiles) {
  test::TempDir dir;
  auto b = synthetic_backend();
  const auto t = run_experiment(test::synthetic_items(2), *b, small_config()).table;
  emit_report(t, dir.path());
  EXPECT_EQ(slurp(dir.path() / "results.csv"), render_csv(t));
  EXPECT_EQ(slurp(dir.path() / "results.txt"), render_text(t));
  EXPECT_EQ(ResultTable::from_json(nlohmann::json::parse(slurp(dir.path() / "results.json"))).to_json(), t.to_json());
}

TEST(ScoreDump, RowsRoundTrip) {
  auto b = synthetic_backend();
  const auto items = test::synthetic_items(3);
  PipelineRun run;
  run_experiment(items, *b, small_config(), &run);
  std::vector<nlohmann::json> rows;
  for (const auto& s : run.scores) {
    for (auto& r : score_dump_rows(s)) rows.push_back(nlohmann::json::parse(r.dump()));
  }
  const auto back = item_scores_from_rows(rows);
  ASSERT_EQ(back.size(), run.scores.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].item_id, run.scores[i].item_id);
    ASSERT_EQ(back[i].vectors.size(), run.scores[i].vectors.size());
    for (const auto& v : run.scores[i].vectors) EXPECT_EQ(back[i].get(v.method()), v);
  }
  EXPECT_THROW(item_scores_from_rows({nlohmann::json{{"item_id", "a"}}}), FormatError);
}

TEST(Config, FromJson) {
  const auto c = ExperimentConfig::from_json({{"k", 3},
                                              {"methods", "bigram, roundtrip"},
                                              {"ensembles", {"aps+roundtrip", "bigram"}},
                                              {"metric", "rouge_l"},
                                              {"backend", "scripted"},
                                              {"script", "s.json"},
                                              {"fairytale_columns", {{"story", {"a", "b"}}, {"delimiter", "tab"}}}});
  EXPECT_EQ(c.k, 3u);
  EXPECT_EQ(c.methods, (std::vector<Method>{Method::ngram(2), Method::roundtrip()}));
  ASSERT_EQ(c.ensembles.size(), 2u);
  EXPECT_EQ(c.ensembles[1], Method::ensemble({Method::ngram(2)}));
  EXPECT_EQ(c.metric, MetricName::rouge_l);
  EXPECT_EQ(c.fairytale_columns.delimiter, '\t');
  EXPECT_EQ(c.fairytale_columns.story.size(), 2u);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(ExperimentConfig::from_json(c.to_json()).to_json(), c.to_json());
}

TEST(Config, Errors) {
  EXPECT_THROW(ExperimentConfig::from_json({{"kk", 3}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json({{"k", "three"}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json({{"methods", "quadgram"}}), ConfigError);
  EXPECT_THROW(ExperimentConfig::from_json(nlohmann::json::array()), ConfigError);

  ExperimentConfig c;
  c.k = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.temperature = 2.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.methods = {Method::parse("bigram+aps")};
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.cache_dir = "/nonexistent/qselect-cache";
  EXPECT_THROW(c.validate(), ConfigError);
  c.backend = BackendMode::scripted;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Backends, ReplayNeverNeedsNetwork) {
  test::TempDir dir;
  ExperimentConfig c;
  c.cache_dir = dir.path() / "cache";
  c.backend = BackendMode::record;
  c.script = dir.path() / "script.json";
  std::ofstream(c.script) << R"({"rules":[{"contains":"Story:","response":"Who is it?"}]})";
  auto rec = make_backend(c);
  const auto first = sample_candidates(kItem, *rec, 2, 0.7);
  c.backend = BackendMode::replay;
  c.script.clear();
  auto rep = make_backend(c);
  EXPECT_EQ(sample_candidates(kItem, *rep, 2, 0.7).candidates, first.candidates);
  const auto miss = sample_candidates(kItem, *rep, 3, 0.7);
  EXPECT_EQ(miss.failures.sampling_backend_failures, 1u);
}

TEST(FailureStatsTest, JsonRoundTrip) {
  FailureStats f;
  f.empty_generations = 1;
  f.parse_failures = 4;
  f.roundtrip_failures = 2;
  const auto j = to_json(f);
  EXPECT_EQ(j.at("total"), 7);
  EXPECT_EQ(failure_stats_from_json(j), f);
}
