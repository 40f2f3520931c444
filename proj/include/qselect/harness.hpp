// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qselect/core.hpp"
#include "qselect/dataset.hpp"
#include "qselect/ensemble.hpp"
#include "qselect/llm_backend.hpp"
#include "qselect/metrics.hpp"
#include "qselect/prompts.hpp"
#include "qselect/scorers.hpp"

namespace qselect {

enum class BackendMode { live, record, replay, scripted };

std::string_view to_string(BackendMode mode);
BackendMode parse_backend_mode(std::string_view text);

struct ExperimentConfig {
  std::filesystem::path dataset;
  DatasetTag tag = DatasetTag::generic;
  std::size_t k = 5;
  double temperature = kSamplingTemperature;
  std::vector<Method> methods;
  std::vector<Method> ensembles;
  MetricName metric = MetricName::bleu4;
  BackendMode backend = BackendMode::replay;
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path out_dir = "out";
  std::filesystem::path script;          // scripted mode, and the record source when no live key is wanted
  std::filesystem::path meta_questions;  // optional table override
  std::size_t parallelism = 1;
  double rpm = 20.0;
  std::string model_id{kDefaultModelId};
  AnswerSimilarity similarity = AnswerSimilarity::by_dataset;
  FairytaleColumns fairytale_columns;
  RetryPolicy retry;

  /// Throws ConfigError on k == 0, a bad temperature, an ensemble among
  /// single methods (or vice versa), or replay without a cache directory.
  void validate() const;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Builds the backend stack for `config.backend`: rate limit and retry wrap
/// the live client; record and replay go through a ReplayStore under
/// `config.cache_dir`. Replay never constructs a network client.
std::shared_ptr<CompletionBackend> make_backend(const ExperimentConfig& config);

struct FailureStats {
  std::size_t empty_generations = 0;      // sampled or greedy slots with no usable question
  std::size_t sampling_backend_failures = 0;
  std::size_t roundtrip_failures = 0;     // QA calls that failed permanently
  std::size_t parse_failures = 0;         // meta-question cells that fell back to rating 2
  std::size_t prompt_backend_failures = 0;

  std::size_t backend_failures() const {
    return sampling_backend_failures + roundtrip_failures + prompt_backend_failures;
  }
  std::size_t total() const { return empty_generations + backend_failures() + parse_failures; }
  FailureStats& operator+=(const FailureStats& o);
  bool operator==(const FailureStats&) const = default;
};

nlohmann::json to_json(const FailureStats& f);
FailureStats failure_stats_from_json(const nlohmann::json& j);

/// Sample indices used when an empty generation is retried once.
inline constexpr std::size_t kRetrySampleOffset = 1000;

struct SamplingOptions {
  std::string model_id{kDefaultModelId};
};

struct SampleOutcome {
  CandidateSet candidates;
  FailureStats failures;
};

/// k insert-mode completions at `temperature` (sample indices 0..k-1) plus
/// one greedy completion. Empty generations are retried once; slots that
/// still fail hold a flagged empty sentinel.
SampleOutcome sample_candidates(const GenerationItem& item, CompletionBackend& backend, std::size_t k,
                                double temperature, const SamplingOptions& options = {});

/// Scores of every base method for one item.
struct ItemScores {
  std::string item_id;
  std::vector<ScoreVector> vectors;
  std::optional<RoundTripTrace> roundtrip;
  std::optional<PromptScoreMatrix> prompt;
  FailureStats failures;  // scorer-side failures only

  const ScoreVector& get(const Method& m) const;
  bool has(const Method& m) const;
};

/// Methods that need a score vector: the single methods plus every ensemble
/// member, deduplicated in first-seen order. Oracles are excluded.
std::vector<Method> base_methods(const std::vector<Method>& methods, const std::vector<Method>& ensembles);

ItemScores score_item(const GenerationItem& item, const CandidateSet& candidates, const std::vector<Method>& methods,
                      CompletionBackend* backend, const ScorerOptions& options = {});

/// Dump rows, one per (item, method): {"item_id", "method", "values", "trace"?, "ratings"?, "flags"}.
std::vector<nlohmann::json> score_dump_rows(const ItemScores& scores);
/// Regroups dump rows by item id, preserving first-seen order.
std::vector<ItemScores> item_scores_from_rows(const std::vector<nlohmann::json>& rows);

/// Per-candidate reference metric values (flagged slots score 0).
std::vector<double> candidate_metric_values(const CandidateSet& candidates, std::string_view reference,
                                            MetricName metric);
double metric_value(std::string_view candidate, std::string_view reference, MetricName metric);

/// Runs a single method or an ensemble on one item. Oracles need
/// `metric_values`. Returns nullopt when no candidate is eligible.
std::optional<SelectionResult> select_for_item(const Method& method, const ItemScores& scores,
                                               const CandidateSet& candidates,
                                               const std::vector<double>* metric_values = nullptr);

struct SelectionRecord {
  std::string item_id;
  Method method;
  std::optional<SelectionResult> result;
  std::string selected_question;
};

nlohmann::json to_json(const SelectionRecord& record);

enum class RowGroup { baseline, method, ensemble };

std::string_view to_string(RowGroup g);

struct ResultRow {
  std::string key;
  std::string label;
  RowGroup group = RowGroup::method;
  std::vector<double> values;  // aligned with ResultTable::columns
  std::size_t items = 0;
  std::size_t ties = 0;
  std::size_t no_eligible = 0;
};

struct ResultColumn {
  std::string name;
  /// Mean of per-item values. Only these columns are bounded by the
  /// lowerbound and upperbound rows; corpus-level BLEU is not decomposable.
  bool per_item_mean = true;

  bool operator==(const ResultColumn&) const = default;
};

struct ResultTable {
  std::vector<ResultColumn> columns;
  std::vector<ResultRow> rows;
  std::size_t items = 0;
  FailureStats failures;

  const ResultRow& row(std::string_view key) const;
  std::size_t column(std::string_view name) const;

  /// Verifies lowerbound <= sample avg <= upperbound and
  /// lowerbound <= method <= upperbound on every per-item-mean column.
  /// Returns the list of violations (empty when all hold).
  std::vector<std::string> tautology_violations(double tolerance = 1e-12) const;

  nlohmann::json to_json() const;
  static ResultTable from_json(const nlohmann::json& j);
};

inline constexpr std::string_view kRowGreedy = "greedy";
inline constexpr std::string_view kRowSampleAvg = "sample_avg";
inline constexpr std::string_view kRowLowerbound = "lowerbound";
inline constexpr std::string_view kRowUpperbound = "upperbound";

/// Thrown by evaluation when items lack reference questions.
class MissingReferences : public FormatError {
 public:
  explicit MissingReferences(std::vector<std::string> ids);
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
};

struct EvaluationOutput {
  ResultTable table;
  std::vector<SelectionRecord> selections;
};

/// Selects with every method and ensemble, scores the selections against
/// the reference questions, and folds items (ordered by id) into a table.
/// BLEU-4 yields a sentence-mean and a corpus column; ROUGE-L a mean column.
EvaluationOutput evaluate(const std::vector<GenerationItem>& items, const std::vector<CandidateSet>& candidates,
                          const std::vector<ItemScores>& scores, const std::vector<Method>& methods,
                          const std::vector<Method>& ensembles, MetricName metric,
                          const FailureStats& sampling_failures = {});

/// Selections without reference evaluation (oracles are skipped).
std::vector<SelectionRecord> select_all(const std::vector<CandidateSet>& candidates,
                                        const std::vector<ItemScores>& scores, const std::vector<Method>& methods,
                                        const std::vector<Method>& ensembles);

struct PipelineRun {
  std::vector<CandidateSet> candidates;
  std::vector<ItemScores> scores;
  FailureStats sampling_failures;
};

std::vector<SampleOutcome> generate_all(const std::vector<GenerationItem>& items, CompletionBackend& backend,
                                        const ExperimentConfig& config);
std::vector<ItemScores> score_all(const std::vector<GenerationItem>& items,
                                  const std::vector<CandidateSet>& candidates, CompletionBackend* backend,
                                  const ExperimentConfig& config, const MetaQuestionTable* metas = nullptr);

/// Generation, scoring and evaluation in memory.
EvaluationOutput run_experiment(const std::vector<GenerationItem>& items, CompletionBackend& backend,
                                const ExperimentConfig& config, PipelineRun* run = nullptr);

// Reports.
std::string render_csv(const ResultTable& table);
std::string render_text(const ResultTable& table);
/// Parses render_csv output back into a table (labels, groups, values).
ResultTable parse_csv(std::string_view csv);
/// Writes results.csv, results.txt and results.json under `out_dir`.
void emit_report(const ResultTable& table, const std::filesystem::path& out_dir);

}  // namespace qselect
