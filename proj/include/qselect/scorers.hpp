// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "qselect/core.hpp"
#include "qselect/llm_backend.hpp"
#include "qselect/prompts.hpp"

namespace qselect {

/// Fraction of the question's unique n-grams that also occur in the context.
/// Zero when the question has no n-grams. Requires 1 <= n <= 5.
double ngram_similarity(std::string_view context, std::string_view question, int n);

/// Per-candidate n-gram similarity against the item's context.
ScoreVector score_ngram(const GenerationItem& item, const CandidateSet& candidates, int n);

enum class AnswerSimilarity {
  by_dataset,  // token F1 for squad, ROUGE-L otherwise
  token_f1,
  rouge_l,
};

AnswerSimilarity parse_answer_similarity(std::string_view text);

/// Similarity between a generated answer and the gold answer under `mode`.
double answer_similarity(DatasetTag tag, std::string_view generated, std::string_view gold,
                         AnswerSimilarity mode = AnswerSimilarity::by_dataset);

struct ScorerOptions {
  std::string model_id{kDefaultModelId};
  std::size_t parallelism = 1;
  AnswerSimilarity similarity = AnswerSimilarity::by_dataset;
  const MetaQuestionTable* meta_questions = nullptr;  // null means the built-in table
};

struct RoundTripEntry {
  std::string generated_answer;
  double answer_similarity = 0.0;
  std::string qa_request_fingerprint;
  bool failed = false;   // the QA call failed permanently
  bool skipped = false;  // the candidate slot was a flagged empty sentinel
  std::string error;
};

struct RoundTripTrace {
  std::vector<RoundTripEntry> entries;  // aligned with CandidateSet::sampled

  std::size_t failures() const;
};

struct RoundTripResult {
  ScoreVector scores;
  RoundTripTrace trace;
};

/// Answers every candidate with a greedy QA call and scores the answer
/// against the item's gold answer.
RoundTripResult score_roundtrip(const GenerationItem& item, const CandidateSet& candidates,
                                CompletionBackend& backend, const ScorerOptions& options = {});

/// Ratings for every candidate and meta-question. Rows follow the candidates,
/// columns follow the meta-question table (seven dimensions, then overall).
struct PromptScoreMatrix {
  std::vector<std::array<ParsedRating, kDimensionCount>> cells;
  std::vector<bool> skipped;  // flagged sentinel rows, never sent to the backend
  std::size_t completions_issued = 0;

  /// Mean rating over the seven quality dimensions, in [1, 3].
  double aps(std::size_t candidate) const;
  /// Rating of the overall meta-question, in {1, 2, 3}.
  int ops(std::size_t candidate) const;
  int rating(std::size_t candidate, Dimension d) const;

  ScoreVector aps_vector() const;
  ScoreVector ops_vector() const;
  ScoreVector dimension_vector(Dimension d) const;

  std::size_t parse_failures() const;
  std::size_t backend_failures() const;
};

/// Two-step meta-question scoring: an open answer with a reason, then a
/// choice among the three options. Both calls are greedy.
PromptScoreMatrix score_prompt(const GenerationItem& item, const CandidateSet& candidates, CompletionBackend& backend,
                               const ScorerOptions& options = {});

nlohmann::json to_json(const RoundTripTrace& trace);
nlohmann::json to_json(const PromptScoreMatrix& matrix);

}  // namespace qselect
