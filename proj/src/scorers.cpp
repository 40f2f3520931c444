// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include "qselect/scorers.hpp"

#include <atomic>

#include "qselect/metrics.hpp"
#include "qselect/parallel.hpp"
#include "qselect/textproc.hpp"

namespace qselect {

namespace {

std::size_t column(Dimension d) { return static_cast<std::size_t>(d); }

}  // namespace

double ngram_similarity(std::string_view context, std::string_view question, int n) {
  if (n < 1 || n > 5) throw InvalidArgument("n-gram order must be in [1, 5]");
  const NGramProfile q = extract_ngrams(tokenize_simple(question), n);
  if (q.size() == 0) return 0.0;
  const NGramProfile c = extract_ngrams(tokenize_simple(context), n);
  return static_cast<double>(intersection_size(c, q)) / static_cast<double>(q.size());
}

ScoreVector score_ngram(const GenerationItem& item, const CandidateSet& candidates, int n) {
  if (n < 1 || n > 5) throw InvalidArgument("n-gram order must be in [1, 5]");
  const NGramProfile c = extract_ngrams(tokenize_simple(item.context), n);
  std::vector<double> values;
  values.reserve(candidates.sampled.size());
  for (std::size_t i = 0; i < candidates.sampled.size(); ++i) {
    const NGramProfile q = extract_ngrams(tokenize_simple(candidates.sampled[i]), n);
    values.push_back(q.size() == 0 ? 0.0
                                   : static_cast<double>(intersection_size(c, q)) / static_cast<double>(q.size()));
  }
  return ScoreVector(Method::ngram(n), std::move(values));
}

AnswerSimilarity parse_answer_similarity(std::string_view text) {
  if (text == "auto" || text == "by_dataset") return AnswerSimilarity::by_dataset;
  if (text == "token_f1" || text == "f1") return AnswerSimilarity::token_f1;
  if (text == "rouge_l" || text == "rouge-l") return AnswerSimilarity::rouge_l;
  throw InvalidArgument("unknown answer similarity '" + std::string(text) + "'");
}

double answer_similarity(DatasetTag tag, std::string_view generated, std::string_view gold, AnswerSimilarity mode) {
  if (mode == AnswerSimilarity::by_dataset) {
    mode = tag == DatasetTag::squad ? AnswerSimilarity::token_f1 : AnswerSimilarity::rouge_l;
  }
  if (mode == AnswerSimilarity::token_f1) {
    return token_f1(normalize_squad(generated), normalize_squad(gold)).value;
  }
  return rouge_l(tokenize_simple(generated), tokenize_simple(gold)).value;
}

std::size_t RoundTripTrace::failures() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.failed ? 1 : 0;
  return n;
}

RoundTripResult score_roundtrip(const GenerationItem& item, const CandidateSet& candidates,
                                CompletionBackend& backend, const ScorerOptions& options) {
  if (trim(item.answer).empty()) throw InvalidArgument("round-trip scoring needs a non-empty answer");
  const std::size_t k = candidates.sampled.size();
  RoundTripTrace trace;
  trace.entries.resize(k);
  parallel_for(k, options.parallelism, [&](std::size_t i) {
    RoundTripEntry& entry = trace.entries[i];
    if (candidates.is_flagged(i)) {
      entry.skipped = true;
      return;
    }
    const CompletionRequest request = qa_request(item.context, candidates.sampled[i], options.model_id);
    entry.qa_request_fingerprint = fingerprint(request, 0);
    try {
      entry.generated_answer = backend.complete(request, 0);
      entry.answer_similarity =
          answer_similarity(item.dataset_tag, entry.generated_answer, item.answer, options.similarity);
    } catch (const BackendError& e) {
      entry.failed = true;
      entry.error = e.what();
      entry.answer_similarity = 0.0;
    }
  });
  std::vector<double> values;
  values.reserve(k);
  for (const auto& e : trace.entries) values.push_back(e.answer_similarity);
  return {ScoreVector(Method::roundtrip(), std::move(values)), std::move(trace)};
}

double PromptScoreMatrix::aps(std::size_t candidate) const {
  const auto& row = cells.at(candidate);
  double sum = 0.0;
  for (std::size_t d = 0; d < kDimensionCount; ++d) {
    if (d != column(Dimension::overall)) sum += row[d].rating;
  }
  return sum / static_cast<double>(kDimensionCount - 1);
}

int PromptScoreMatrix::ops(std::size_t candidate) const { return cells.at(candidate)[column(Dimension::overall)].rating; }

int PromptScoreMatrix::rating(std::size_t candidate, Dimension d) const { return cells.at(candidate)[column(d)].rating; }

ScoreVector PromptScoreMatrix::aps_vector() const {
  std::vector<double> v;
  for (std::size_t i = 0; i < cells.size(); ++i) v.push_back(aps(i));
  return ScoreVector(Method::aps(), std::move(v));
}

ScoreVector PromptScoreMatrix::ops_vector() const {
  std::vector<double> v;
  for (std::size_t i = 0; i < cells.size(); ++i) v.push_back(ops(i));
  return ScoreVector(Method::ops(), std::move(v));
}

ScoreVector PromptScoreMatrix::dimension_vector(Dimension d) const {
  std::vector<double> v;
  for (std::size_t i = 0; i < cells.size(); ++i) v.push_back(rating(i, d));
  return ScoreVector(Method::prompt_dimension(d), std::move(v));
}

std::size_t PromptScoreMatrix::parse_failures() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (skipped[i]) continue;
    for (const auto& cell : cells[i]) n += (cell.flagged() && !cell.backend_failed) ? 1 : 0;
  }
  return n;
}

std::size_t PromptScoreMatrix::backend_failures() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (skipped[i]) continue;
    for (const auto& cell : cells[i]) n += cell.backend_failed ? 1 : 0;
  }
  return n;
}

PromptScoreMatrix score_prompt(const GenerationItem& item, const CandidateSet& candidates, CompletionBackend& backend,
                               const ScorerOptions& options) {
  const MetaQuestionTable& metas = options.meta_questions ? *options.meta_questions : builtin_meta_questions();
  const std::size_t k = candidates.sampled.size();
  PromptScoreMatrix matrix;
  matrix.cells.resize(k);
  matrix.skipped.assign(k, false);
  for (std::size_t i = 0; i < k; ++i) matrix.skipped[i] = candidates.is_flagged(i);
  std::atomic<std::size_t> issued{0};

  parallel_for(k * metas.size(), options.parallelism, [&](std::size_t task) {
    const std::size_t i = task / metas.size();
    const MetaQuestion& meta = metas[task % metas.size()];
    ParsedRating& cell = matrix.cells[i][column(meta.dimension)];
    if (matrix.skipped[i]) return;
    try {
      const std::string step1 = build_meta_step1_prompt(item.context, candidates.sampled[i], meta);
      ++issued;
      const std::string reason = backend.complete(meta_request(step1, options.model_id), 0);
      if (trim(reason).empty()) {
        cell = ParsedRating{kFallbackRating, reason, ParseStatus::failed, false};
        return;
      }
      const std::string step2 = build_meta_step2_prompt(step1, reason, meta);
      ++issued;
      cell = parse_option_choice(backend.complete(meta_request(step2, options.model_id), 0), meta);
    } catch (const BackendError& e) {
      cell = ParsedRating{kFallbackRating, e.what(), ParseStatus::failed, true};
    }
  });
  matrix.completions_issued = issued.load();
  return matrix;
}

nlohmann::json to_json(const RoundTripTrace& trace) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : trace.entries) {
    nlohmann::json j = {{"generated_answer", e.generated_answer},
                        {"answer_similarity", e.answer_similarity},
                        {"qa_request_fingerprint", e.qa_request_fingerprint}};
    if (e.failed) j["failed"] = e.error;
    if (e.skipped) j["skipped"] = true;
    out.push_back(std::move(j));
  }
  return out;
}

nlohmann::json to_json(const PromptScoreMatrix& matrix) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < matrix.cells.size(); ++i) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t d = 0; d < kDimensionCount; ++d) {
      const auto& cell = matrix.cells[i][d];
      nlohmann::json c = {{"rating", cell.rating}, {"status", std::string(to_string(cell.parse_status))}};
      if (cell.backend_failed) c["backend_failed"] = true;
      row[std::string(to_string(static_cast<Dimension>(d)))] = std::move(c);
    }
    if (matrix.skipped[i]) row["skipped"] = true;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace qselect
