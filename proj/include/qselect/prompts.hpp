// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qselect/core.hpp"
#include "qselect/llm_backend.hpp"

namespace qselect {

/// A question about the quality of a generated question, rated on three options.
struct MetaQuestion {
  int index = 0;  // 1..8
  Dimension dimension = Dimension::overall;
  std::string text;
  std::array<std::string, 3> options;

  bool operator==(const MetaQuestion&) const = default;
};

/// The eight meta-questions in index order. Exactly eight rows, indices 1..8,
/// one per dimension.
using MetaQuestionTable = std::vector<MetaQuestion>;

/// Tab-separated text shipped inside the library:
/// index, dimension, text, option 1, option 2, option 3.
std::string_view builtin_meta_question_tsv();
const MetaQuestionTable& builtin_meta_questions();

/// Parses a user-supplied table in the same format. '#' lines and blank
/// lines are ignored. Throws FormatError naming the offending line.
MetaQuestionTable parse_meta_questions(std::string_view tsv, std::string_view source = "<memory>");
MetaQuestionTable load_meta_questions(const std::filesystem::path& path);

const MetaQuestion& meta_for(const MetaQuestionTable& table, Dimension d);

struct QgPrompt {
  std::string prefix;
  std::string suffix;
};

/// Insert-mode question generation prompt: the model fills the gap between
/// "Question:" and the answer.
QgPrompt build_qg_prompt(std::string_view context, std::string_view answer);

std::string build_qa_prompt(std::string_view context, std::string_view question);

inline constexpr std::string_view kMetaStep1Instruction =
    "Read the document and the question below, then answer the following and explain your reason.";

/// Open-ended step: the meta-question without its options.
std::string build_meta_step1_prompt(std::string_view context, std::string_view question, const MetaQuestion& meta);

/// Multiple-choice step: the step-1 exchange followed by the numbered options.
std::string build_meta_step2_prompt(std::string_view step1_prompt, std::string_view step1_response,
                                    const MetaQuestion& meta);

enum class ParseStatus { exact, fuzzy, failed };

std::string_view to_string(ParseStatus s);

inline constexpr int kFallbackRating = 2;

struct ParsedRating {
  int rating = kFallbackRating;  // always in {1, 2, 3}
  std::string raw_response;
  ParseStatus parse_status = ParseStatus::failed;
  bool backend_failed = false;

  bool flagged() const { return parse_status == ParseStatus::failed; }
};

ParsedRating parse_option_choice(std::string_view response, const MetaQuestion& meta);

/// Trims, keeps text through the first '?' (or the first non-empty line),
/// and folds newlines into spaces. Throws EmptyGeneration on blank input.
std::string parse_generated_question(std::string_view response);

// Generation defaults.
inline constexpr int kQuestionMaxTokens = 64;
inline constexpr int kMetaMaxTokens = 64;
inline constexpr int kQaMaxTokens = 128;
inline constexpr double kSamplingTemperature = 0.7;

CompletionRequest qg_request(const GenerationItem& item, double temperature,
                             std::string_view model_id = kDefaultModelId);
CompletionRequest qa_request(std::string_view context, std::string_view question,
                             std::string_view model_id = kDefaultModelId);
CompletionRequest meta_request(std::string prompt, std::string_view model_id = kDefaultModelId);

}  // namespace qselect
