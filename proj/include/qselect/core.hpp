// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qselect/errors.hpp"

namespace qselect {

enum class DatasetTag { squad, fairytale, generic };

std::string_view to_string(DatasetTag tag);
DatasetTag parse_dataset_tag(std::string_view text);

/// One (context, answer, optional reference question) task instance.
struct GenerationItem {
  std::string id;
  std::string context;
  std::string answer;
  std::optional<std::string> reference_question;
  DatasetTag dataset_tag = DatasetTag::generic;

  bool operator==(const GenerationItem&) const = default;
};

enum class ItemViolation { empty_id, empty_context, empty_answer, answer_not_substring };

std::string_view to_string(ItemViolation v);

/// Returns every violated invariant of `item`; empty means valid.
std::vector<ItemViolation> validate_item(const GenerationItem& item);

/// The greedy question plus k sampled questions for one item.
///
/// Slots whose generation failed carry an empty sentinel and are marked in
/// `flagged`; they count towards the sampling baselines with metric value 0
/// but are never selectable.
struct CandidateSet {
  std::string item_id;
  std::string greedy;
  std::vector<std::string> sampled;
  std::size_t k = 0;
  double sampling_temperature = 0.7;
  std::vector<bool> flagged;  // aligned with `sampled`; empty means none
  bool greedy_flagged = false;

  bool is_flagged(std::size_t i) const { return i < flagged.size() && flagged[i]; }
  std::size_t eligible_count() const;
  /// Throws InvalidArgument when k, sizes or non-flagged texts are inconsistent.
  void check() const;

  bool operator==(const CandidateSet&) const = default;
};

/// The seven quality dimensions plus the overall rating, in meta-question order.
enum class Dimension {
  grammaticality,
  offensiveness,
  clarity,
  relevance,
  importance,
  specificity,
  answerability,
  overall,
};

inline constexpr std::size_t kDimensionCount = 8;

std::string_view to_string(Dimension d);
Dimension parse_dimension(std::string_view text);

enum class MethodKind { ngram, roundtrip, prompt_dimension, aps, ops, ensemble, oracle_max, oracle_min };

/// Identifies a scoring method. Ensembles carry their members and weights.
struct Method {
  MethodKind kind = MethodKind::roundtrip;
  int n = 0;                                  // ngram order
  Dimension dimension = Dimension::overall;   // prompt_dimension
  std::vector<Method> members;                // ensemble
  std::vector<double> weights;                // ensemble; empty means uniform

  static Method of(MethodKind k) {
    Method m;
    m.kind = k;
    return m;
  }
  static Method ngram(int order);
  static Method roundtrip() { return of(MethodKind::roundtrip); }
  static Method aps() { return of(MethodKind::aps); }
  static Method ops() { return of(MethodKind::ops); }
  static Method prompt_dimension(Dimension d);
  static Method oracle_max() { return of(MethodKind::oracle_max); }
  static Method oracle_min() { return of(MethodKind::oracle_min); }
  static Method ensemble(std::vector<Method> members, std::vector<double> weights = {});

  /// Parses "bigram", "ngram:3", "roundtrip", "aps", "ops", "prompt:clarity",
  /// "oracle_max", or an ensemble "bigram+aps+roundtrip" with optional
  /// "member*weight" terms.
  static Method parse(std::string_view text);

  /// Canonical identifier; parse(name()) == *this.
  std::string name() const;
  /// Human-readable row label used in reports.
  std::string label() const;

  bool needs_backend() const;
  bool is_oracle() const { return kind == MethodKind::oracle_max || kind == MethodKind::oracle_min; }

  bool operator==(const Method&) const = default;
};

/// One method's raw score per sampled candidate. Values are always finite.
class ScoreVector {
 public:
  ScoreVector(Method method, std::vector<double> values);

  const Method& method() const { return method_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const ScoreVector&) const = default;

 private:
  Method method_;
  std::vector<double> values_;
};

struct SelectionResult {
  std::size_t selected_index = 0;
  Method method;
  ScoreVector raw_scores;
  std::optional<ScoreVector> normalized_scores;
  bool tie_broken = false;
};

/// Greedy, sample mean, lowerbound and upperbound of a metric over one set.
struct BaselineStats {
  double m_greedy = 0.0;
  double m_mean = 0.0;
  double m_min = 0.0;
  double m_max = 0.0;
};

BaselineStats compute_baselines(double greedy_value, std::span<const double> sample_values);

std::string trim(std::string_view text);

// Interchange (one JSON object per line).
nlohmann::json to_json(const GenerationItem& item);
GenerationItem item_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CandidateSet& set);
CandidateSet candidates_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScoreVector& v);

}  // namespace qselect
