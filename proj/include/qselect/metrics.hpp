// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qselect/textproc.hpp"

namespace qselect {

enum class MetricName { bleu4, rouge_l, token_f1 };

std::string_view to_string(MetricName m);
MetricName parse_metric(std::string_view text);

/// A metric value in [0, 1] with a named breakdown. For BLEU the components
/// are p1..p4, bp, c_len and r_len; for ROUGE-L p, r and lcs; for token F1
/// p, r and overlap.
struct MetricValue {
  MetricName name = MetricName::bleu4;
  double value = 0.0;
  std::map<std::string, double> components;
  bool degenerate = false;
};

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b);

MetricValue rouge_l(const TokenSequence& candidate, const TokenSequence& reference);

enum class BleuSmoothing {
  none,
  /// For n >= 2 only, a zero clipped count becomes (0 + 1) / (total + 1).
  add_one,
};

MetricValue bleu4(const TokenSequence& candidate, std::span<const TokenSequence> references,
                  BleuSmoothing smoothing = BleuSmoothing::add_one);

struct BleuPair {
  TokenSequence candidate;
  std::vector<TokenSequence> references;
};

/// Corpus-level BLEU-4: clipped matches, candidate n-gram totals, candidate
/// lengths and reference lengths are summed over all pairs first. No smoothing.
MetricValue corpus_bleu4(std::span<const BleuPair> pairs);

MetricValue token_f1(const TokenSequence& predicted, const TokenSequence& gold);

}  // namespace qselect
