// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace qselect {

/// Tokens of one text. No token is empty or contains whitespace.
struct TokenSequence {
  std::vector<std::string> tokens;
  std::size_t source_len_chars = 0;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }

  static TokenSequence of(std::vector<std::string> tokens);
  bool operator==(const TokenSequence&) const = default;
};

using NGram = std::vector<std::string>;

/// The set of unique contiguous n-token windows of a sequence.
struct NGramProfile {
  int n = 1;
  std::set<NGram> grams;

  std::size_t size() const { return grams.size(); }
  bool contains(const NGram& g) const { return grams.count(g) != 0; }
};

/// Lowercases and splits on every maximal run of characters that are not
/// Unicode letters or digits.
TokenSequence tokenize_simple(std::string_view text);

/// SQuAD answer normalization: lowercase, strip ASCII punctuation, drop the
/// articles "a", "an", "the", split on whitespace.
TokenSequence normalize_squad(std::string_view text);

/// Throws InvalidArgument when n == 0.
NGramProfile extract_ngrams(const TokenSequence& seq, int n);

/// Size of the intersection of two profiles of the same order.
std::size_t intersection_size(const NGramProfile& a, const NGramProfile& b);

std::string join_tokens(const TokenSequence& seq, std::string_view sep = " ");

}  // namespace qselect
