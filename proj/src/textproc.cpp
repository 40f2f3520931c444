// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include "qselect/textproc.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cstdint>
#include <utility>

#include "qselect/errors.hpp"

namespace qselect {

namespace {

void append_utf8(std::string& out, UChar32 cp) {
  char buf[U8_MAX_LENGTH];
  int32_t len = 0;
  UBool error = false;
  U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, U8_MAX_LENGTH, cp, error);
  if (!error) out.append(buf, static_cast<std::size_t>(len));
}

// Calls fn(codepoint) for each code point; invalid bytes decode as U+FFFD.
template <typename Fn>
std::size_t for_each_codepoint(std::string_view text, Fn&& fn) {
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  std::size_t count = 0;
  while (i < length) {
    UChar32 cp = 0;
    U8_NEXT(s, i, length, cp);
    if (cp < 0) cp = 0xFFFD;
    fn(cp);
    ++count;
  }
  return count;
}

bool is_ascii_punct(UChar32 cp) {
  return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) || (cp >= 0x5B && cp <= 0x60) ||
         (cp >= 0x7B && cp <= 0x7E);
}

}  // namespace

TokenSequence TokenSequence::of(std::vector<std::string> tokens) {
  TokenSequence seq;
  for (const auto& t : tokens) seq.source_len_chars += t.size();
  seq.tokens = std::move(tokens);
  return seq;
}

TokenSequence tokenize_simple(std::string_view text) {
  TokenSequence seq;
  std::string current;
  seq.source_len_chars = for_each_codepoint(text, [&](UChar32 cp) {
    if (u_isalnum(cp)) {
      append_utf8(current, u_tolower(cp));
    } else if (!current.empty()) {
      seq.tokens.push_back(std::move(current));
      current.clear();
    }
  });
  if (!current.empty()) seq.tokens.push_back(std::move(current));
  return seq;
}

TokenSequence normalize_squad(std::string_view text) {
  TokenSequence seq;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      if (current != "a" && current != "an" && current != "the") seq.tokens.push_back(current);
      current.clear();
    }
  };
  seq.source_len_chars = for_each_codepoint(text, [&](UChar32 cp) {
    if (is_ascii_punct(cp)) return;
    if (u_isUWhiteSpace(cp)) {
      flush();
    } else {
      append_utf8(current, u_tolower(cp));
    }
  });
  flush();
  return seq;
}

NGramProfile extract_ngrams(const TokenSequence& seq, int n) {
  if (n < 1) throw InvalidArgument("n-gram order must be >= 1");
  NGramProfile profile;
  profile.n = n;
  const auto order = static_cast<std::size_t>(n);
  if (seq.tokens.size() < order) return profile;
  for (std::size_t i = 0; i + order <= seq.tokens.size(); ++i) {
    profile.grams.emplace(seq.tokens.begin() + static_cast<std::ptrdiff_t>(i),
                          seq.tokens.begin() + static_cast<std::ptrdiff_t>(i + order));
  }
  return profile;
}

std::size_t intersection_size(const NGramProfile& a, const NGramProfile& b) {
  if (a.n != b.n) throw InvalidArgument("cannot intersect n-gram profiles of different orders");
  // Both sets are ordered, so a linear merge suffices.
  std::size_t count = 0;
  auto ia = a.grams.begin();
  auto ib = b.grams.begin();
  while (ia != a.grams.end() && ib != b.grams.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

std::string join_tokens(const TokenSequence& seq, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (i) out += sep;
    out += seq.tokens[i];
  }
  return out;
}

}  // namespace qselect
