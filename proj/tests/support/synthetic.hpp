// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic stand-in for a completion model. Responses depend only on
// the request text and sample index, so recorded caches are reproducible.

#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qselect/core.hpp"
#include "qselect/harness.hpp"
#include "qselect/llm_backend.hpp"
#include "qselect/prompts.hpp"
#include "qselect/textproc.hpp"

namespace qselect::test {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string between(std::string_view text, std::string_view open, std::string_view close) {
  const auto a = text.find(open);
  if (a == std::string_view::npos) return {};
  const auto start = a + open.size();
  const auto b = text.find(close, start);
  return std::string(text.substr(start, b == std::string_view::npos ? std::string_view::npos : b - start));
}

inline std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '\'') {
      cur += c;
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
  return s;
}

/// Twenty short stories with answers and reference questions.
inline std::vector<GenerationItem> synthetic_items(std::size_t n = 20) {
  static const char* animals[] = {"fox", "owl", "bear", "hare", "wolf", "crow", "deer", "mole", "frog", "lynx"};
  static const char* places[] = {"river", "mill", "forest", "castle", "meadow", "cave", "village", "lake"};
  static const char* things[] = {"golden key", "silver ring", "old map", "red lantern", "wooden box", "green stone"};
  std::vector<GenerationItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string a = animals[i % 10];
    const std::string p = places[(i * 3) % 8];
    const std::string t = things[(i * 5) % 6];
    GenerationItem item;
    char id[32];
    std::snprintf(id, sizeof id, "item-%02zu", i + 1);
    item.id = id;
    item.context = "The " + a + " lived near the " + p + ". One morning the " + a + " found a " + t +
                   " under a tree. It carried the " + t + " home to show the king.";
    item.answer = "a " + t;
    item.reference_question = "What did the " + a + " find under a tree?";
    item.dataset_tag = i % 2 == 0 ? DatasetTag::squad : DatasetTag::fairytale;
    items.push_back(std::move(item));
  }
  return items;
}

inline std::optional<std::string> synthetic_response(const CompletionRequest& r, std::size_t index) {
  const std::uint64_t h = fnv1a(r.prefix, fnv1a(std::to_string(index) + "/" + std::to_string(r.temperature)));
  if (r.suffix) {
    const std::vector<std::string> ctx = words(between(r.prefix, "Story:\n", "\nInstruction:"));
    if (ctx.empty()) return std::string("What happened?");
    // A rare blank reply exercises the empty-generation retry.
    if (index < kRetrySampleOffset && h % 23 == 0) return std::string("  \n");
    static const char* heads[] = {"What did the", "Where did the", "Why did the", "Who saw the", "What"};
    const std::size_t len = 2 + (h >> 8) % 5;
    // Every third question opens like the reference ("What did the <animal> ...").
    const bool anchored = (h >> 24) % 3 == 0;
    const std::size_t start = anchored ? 1 : (h >> 16) % ctx.size();
    std::string q = anchored ? heads[0] : heads[(h >> 4) % 5];
    for (std::size_t i = 0; i < len; ++i) q += " " + lower(ctx[(start + i) % ctx.size()]);
    return q + "?\nAnswer: something";
  }
  if (r.prefix.rfind("[Document]:", 0) == 0) {
    const std::vector<std::string> doc = words(between(r.prefix, "[Document]:\n", "\n\n[Question]:"));
    const std::vector<std::string> q = words(between(r.prefix, "[Question]:\n", "\n\n[Answer]:"));
    for (auto it = q.rbegin(); it != q.rend(); ++it) {
      for (std::size_t i = 0; i + 2 < doc.size(); ++i) {
        if (lower(doc[i]) == lower(*it)) return doc[i + 1] + " " + doc[i + 2];
      }
    }
    return std::string("I do not know.");
  }
  if (r.prefix.rfind(kMetaStep1Instruction, 0) == 0) {
    if (r.prefix.find("[Option]:\n") == std::string::npos) {
      return std::string("Mostly yes, because the question refers to the story.");
    }
    if (h % 13 == 0) return std::string("Hard to say.");
    const int n = 1 + static_cast<int>(h % 3);
    const std::string line = std::to_string(n) + ") ";
    return line + between(r.prefix, "\n" + line, "\n");
  }
  return std::nullopt;
}

}  // namespace qselect::test
