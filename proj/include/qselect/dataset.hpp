// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "qselect/core.hpp"

namespace qselect {

struct LoadDiagnostic {
  std::string where;    // "data[3].paragraphs[0].qas[2]" or "row 17"
  std::string item_id;  // empty when the record never became an item
  std::string message;
  bool rejected = false;
};

struct LoadResult {
  std::vector<GenerationItem> items;
  std::vector<LoadDiagnostic> diagnostics;
  std::size_t records_seen = 0;
  /// Items whose answer crossed a sentence boundary, so their context is a
  /// run of consecutive sentences.
  std::vector<std::string> boundary_expanded;

  std::size_t rejected() const;
};

/// Byte range [begin, end) of one sentence.
struct SentenceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// A sentence ends at ".", "!" or "?" followed by whitespace and an uppercase
/// letter, or by optional whitespace and the end of the text. A period that
/// closes a common abbreviation ("Mr.", "Dr.", "St.", "No.", ...) does not end
/// a sentence. Spans exclude the whitespace between sentences.
std::vector<SentenceSpan> split_sentences(std::string_view text);

/// Byte offset of the `codepoints`-th code point of a UTF-8 string, or npos
/// when the string is shorter.
std::size_t utf8_offset(std::string_view text, std::size_t codepoints);

/// SQuAD v1.1 JSON. Each question with at least one answer becomes an item
/// whose context is the sentence holding the first answer span.
LoadResult load_squad(const std::filesystem::path& path);
LoadResult parse_squad(const nlohmann::json& doc, std::string_view source = "<memory>");

struct FairytaleColumns {
  std::vector<std::string> story{"story"};  // joined with "\n" when several
  std::string question = "question";
  std::string answer = "answer";
  std::string id = "id";  // optional column
  char delimiter = ',';
};

/// RFC 4180 style records: quoted fields may hold delimiters, newlines and
/// doubled quotes.
std::vector<std::vector<std::string>> parse_delimited(std::string_view text, char delimiter);

LoadResult load_fairytale(const std::filesystem::path& path, const FairytaleColumns& columns = {});
LoadResult parse_fairytale(std::string_view text, const FairytaleColumns& columns, std::string_view source = "<memory>");

void write_items_jsonl(const std::vector<GenerationItem>& items, const std::filesystem::path& path);
std::vector<GenerationItem> read_items_jsonl(const std::filesystem::path& path);

void write_candidates_jsonl(const std::vector<CandidateSet>& sets, const std::filesystem::path& path);
std::vector<CandidateSet> read_candidates_jsonl(const std::filesystem::path& path);

/// Reads a JSONL file, calling fn(json, line_number) for every non-blank line.
/// Parse errors become FormatError naming the path and line.
void read_jsonl(const std::filesystem::path& path, const std::function<void(const nlohmann::json&, std::size_t)>& fn);
void write_jsonl(const std::vector<nlohmann::json>& rows, const std::filesystem::path& path);

}  // namespace qselect
