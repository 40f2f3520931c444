// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include "qselect/dataset.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace qselect {

namespace {

constexpr std::array<std::string_view, 12> kAbbreviations = {
    "Mr", "Mrs", "Ms", "Dr", "St", "No", "Jr", "Sr", "Prof", "Mt", "vs", "Gen",
};

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool uppercase_at(std::string_view text, std::size_t pos) {
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  auto i = static_cast<int32_t>(pos);
  UChar32 cp = 0;
  U8_NEXT(s, i, static_cast<int32_t>(text.size()), cp);
  return cp >= 0 && u_isupper(cp);
}

bool ends_with_abbreviation(std::string_view text, std::size_t period) {
  std::size_t start = period;
  while (start > 0 && !is_ws(text[start - 1])) --start;
  std::string_view word = text.substr(start, period - start);
  while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\'')) word.remove_prefix(1);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::size_t LoadResult::rejected() const {
  return static_cast<std::size_t>(
      std::count_if(diagnostics.begin(), diagnostics.end(), [](const auto& d) { return d.rejected; }));
}

std::vector<SentenceSpan> split_sentences(std::string_view text) {
  std::vector<SentenceSpan> spans;
  std::size_t begin = 0;
  while (begin < text.size() && is_ws(text[begin])) ++begin;
  for (std::size_t i = begin; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t next = i + 1;
    while (next < text.size() && is_ws(text[next])) ++next;
    const bool at_end = next == text.size();
    const bool spaced = i + 1 < text.size() && is_ws(text[i + 1]);
    if (!at_end && !(spaced && uppercase_at(text, next))) continue;
    if (c == '.' && !at_end && ends_with_abbreviation(text, i)) continue;
    spans.push_back({begin, i + 1});
    begin = next;
    i = next == 0 ? 0 : next - 1;
  }
  std::size_t end = text.size();
  while (end > begin && is_ws(text[end - 1])) --end;
  if (end > begin) spans.push_back({begin, end});
  return spans;
}

std::size_t utf8_offset(std::string_view text, std::size_t codepoints) {
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  for (std::size_t n = 0; n < codepoints; ++n) {
    if (i >= length) return std::string_view::npos;
    U8_FWD_1(s, i, length);
  }
  return static_cast<std::size_t>(i);
}

LoadResult load_squad(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw FormatError(path.string() + ": not valid JSON");
  return parse_squad(doc, path.string());
}

LoadResult parse_squad(const nlohmann::json& doc, std::string_view source) {
  const std::string src(source);
  if (!doc.is_object() || !doc.contains("data") || !doc["data"].is_array()) {
    throw FormatError(src + ": expected a SQuAD object with a \"data\" array");
  }
  LoadResult result;
  try {
    const auto& data = doc["data"];
    for (std::size_t a = 0; a < data.size(); ++a) {
      const auto& paragraphs = data[a].at("paragraphs");
      for (std::size_t p = 0; p < paragraphs.size(); ++p) {
        const std::string context = paragraphs[p].at("context").get<std::string>();
        const auto sentences = split_sentences(context);
        const auto& qas = paragraphs[p].at("qas");
        for (std::size_t q = 0; q < qas.size(); ++q) {
          const auto& qa = qas[q];
          ++result.records_seen;
          const std::string where =
              "data[" + std::to_string(a) + "].paragraphs[" + std::to_string(p) + "].qas[" + std::to_string(q) + "]";
          std::string id = qa.contains("id") && qa["id"].is_string()
                               ? qa["id"].get<std::string>()
                               : "squad-" + std::to_string(a) + "-" + std::to_string(p) + "-" + std::to_string(q);
          const auto& answers = qa.value("answers", nlohmann::json::array());
          if (answers.empty()) {
            result.diagnostics.push_back({where, id, "no answers", true});
            continue;
          }
          const std::string answer = answers[0].at("text").get<std::string>();
          std::size_t start = std::string::npos;
          if (answers[0].contains("answer_start")) {
            start = utf8_offset(context, answers[0]["answer_start"].get<std::size_t>());
          }
          if (start == std::string::npos || context.compare(start, answer.size(), answer) != 0) {
            start = context.find(answer);
            if (start == std::string::npos || answer.empty()) {
              result.diagnostics.push_back({where, id, "answer text not found in context", true});
              continue;
            }
            result.diagnostics.push_back({where, id, "answer_start did not match; used first occurrence", false});
          }
          const std::size_t stop = start + answer.size();
          std::size_t first = sentences.size();
          std::size_t last = 0;
          for (std::size_t s = 0; s < sentences.size(); ++s) {
            if (sentences[s].end > start && sentences[s].begin < stop) {
              first = std::min(first, s);
              last = s;
            }
          }
          GenerationItem item;
          item.id = std::move(id);
          item.answer = answer;
          item.dataset_tag = DatasetTag::squad;
          item.reference_question = qa.at("question").get<std::string>();
          if (first == sentences.size()) {
            item.context = context;
          } else {
            item.context = context.substr(sentences[first].begin, sentences[last].end - sentences[first].begin);
            if (last > first) {
              result.boundary_expanded.push_back(item.id);
              result.diagnostics.push_back({where, item.id, "answer spans sentences; context expanded", false});
            }
          }
          if (auto violations = validate_item(item); !violations.empty()) {
            result.diagnostics.push_back({where, item.id, std::string(to_string(violations.front())), true});
            continue;
          }
          result.items.push_back(std::move(item));
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(src + ": " + e.what());
  }
  return result;
}

std::vector<std::vector<std::string>> parse_delimited(std::string_view text, char delimiter) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_row();
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

LoadResult load_fairytale(const std::filesystem::path& path, const FairytaleColumns& columns) {
  return parse_fairytale(read_file(path), columns, path.string());
}

LoadResult parse_fairytale(std::string_view text, const FairytaleColumns& columns, std::string_view source) {
  const std::string src(source);
  std::vector<std::vector<std::string>> rows;
  try {
    rows = parse_delimited(text, columns.delimiter);
  } catch (const FormatError& e) {
    throw FormatError(src + ": " + e.what());
  }
  if (rows.empty()) throw FormatError(src + ": missing header row");
  const auto& header = rows.front();
  auto find_column = [&](const std::string& name, bool required) -> std::ptrdiff_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw FormatError(src + ": missing required column \"" + name + "\"");
      return -1;
    }
    return it - header.begin();
  };
  std::vector<std::ptrdiff_t> story_cols;
  if (columns.story.empty()) throw FormatError(src + ": no story column configured");
  for (const auto& s : columns.story) story_cols.push_back(find_column(s, true));
  const auto q_col = find_column(columns.question, true);
  const auto a_col = find_column(columns.answer, true);
  const auto id_col = find_column(columns.id, false);

  LoadResult result;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    ++result.records_seen;
    const std::string where = "row " + std::to_string(r);
    auto cell = [&](std::ptrdiff_t c) -> std::string {
      return c >= 0 && static_cast<std::size_t>(c) < row.size() ? row[static_cast<std::size_t>(c)] : std::string();
    };
    GenerationItem item;
    item.id = id_col >= 0 && !trim(cell(id_col)).empty() ? trim(cell(id_col)) : "fairytale-" + std::to_string(r);
    for (auto c : story_cols) {
      const std::string part = cell(c);
      if (trim(part).empty()) continue;
      if (!item.context.empty()) item.context += '\n';
      item.context += part;
    }
    item.answer = cell(a_col);
    const std::string question = cell(q_col);
    if (!trim(question).empty()) item.reference_question = question;
    item.dataset_tag = DatasetTag::fairytale;
    if (auto violations = validate_item(item); !violations.empty()) {
      std::string msg;
      for (auto v : violations) msg += (msg.empty() ? "" : ", ") + std::string(to_string(v));
      result.diagnostics.push_back({where, item.id, msg, true});
      continue;
    }
    result.items.push_back(std::move(item));
  }
  return result;
}

void read_jsonl(const std::filesystem::path& path, const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FormatError(where + ": invalid JSON");
    try {
      fn(j, line_no);
    } catch (const FormatError& e) {
      throw FormatError(where + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
}

void write_jsonl(const std::vector<nlohmann::json>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& row : rows) out << row.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  if (!out) throw ConfigError("failed writing " + path.string());
}

void write_items_jsonl(const std::vector<GenerationItem>& items, const std::filesystem::path& path) {
  std::vector<nlohmann::json> rows;
  rows.reserve(items.size());
  for (const auto& item : items) rows.push_back(to_json(item));
  write_jsonl(rows, path);
}

std::vector<GenerationItem> read_items_jsonl(const std::filesystem::path& path) {
  std::vector<GenerationItem> items;
  read_jsonl(path, [&](const nlohmann::json& j, std::size_t) { items.push_back(item_from_json(j)); });
  return items;
}

void write_candidates_jsonl(const std::vector<CandidateSet>& sets, const std::filesystem::path& path) {
  std::vector<nlohmann::json> rows;
  rows.reserve(sets.size());
  for (const auto& s : sets) rows.push_back(to_json(s));
  write_jsonl(rows, path);
}

std::vector<CandidateSet> read_candidates_jsonl(const std::filesystem::path& path) {
  std::vector<CandidateSet> sets;
  read_jsonl(path, [&](const nlohmann::json& j, std::size_t) { sets.push_back(candidates_from_json(j)); });
  return sets;
}

}  // namespace qselect
