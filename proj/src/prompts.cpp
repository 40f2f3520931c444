// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include "qselect/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace qselect {

namespace {

// Texts and options are kept exactly as the human-evaluation form words
// them, including "gramatically" and "Is is very clear".
constexpr std::string_view kBuiltinTsv =
    "# index\tdimension\ttext\toption 1\toption 2\toption 3\n"
    "1\tgrammaticality\tIs the question gramatically correct?\tIt is grammatically incorrect\t"
    "It has some grammatical issues\tIt is grammatically correct\n"
    "2\toffensiveness\tIs the question offensive to people?\tIt is very offensive\tIt may be offensive\t"
    "It is not at all offensive\n"
    "3\tclarity\tIs the question clear?\tIt is not at all clear\tIt is mostly clear\tIs is very clear\n"
    "4\trelevance\tIs the question related to the context of the attached document?\t"
    "It is not at all related\tIt is somewhat related\tIt is closely related\n"
    "5\timportance\tIs the question asking about an important aspect of the context of the attached document?\t"
    "Not at all important\tIt may be important\tIt is very important\n"
    "6\tspecificity\tIs the question asking about a specific piece of information in the attached document?\t"
    "The question is very generic\tThe question is somewhat generic\tThe question is very specific\n"
    "7\tanswerability\tCan the question be answered using information in the attached document?\t"
    "No, answering the question requires completely different information\t"
    "The question can be partially answered using information from the document\t"
    "The question can be perfectly answered using information from the document\n"
    "8\toverall\tWhat is your overall rating of the question generated based on the attached document?\t"
    "The question is very bad\tThe question is okay\tThe question is very good\n";

void require_nonempty(std::string_view value, const char* what) {
  if (trim(value).empty()) throw InvalidArgument(std::string(what) + " must be non-empty");
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c); });
  return out;
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    fields.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

}  // namespace

std::string_view builtin_meta_question_tsv() { return kBuiltinTsv; }

const MetaQuestionTable& builtin_meta_questions() {
  static const MetaQuestionTable table = parse_meta_questions(kBuiltinTsv, "<builtin>");
  return table;
}

MetaQuestionTable parse_meta_questions(std::string_view tsv, std::string_view source) {
  MetaQuestionTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= tsv.size()) {
    auto eol = tsv.find('\n', pos);
    if (eol == std::string_view::npos) eol = tsv.size();
    std::string_view line = tsv.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || line.front() == '#') continue;
    const auto where = std::string(source) + ":" + std::to_string(line_no);
    auto fields = split_tabs(line);
    if (fields.size() != 6) throw FormatError(where + ": expected 6 tab-separated fields");
    MetaQuestion meta;
    try {
      meta.index = std::stoi(fields[0]);
      meta.dimension = parse_dimension(fields[1]);
    } catch (const std::exception&) {
      throw FormatError(where + ": bad index or dimension");
    }
    meta.text = fields[2];
    for (std::size_t i = 0; i < 3; ++i) {
      if (trim(fields[3 + i]).empty()) throw FormatError(where + ": empty option");
      meta.options[i] = fields[3 + i];
    }
    if (trim(meta.text).empty()) throw FormatError(where + ": empty meta-question text");
    table.push_back(std::move(meta));
  }
  if (table.size() != kDimensionCount) {
    throw FormatError(std::string(source) + ": expected 8 meta-questions, found " + std::to_string(table.size()));
  }
  std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].index != static_cast<int>(i + 1)) {
      throw FormatError(std::string(source) + ": meta-question indices must be 1..8");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (table[j].dimension == table[i].dimension) {
        throw FormatError(std::string(source) + ": duplicate dimension " + std::string(to_string(table[i].dimension)));
      }
    }
  }
  if (table.back().dimension != Dimension::overall) {
    throw FormatError(std::string(source) + ": meta-question 8 must be the overall rating");
  }
  return table;
}

MetaQuestionTable load_meta_questions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open meta-question table " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_meta_questions(buf.str(), path.string());
}

const MetaQuestion& meta_for(const MetaQuestionTable& table, Dimension d) {
  for (const auto& m : table) {
    if (m.dimension == d) return m;
  }
  throw InvalidArgument("meta-question table has no " + std::string(to_string(d)) + " row");
}

QgPrompt build_qg_prompt(std::string_view context, std::string_view answer) {
  require_nonempty(context, "context");
  require_nonempty(answer, "answer");
  QgPrompt p;
  p.prefix = "Story:\n";
  p.prefix += context;
  p.prefix += "\nInstruction:\nRead the above story, ask a question and answer it.\nQuestion:\n";
  p.suffix = "\nAnswer:\n";
  p.suffix += answer;
  return p;
}

std::string build_qa_prompt(std::string_view context, std::string_view question) {
  require_nonempty(context, "context");
  require_nonempty(question, "question");
  std::string p = "[Document]:\n";
  p += context;
  p += "\n\n[Question]:\n";
  p += question;
  p += "\n\n[Answer]:\n";
  return p;
}

std::string build_meta_step1_prompt(std::string_view context, std::string_view question, const MetaQuestion& meta) {
  require_nonempty(context, "context");
  require_nonempty(question, "question");
  std::string p(kMetaStep1Instruction);
  p += "\n\n[Document]:\n";
  p += context;
  p += "\n\n[Question]:\n";
  p += question;
  p += "\n\n[Meta-question]:\n";
  p += meta.text;
  p += "\n\n[Answer and reason]:\n";
  return p;
}

std::string build_meta_step2_prompt(std::string_view step1_prompt, std::string_view step1_response,
                                    const MetaQuestion& meta) {
  require_nonempty(step1_response, "step-1 response");
  std::string p(step1_prompt);
  p += step1_response;
  p += "\n\n";
  p += meta.text;
  p += '\n';
  for (std::size_t i = 0; i < meta.options.size(); ++i) {
    p += std::to_string(i + 1) + ") " + meta.options[i] + "\n";
  }
  p += "\nReply with exactly one of the options above.\n[Option]:\n";
  return p;
}

std::string_view to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::exact:
      return "exact";
    case ParseStatus::fuzzy:
      return "fuzzy";
    case ParseStatus::failed:
      return "failed";
  }
  return "failed";
}

ParsedRating parse_option_choice(std::string_view response, const MetaQuestion& meta) {
  ParsedRating out;
  out.raw_response = std::string(response);
  const std::string text = trim(response);
  // Leading option number: "3)", "3.", "3:" or a bare digit.
  if (!text.empty() && text[0] >= '1' && text[0] <= '3') {
    const bool bare = text.size() == 1;
    const char next = bare ? '\0' : text[1];
    if (bare || next == ')' || next == '.' || next == ':' || next == ' ' || next == '\t' || next == '\n') {
      out.rating = text[0] - '0';
      out.parse_status = ParseStatus::exact;
      return out;
    }
  }
  const std::string haystack = lower_ascii(text);
  int found = 0;
  int matches = 0;
  for (std::size_t i = 0; i < meta.options.size(); ++i) {
    if (haystack.find(lower_ascii(meta.options[i])) != std::string::npos) {
      found = static_cast<int>(i + 1);
      ++matches;
    }
  }
  if (matches == 1) {
    out.rating = found;
    out.parse_status = ParseStatus::fuzzy;
  }
  return out;
}

std::string parse_generated_question(std::string_view response) {
  std::string text = trim(response);
  if (text.empty()) throw EmptyGeneration("model returned an empty question");
  if (const auto q = text.find('?'); q != std::string::npos) {
    text.resize(q + 1);
  } else {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      line = trim(line);
      if (!line.empty()) break;
    }
    text = line;
  }
  std::string out;
  bool pending_space = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n' || c == '\r') {
      // Drop horizontal whitespace already emitted before the break.
      while (!out.empty() && (out.back() == ' ' || out.back() == '\t')) out.pop_back();
      pending_space = true;
      while (i + 1 < text.size() && (text[i + 1] == ' ' || text[i + 1] == '\t' || text[i + 1] == '\n' ||
                                     text[i + 1] == '\r')) {
        ++i;
      }
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += c;
  }
  out = trim(out);
  if (out.empty()) throw EmptyGeneration("model returned an empty question");
  return out;
}

CompletionRequest qg_request(const GenerationItem& item, double temperature, std::string_view model_id) {
  const QgPrompt p = build_qg_prompt(item.context, item.answer);
  CompletionRequest r;
  r.prefix = p.prefix;
  r.suffix = p.suffix;
  r.temperature = temperature;
  r.max_tokens = kQuestionMaxTokens;
  r.logical_model_id = std::string(model_id);
  return r;
}

CompletionRequest qa_request(std::string_view context, std::string_view question, std::string_view model_id) {
  CompletionRequest r;
  r.prefix = build_qa_prompt(context, question);
  r.temperature = 0.0;
  r.max_tokens = kQaMaxTokens;
  r.stop_sequences = {"\n\n"};
  r.logical_model_id = std::string(model_id);
  return r;
}

CompletionRequest meta_request(std::string prompt, std::string_view model_id) {
  CompletionRequest r;
  r.prefix = std::move(prompt);
  r.temperature = 0.0;
  r.max_tokens = kMetaMaxTokens;
  r.logical_model_id = std::string(model_id);
  return r;
}

}  // namespace qselect
