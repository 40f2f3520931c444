// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include "qselect/core.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <utility>

namespace qselect {

namespace {

constexpr std::array<std::string_view, kDimensionCount> kDimensionNames = {
    "grammaticality", "offensiveness", "clarity",       "relevance",
    "importance",     "specificity",   "answerability", "overall",
};

constexpr std::array<std::string_view, 5> kNgramNames = {"unigram", "bigram", "trigram", "4gram",
                                                         "5gram"};
constexpr std::array<std::string_view, 5> kNgramLabels = {"uni-gram", "bi-gram", "tri-gram",
                                                          "4-gram", "5-gram"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

double parse_weight(std::string_view text) {
  double w = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), w);
  if (ec != std::errc() || ptr != text.data() + text.size() || !(w > 0.0) || !std::isfinite(w)) {
    throw InvalidArgument("invalid ensemble weight '" + std::string(text) + "'");
  }
  return w;
}

Method parse_single(std::string_view raw) {
  const std::string text = lower_ascii(trim(raw));
  for (std::size_t i = 0; i < kNgramNames.size(); ++i) {
    if (text == kNgramNames[i] || text == kNgramLabels[i]) return Method::ngram(static_cast<int>(i + 1));
  }
  if (text.starts_with("ngram:")) {
    int n = 0;
    auto tail = std::string_view(text).substr(6);
    auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), n);
    if (ec != std::errc() || ptr != tail.data() + tail.size()) {
      throw InvalidArgument("invalid n-gram order in '" + text + "'");
    }
    return Method::ngram(n);
  }
  if (text == "roundtrip" || text == "round-trip") return Method::roundtrip();
  if (text == "aps") return Method::aps();
  if (text == "ops") return Method::ops();
  if (text == "oracle_max" || text == "oracle-max") return Method::oracle_max();
  if (text == "oracle_min" || text == "oracle-min") return Method::oracle_min();
  if (text.starts_with("prompt:")) return Method::prompt_dimension(parse_dimension(text.substr(7)));
  throw InvalidArgument("unknown method '" + std::string(raw) + "'");
}

}  // namespace

std::string trim(std::string_view text) {
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && is_space(text[b])) ++b;
  while (e > b && is_space(text[e - 1])) --e;
  return std::string(text.substr(b, e - b));
}

std::string_view to_string(DatasetTag tag) {
  switch (tag) {
    case DatasetTag::squad:
      return "squad";
    case DatasetTag::fairytale:
      return "fairytale";
    case DatasetTag::generic:
      return "generic";
  }
  return "generic";
}

DatasetTag parse_dataset_tag(std::string_view text) {
  const std::string t = lower_ascii(trim(text));
  if (t == "squad") return DatasetTag::squad;
  if (t == "fairytale" || t == "fairytaleqa") return DatasetTag::fairytale;
  if (t == "generic") return DatasetTag::generic;
  throw InvalidArgument("unknown dataset tag '" + std::string(text) + "'");
}

std::string_view to_string(ItemViolation v) {
  switch (v) {
    case ItemViolation::empty_id:
      return "empty-id";
    case ItemViolation::empty_context:
      return "empty-context";
    case ItemViolation::empty_answer:
      return "empty-answer";
    case ItemViolation::answer_not_substring:
      return "answer-not-substring";
  }
  return "unknown";
}

std::vector<ItemViolation> validate_item(const GenerationItem& item) {
  std::vector<ItemViolation> out;
  if (trim(item.id).empty()) out.push_back(ItemViolation::empty_id);
  const bool context_empty = trim(item.context).empty();
  const bool answer_empty = trim(item.answer).empty();
  if (context_empty) out.push_back(ItemViolation::empty_context);
  if (answer_empty) out.push_back(ItemViolation::empty_answer);
  if (item.dataset_tag == DatasetTag::squad && !context_empty && !answer_empty &&
      item.context.find(item.answer) == std::string::npos) {
    out.push_back(ItemViolation::answer_not_substring);
  }
  return out;
}

std::size_t CandidateSet::eligible_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    if (!is_flagged(i)) ++n;
  }
  return n;
}

void CandidateSet::check() const {
  if (k < 1) throw InvalidArgument("candidate set '" + item_id + "': k must be >= 1");
  if (sampled.size() != k) {
    throw InvalidArgument("candidate set '" + item_id + "': expected " + std::to_string(k) +
                          " sampled questions, got " + std::to_string(sampled.size()));
  }
  if (!flagged.empty() && flagged.size() != k) {
    throw InvalidArgument("candidate set '" + item_id + "': flag vector length mismatch");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!is_flagged(i) && trim(sampled[i]).empty()) {
      throw InvalidArgument("candidate set '" + item_id + "': sampled question " + std::to_string(i) +
                            " is empty");
    }
  }
  if (!greedy_flagged && trim(greedy).empty()) {
    throw InvalidArgument("candidate set '" + item_id + "': greedy question is empty");
  }
}

std::string_view to_string(Dimension d) { return kDimensionNames[static_cast<std::size_t>(d)]; }

Dimension parse_dimension(std::string_view text) {
  const std::string t = lower_ascii(trim(text));
  for (std::size_t i = 0; i < kDimensionNames.size(); ++i) {
    if (t == kDimensionNames[i]) return static_cast<Dimension>(i);
  }
  throw InvalidArgument("unknown quality dimension '" + std::string(text) + "'");
}

Method Method::ngram(int order) {
  if (order < 1 || order > 5) {
    throw InvalidArgument("n-gram order must be in [1, 5], got " + std::to_string(order));
  }
  Method m = of(MethodKind::ngram);
  m.n = order;
  return m;
}

Method Method::prompt_dimension(Dimension d) {
  Method m = of(MethodKind::prompt_dimension);
  m.dimension = d;
  return m;
}

Method Method::ensemble(std::vector<Method> members, std::vector<double> weights) {
  if (members.empty()) throw InvalidArgument("ensemble needs at least one member");
  if (!weights.empty() && weights.size() != members.size()) {
    throw InvalidArgument("ensemble weights must align with members");
  }
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (members[i].kind == MethodKind::ensemble) throw InvalidArgument("nested ensembles are not supported");
    if (members[i].is_oracle()) throw InvalidArgument("oracle methods cannot be ensemble members");
    for (std::size_t j = 0; j < i; ++j) {
      if (members[i] == members[j]) throw InvalidArgument("duplicate ensemble member " + members[i].name());
    }
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("ensemble weights must be positive");
  }
  // Uniform weights are stored as empty so "a+b" and "a*1+b*1" compare equal.
  if (!weights.empty() && std::all_of(weights.begin(), weights.end(), [&](double w) { return w == weights[0]; })) {
    weights.clear();
  }
  Method m = of(MethodKind::ensemble);
  m.members = std::move(members);
  m.weights = std::move(weights);
  return m;
}

Method Method::parse(std::string_view text) {
  if (text.find('+') == std::string_view::npos && text.find('*') == std::string_view::npos) {
    return parse_single(text);
  }
  std::vector<Method> members;
  std::vector<double> weights;
  bool any_weight = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('+', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view term = text.substr(start, end - start);
    const auto star = term.find('*');
    if (star != std::string_view::npos) {
      members.push_back(parse_single(term.substr(0, star)));
      weights.push_back(parse_weight(trim(term.substr(star + 1))));
      any_weight = true;
    } else {
      members.push_back(parse_single(term));
      weights.push_back(1.0);
    }
    start = end + 1;
  }
  return ensemble(std::move(members), any_weight ? std::move(weights) : std::vector<double>{});
}

std::string Method::name() const {
  switch (kind) {
    case MethodKind::ngram:
      return std::string(kNgramNames[static_cast<std::size_t>(n - 1)]);
    case MethodKind::roundtrip:
      return "roundtrip";
    case MethodKind::aps:
      return "aps";
    case MethodKind::ops:
      return "ops";
    case MethodKind::prompt_dimension:
      return "prompt:" + std::string(to_string(dimension));
    case MethodKind::oracle_max:
      return "oracle_max";
    case MethodKind::oracle_min:
      return "oracle_min";
    case MethodKind::ensemble: {
      std::string out;
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (i) out += '+';
        out += members[i].name();
        if (!weights.empty()) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "*%.17g", weights[i]);
          out += buf;
        }
      }
      return out;
    }
  }
  return "unknown";
}

std::string Method::label() const {
  switch (kind) {
    case MethodKind::ngram:
      return std::string(kNgramLabels[static_cast<std::size_t>(n - 1)]);
    case MethodKind::roundtrip:
      return "round-trip";
    case MethodKind::aps:
      return "averaged prompt score (APS)";
    case MethodKind::ops:
      return "overall prompt score (OPS)";
    case MethodKind::prompt_dimension:
      return "prompt score: " + std::string(to_string(dimension));
    case MethodKind::oracle_max:
      return "oracle max";
    case MethodKind::oracle_min:
      return "oracle min";
    case MethodKind::ensemble: {
      std::string out;
      for (std::size_t i = 0; i < members.size(); ++i) {
        if (i) out += " + ";
        const Method& m = members[i];
        if (m.kind == MethodKind::aps) {
          out += "APS";
        } else if (m.kind == MethodKind::ops) {
          out += "OPS";
        } else {
          out += m.label();
        }
        if (!weights.empty()) {
          char buf[32];
          std::snprintf(buf, sizeof buf, " (w=%g)", weights[i]);
          out += buf;
        }
      }
      return out;
    }
  }
  return "unknown";
}

bool Method::needs_backend() const {
  switch (kind) {
    case MethodKind::ngram:
    case MethodKind::oracle_max:
    case MethodKind::oracle_min:
      return false;
    case MethodKind::ensemble:
      return std::any_of(members.begin(), members.end(), [](const Method& m) { return m.needs_backend(); });
    default:
      return true;
  }
}

ScoreVector::ScoreVector(Method method, std::vector<double> values)
    : method_(std::move(method)), values_(std::move(values)) {
  if (values_.empty()) throw InvalidArgument("score vector for " + method_.name() + " is empty");
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvalidArgument("score vector for " + method_.name() + " has a non-finite value");
  }
}

BaselineStats compute_baselines(double greedy_value, std::span<const double> sample_values) {
  if (sample_values.empty()) throw InvalidArgument("baselines need at least one sample");
  BaselineStats s;
  s.m_greedy = greedy_value;
  s.m_min = *std::min_element(sample_values.begin(), sample_values.end());
  s.m_max = *std::max_element(sample_values.begin(), sample_values.end());
  // The mean is clamped so accumulated rounding cannot leave [min, max].
  const double mean = std::accumulate(sample_values.begin(), sample_values.end(), 0.0) /
                      static_cast<double>(sample_values.size());
  s.m_mean = std::clamp(mean, s.m_min, s.m_max);
  return s;
}

nlohmann::json to_json(const GenerationItem& item) {
  nlohmann::json j = {{"id", item.id},
                      {"context", item.context},
                      {"answer", item.answer},
                      {"dataset_tag", std::string(to_string(item.dataset_tag))}};
  if (item.reference_question) j["reference_question"] = *item.reference_question;
  return j;
}

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

std::string require_string(const nlohmann::json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw FormatError(std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

}  // namespace

GenerationItem item_from_json(const nlohmann::json& j) {
  GenerationItem item;
  item.id = require_string(j, "id");
  item.context = require_string(j, "context");
  item.answer = require_string(j, "answer");
  if (j.contains("reference_question") && !j.at("reference_question").is_null()) {
    item.reference_question = require_string(j, "reference_question");
  }
  if (j.contains("dataset_tag")) {
    try {
      item.dataset_tag = parse_dataset_tag(require_string(j, "dataset_tag"));
    } catch (const InvalidArgument& e) {
      throw FormatError(e.what());
    }
  }
  return item;
}

nlohmann::json to_json(const CandidateSet& set) {
  nlohmann::json j = {{"item_id", set.item_id},
                      {"greedy", set.greedy},
                      {"sampled", set.sampled},
                      {"k", set.k},
                      {"sampling_temperature", set.sampling_temperature}};
  if (std::find(set.flagged.begin(), set.flagged.end(), true) != set.flagged.end()) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < set.flagged.size(); ++i) {
      if (set.flagged[i]) idx.push_back(i);
    }
    j["flagged"] = idx;
  }
  if (set.greedy_flagged) j["greedy_flagged"] = true;
  return j;
}

CandidateSet candidates_from_json(const nlohmann::json& j) {
  CandidateSet set;
  set.item_id = require_string(j, "item_id");
  set.greedy = require_string(j, "greedy");
  const auto& sampled = require(j, "sampled");
  if (!sampled.is_array()) throw FormatError("field \"sampled\" must be an array");
  for (const auto& s : sampled) {
    if (!s.is_string()) throw FormatError("field \"sampled\" must hold strings");
    set.sampled.push_back(s.get<std::string>());
  }
  const auto& k = require(j, "k");
  if (!k.is_number_unsigned()) throw FormatError("field \"k\" must be a positive integer");
  set.k = k.get<std::size_t>();
  const auto& temp = require(j, "sampling_temperature");
  if (!temp.is_number()) throw FormatError("field \"sampling_temperature\" must be a number");
  set.sampling_temperature = temp.get<double>();
  if (j.contains("flagged")) {
    set.flagged.assign(set.sampled.size(), false);
    for (const auto& i : j.at("flagged")) {
      const auto idx = i.get<std::size_t>();
      if (idx >= set.flagged.size()) throw FormatError("flagged index out of range");
      set.flagged[idx] = true;
    }
  }
  set.greedy_flagged = j.value("greedy_flagged", false);
  try {
    set.check();
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  return set;
}

nlohmann::json to_json(const ScoreVector& v) { return {{"method", v.method().name()}, {"values", v.values()}}; }

}  // namespace qselect
