// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include "qselect/harness.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "qselect/parallel.hpp"
#include "qselect/textproc.hpp"

namespace qselect {

namespace {

bool is_prompt_method(const Method& m) {
  return m.kind == MethodKind::aps || m.kind == MethodKind::ops || m.kind == MethodKind::prompt_dimension;
}

std::vector<Method> parse_method_list(const nlohmann::json& j, bool ensembles) {
  std::vector<std::string> names;
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    std::size_t start = 0;
    while (start <= s.size()) {
      auto comma = s.find(',', start);
      if (comma == std::string::npos) comma = s.size();
      if (auto name = trim(std::string_view(s).substr(start, comma - start)); !name.empty()) names.push_back(name);
      start = comma + 1;
    }
  } else if (j.is_array()) {
    for (const auto& e : j) names.push_back(e.get<std::string>());
  } else {
    throw ConfigError("method lists must be a string or an array of strings");
  }
  std::vector<Method> out;
  for (const auto& name : names) {
    Method m = Method::parse(name);
    if (ensembles && m.kind != MethodKind::ensemble) m = Method::ensemble({m});
    out.push_back(std::move(m));
  }
  return out;
}

nlohmann::json method_names(const std::vector<Method>& methods) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& m : methods) out.push_back(m.name());
  return out;
}

}  // namespace

std::string_view to_string(BackendMode mode) {
  switch (mode) {
    case BackendMode::live:
      return "live";
    case BackendMode::record:
      return "record";
    case BackendMode::replay:
      return "replay";
    case BackendMode::scripted:
      return "scripted";
  }
  return "replay";
}

BackendMode parse_backend_mode(std::string_view text) {
  if (text == "live") return BackendMode::live;
  if (text == "record") return BackendMode::record;
  if (text == "replay") return BackendMode::replay;
  if (text == "scripted") return BackendMode::scripted;
  throw ConfigError("unknown backend mode '" + std::string(text) + "'");
}

// ExperimentConfig

void ExperimentConfig::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (!(temperature >= 0.0 && temperature <= 2.0)) throw ConfigError("temperature must lie in [0, 2]");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (!(rpm > 0.0)) throw ConfigError("rpm must be positive");
  for (const auto& m : methods) {
    if (m.kind == MethodKind::ensemble) throw ConfigError("ensemble " + m.name() + " listed among methods");
  }
  for (const auto& m : ensembles) {
    if (m.kind != MethodKind::ensemble) throw ConfigError(m.name() + " listed among ensembles");
  }
  if (backend == BackendMode::replay && !std::filesystem::is_directory(cache_dir)) {
    throw ConfigError("replay mode requires an existing cache directory: " + cache_dir.string());
  }
  if (backend == BackendMode::scripted && script.empty()) {
    throw ConfigError("scripted mode requires a script file");
  }
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> kKeys = {
      "dataset",  "tag",         "k",           "temperature",    "methods",    "ensembles",
      "metric",   "backend",     "cache_dir",   "out_dir",        "script",     "meta_questions",
      "parallelism", "rpm",      "model",       "similarity",     "fairytale_columns", "retry"};
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.count(key)) throw ConfigError("unknown configuration key \"" + key + "\"");
  }
  ExperimentConfig c;
  try {
    if (j.contains("dataset")) c.dataset = j["dataset"].get<std::string>();
    if (j.contains("tag")) c.tag = parse_dataset_tag(j["tag"].get<std::string>());
    if (j.contains("k")) c.k = j["k"].get<std::size_t>();
    if (j.contains("temperature")) c.temperature = j["temperature"].get<double>();
    if (j.contains("methods")) c.methods = parse_method_list(j["methods"], false);
    if (j.contains("ensembles")) c.ensembles = parse_method_list(j["ensembles"], true);
    if (j.contains("metric")) c.metric = parse_metric(j["metric"].get<std::string>());
    if (j.contains("backend")) c.backend = parse_backend_mode(j["backend"].get<std::string>());
    if (j.contains("cache_dir")) c.cache_dir = j["cache_dir"].get<std::string>();
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("script")) c.script = j["script"].get<std::string>();
    if (j.contains("meta_questions")) c.meta_questions = j["meta_questions"].get<std::string>();
    if (j.contains("parallelism")) c.parallelism = j["parallelism"].get<std::size_t>();
    if (j.contains("rpm")) c.rpm = j["rpm"].get<double>();
    if (j.contains("model")) c.model_id = j["model"].get<std::string>();
    if (j.contains("similarity")) c.similarity = parse_answer_similarity(j["similarity"].get<std::string>());
    if (j.contains("fairytale_columns")) {
      const auto& fc = j["fairytale_columns"];
      if (fc.contains("story")) {
        c.fairytale_columns.story = fc["story"].is_array() ? fc["story"].get<std::vector<std::string>>()
                                                           : std::vector<std::string>{fc["story"].get<std::string>()};
      }
      c.fairytale_columns.question = fc.value("question", c.fairytale_columns.question);
      c.fairytale_columns.answer = fc.value("answer", c.fairytale_columns.answer);
      c.fairytale_columns.id = fc.value("id", c.fairytale_columns.id);
      const std::string delim = fc.value("delimiter", std::string(1, c.fairytale_columns.delimiter));
      if (delim == "\\t" || delim == "tab") {
        c.fairytale_columns.delimiter = '\t';
      } else if (delim.size() == 1) {
        c.fairytale_columns.delimiter = delim[0];
      } else {
        throw ConfigError("fairytale delimiter must be a single character");
      }
    }
    if (j.contains("retry")) {
      const auto& r = j["retry"];
      c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
      c.retry.initial_backoff = std::chrono::milliseconds(r.value("initial_backoff_ms", c.retry.initial_backoff.count()));
      c.retry.multiplier = r.value("multiplier", c.retry.multiplier);
      c.retry.max_backoff = std::chrono::milliseconds(r.value("max_backoff_ms", c.retry.max_backoff.count()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad configuration value: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  std::string delim(1, fairytale_columns.delimiter);
  return {{"dataset", dataset.string()},
          {"tag", std::string(qselect::to_string(tag))},
          {"k", k},
          {"temperature", temperature},
          {"methods", method_names(methods)},
          {"ensembles", method_names(ensembles)},
          {"metric", std::string(qselect::to_string(metric))},
          {"backend", std::string(qselect::to_string(backend))},
          {"cache_dir", cache_dir.string()},
          {"out_dir", out_dir.string()},
          {"script", script.string()},
          {"meta_questions", meta_questions.string()},
          {"parallelism", parallelism},
          {"rpm", rpm},
          {"model", model_id},
          {"fairytale_columns",
           {{"story", fairytale_columns.story},
            {"question", fairytale_columns.question},
            {"answer", fairytale_columns.answer},
            {"id", fairytale_columns.id},
            {"delimiter", delim}}},
          {"retry",
           {{"max_attempts", retry.max_attempts},
            {"initial_backoff_ms", retry.initial_backoff.count()},
            {"multiplier", retry.multiplier},
            {"max_backoff_ms", retry.max_backoff.count()}}}};
}

std::shared_ptr<CompletionBackend> make_backend(const ExperimentConfig& config) {
  auto live_stack = [&]() -> std::shared_ptr<CompletionBackend> {
    auto live = std::make_shared<LiveBackend>(live_config_from_env());
    auto limited = std::make_shared<RateLimitedBackend>(live, std::make_shared<TokenBucket>(config.rpm));
    return std::make_shared<RetryingBackend>(limited, config.retry);
  };
  switch (config.backend) {
    case BackendMode::live:
      return live_stack();
    case BackendMode::scripted:
      return ScriptedBackend::from_file(config.script);
    case BackendMode::record: {
      std::shared_ptr<CompletionBackend> inner =
          config.script.empty() ? live_stack() : std::shared_ptr<CompletionBackend>(ScriptedBackend::from_file(config.script));
      return std::make_shared<CachingBackend>(std::make_shared<ReplayStore>(config.cache_dir, true), CacheMode::record,
                                              inner);
    }
    case BackendMode::replay:
      return std::make_shared<CachingBackend>(std::make_shared<ReplayStore>(config.cache_dir, false),
                                              CacheMode::replay);
  }
  throw ConfigError("unknown backend mode");
}

// FailureStats

FailureStats& FailureStats::operator+=(const FailureStats& o) {
  empty_generations += o.empty_generations;
  sampling_backend_failures += o.sampling_backend_failures;
  roundtrip_failures += o.roundtrip_failures;
  parse_failures += o.parse_failures;
  prompt_backend_failures += o.prompt_backend_failures;
  return *this;
}

nlohmann::json to_json(const FailureStats& f) {
  return {{"empty_generations", f.empty_generations},
          {"sampling_backend_failures", f.sampling_backend_failures},
          {"roundtrip_failures", f.roundtrip_failures},
          {"parse_failures", f.parse_failures},
          {"prompt_backend_failures", f.prompt_backend_failures},
          {"total", f.total()}};
}

FailureStats failure_stats_from_json(const nlohmann::json& j) {
  FailureStats f;
  f.empty_generations = j.value("empty_generations", std::size_t{0});
  f.sampling_backend_failures = j.value("sampling_backend_failures", std::size_t{0});
  f.roundtrip_failures = j.value("roundtrip_failures", std::size_t{0});
  f.parse_failures = j.value("parse_failures", std::size_t{0});
  f.prompt_backend_failures = j.value("prompt_backend_failures", std::size_t{0});
  return f;
}

// Sampling

SampleOutcome sample_candidates(const GenerationItem& item, CompletionBackend& backend, std::size_t k,
                                double temperature, const SamplingOptions& options) {
  if (k < 1) throw InvalidArgument("k must be >= 1");
  SampleOutcome out;
  CandidateSet& set = out.candidates;
  set.item_id = item.id;
  set.k = k;
  set.sampling_temperature = temperature;
  set.sampled.assign(k, std::string());
  set.flagged.assign(k, false);

  auto generate = [&](double temp, std::size_t index, std::size_t retry_index, std::string& text) -> bool {
    const CompletionRequest request = qg_request(item, temp, options.model_id);
    for (std::size_t sample_index : {index, retry_index}) {
      try {
        text = parse_generated_question(backend.complete(request, sample_index));
        return true;
      } catch (const EmptyGeneration&) {
        continue;
      } catch (const BackendError&) {
        ++out.failures.sampling_backend_failures;
        text.clear();
        return false;
      }
    }
    ++out.failures.empty_generations;
    text.clear();
    return false;
  };

  for (std::size_t i = 0; i < k; ++i) {
    set.flagged[i] = !generate(temperature, i, kRetrySampleOffset + i, set.sampled[i]);
  }
  set.greedy_flagged = !generate(0.0, 0, kRetrySampleOffset, set.greedy);
  if (std::find(set.flagged.begin(), set.flagged.end(), true) == set.flagged.end()) set.flagged.clear();
  return out;
}

// Scoring

const ScoreVector& ItemScores::get(const Method& m) const {
  for (const auto& v : vectors) {
    if (v.method() == m) return v;
  }
  throw InvalidArgument("item '" + item_id + "' has no scores for " + m.name());
}

bool ItemScores::has(const Method& m) const {
  return std::any_of(vectors.begin(), vectors.end(), [&](const ScoreVector& v) { return v.method() == m; });
}

std::vector<Method> base_methods(const std::vector<Method>& methods, const std::vector<Method>& ensembles) {
  std::vector<Method> out;
  auto add = [&](const Method& m) {
    if (m.is_oracle()) return;
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  };
  for (const auto& m : methods) add(m);
  for (const auto& e : ensembles) {
    for (const auto& m : e.members) add(m);
  }
  return out;
}

ItemScores score_item(const GenerationItem& item, const CandidateSet& candidates, const std::vector<Method>& methods,
                      CompletionBackend* backend, const ScorerOptions& options) {
  if (candidates.item_id != item.id) throw InvalidArgument("candidate set does not belong to item " + item.id);
  ItemScores out;
  out.item_id = item.id;
  auto need_backend = [&](const Method& m) -> CompletionBackend& {
    if (backend == nullptr) throw ConfigError(m.name() + " needs a completion backend");
    return *backend;
  };
  for (const auto& m : methods) {
    switch (m.kind) {
      case MethodKind::ngram:
        out.vectors.push_back(score_ngram(item, candidates, m.n));
        break;
      case MethodKind::roundtrip: {
        RoundTripResult r = score_roundtrip(item, candidates, need_backend(m), options);
        out.failures.roundtrip_failures = r.trace.failures();
        out.vectors.push_back(std::move(r.scores));
        out.roundtrip = std::move(r.trace);
        break;
      }
      case MethodKind::aps:
      case MethodKind::ops:
      case MethodKind::prompt_dimension: {
        if (!out.prompt) {
          out.prompt = score_prompt(item, candidates, need_backend(m), options);
          out.failures.parse_failures = out.prompt->parse_failures();
          out.failures.prompt_backend_failures = out.prompt->backend_failures();
        }
        if (m.kind == MethodKind::aps) {
          out.vectors.push_back(out.prompt->aps_vector());
        } else if (m.kind == MethodKind::ops) {
          out.vectors.push_back(out.prompt->ops_vector());
        } else {
          out.vectors.push_back(out.prompt->dimension_vector(m.dimension));
        }
        break;
      }
      default:
        throw InvalidArgument(m.name() + " is not a base scoring method");
    }
  }
  return out;
}

std::vector<nlohmann::json> score_dump_rows(const ItemScores& scores) {
  std::vector<nlohmann::json> rows;
  for (const auto& v : scores.vectors) {
    nlohmann::json row = {{"item_id", scores.item_id}, {"method", v.method().name()}, {"values", v.values()}};
    nlohmann::json flags = nlohmann::json::object();
    if (v.method().kind == MethodKind::roundtrip) {
      if (scores.roundtrip) row["trace"] = to_json(*scores.roundtrip);
      flags["backend_failures"] = scores.failures.roundtrip_failures;
    } else if (is_prompt_method(v.method())) {
      if (scores.prompt) row["ratings"] = to_json(*scores.prompt);
      flags["parse_failures"] = scores.failures.parse_failures;
      flags["backend_failures"] = scores.failures.prompt_backend_failures;
    }
    row["flags"] = std::move(flags);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ItemScores> item_scores_from_rows(const std::vector<nlohmann::json>& rows) {
  std::vector<ItemScores> out;
  std::map<std::string, std::size_t> index;
  std::set<std::string> prompt_seen;
  for (const auto& row : rows) try {
    const std::string id = row.at("item_id").get<std::string>();
    auto [it, inserted] = index.emplace(id, out.size());
    if (inserted) {
      out.emplace_back();
      out.back().item_id = id;
    }
    ItemScores& s = out[it->second];
    Method m;
    try {
      m = Method::parse(row.at("method").get<std::string>());
    } catch (const InvalidArgument& e) {
      throw FormatError(e.what());
    }
    if (s.has(m)) throw FormatError("duplicate scores for " + id + " / " + m.name());
    try {
      s.vectors.emplace_back(m, row.at("values").get<std::vector<double>>());
    } catch (const InvalidArgument& e) {
      throw FormatError(e.what());
    }
    const auto flags = row.value("flags", nlohmann::json::object());
    if (m.kind == MethodKind::roundtrip) {
      s.failures.roundtrip_failures = flags.value("backend_failures", std::size_t{0});
    } else if (is_prompt_method(m) && prompt_seen.insert(id).second) {
      s.failures.parse_failures = flags.value("parse_failures", std::size_t{0});
      s.failures.prompt_backend_failures = flags.value("backend_failures", std::size_t{0});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed score row: ") + e.what());
  }
  return out;
}

// Selection

double metric_value(std::string_view candidate, std::string_view reference, MetricName metric) {
  switch (metric) {
    case MetricName::bleu4: {
      const TokenSequence ref = tokenize_simple(reference);
      return bleu4(tokenize_simple(candidate), std::span<const TokenSequence>(&ref, 1)).value;
    }
    case MetricName::rouge_l:
      return rouge_l(tokenize_simple(candidate), tokenize_simple(reference)).value;
    case MetricName::token_f1:
      return token_f1(normalize_squad(candidate), normalize_squad(reference)).value;
  }
  return 0.0;
}

std::vector<double> candidate_metric_values(const CandidateSet& candidates, std::string_view reference,
                                            MetricName metric) {
  std::vector<double> out;
  out.reserve(candidates.sampled.size());
  for (std::size_t i = 0; i < candidates.sampled.size(); ++i) {
    out.push_back(candidates.is_flagged(i) ? 0.0 : metric_value(candidates.sampled[i], reference, metric));
  }
  return out;
}

std::optional<SelectionResult> select_for_item(const Method& method, const ItemScores& scores,
                                               const CandidateSet& candidates,
                                               const std::vector<double>* metric_values) {
  if (candidates.eligible_count() == 0) return std::nullopt;
  const std::vector<bool>& mask = candidates.flagged;
  switch (method.kind) {
    case MethodKind::oracle_max:
    case MethodKind::oracle_min: {
      if (metric_values == nullptr) throw InvalidArgument("oracle selection needs reference metric values");
      std::vector<double> v = *metric_values;
      // Lowest metric value wins for the anti-oracle.
      if (method.kind == MethodKind::oracle_min) {
        for (double& x : v) x = -x;
      }
      return select(ScoreVector(method, std::move(v)), mask);
    }
    case MethodKind::ensemble: {
      const EnsembleSpec spec = EnsembleSpec::from_method(method);
      std::vector<ScoreVector> members;
      for (const auto& m : spec.members) members.push_back(scores.get(m));
      return select_ensemble(members, spec, mask);
    }
    default:
      return select(scores.get(method), mask);
  }
}

nlohmann::json to_json(const SelectionRecord& r) {
  nlohmann::json j = {{"item_id", r.item_id}, {"method", r.method.name()}};
  if (!r.result) {
    j["selected_index"] = nullptr;
    return j;
  }
  j["selected_index"] = r.result->selected_index;
  j["selected_question"] = r.selected_question;
  j["tie_broken"] = r.result->tie_broken;
  j["raw_scores"] = r.result->raw_scores.values();
  if (r.result->normalized_scores) j["normalized_scores"] = r.result->normalized_scores->values();
  return j;
}

std::string_view to_string(RowGroup g) {
  switch (g) {
    case RowGroup::baseline:
      return "baseline";
    case RowGroup::method:
      return "method";
    case RowGroup::ensemble:
      return "ensemble";
  }
  return "method";
}

MissingReferences::MissingReferences(std::vector<std::string> ids)
    : FormatError([&] {
        std::string msg = "items lack reference questions:";
        for (const auto& id : ids) msg += " " + id;
        return msg;
      }()),
      ids_(std::move(ids)) {}

namespace {

struct IndexedInputs {
  std::map<std::string, const CandidateSet*> candidates;
  std::map<std::string, const ItemScores*> scores;
};

IndexedInputs index_inputs(const std::vector<CandidateSet>& candidates, const std::vector<ItemScores>& scores) {
  IndexedInputs idx;
  for (const auto& c : candidates) {
    if (!idx.candidates.emplace(c.item_id, &c).second) throw FormatError("duplicate candidate set for " + c.item_id);
  }
  for (const auto& s : scores) {
    if (!idx.scores.emplace(s.item_id, &s).second) throw FormatError("duplicate scores for " + s.item_id);
  }
  return idx;
}

const ItemScores& scores_for(const IndexedInputs& idx, const std::string& id, const ItemScores& empty) {
  auto it = idx.scores.find(id);
  return it == idx.scores.end() ? empty : *it->second;
}

// Index of the min or max value over all slots, lowest index on ties.
std::size_t extreme_index(const std::vector<double>& v, bool want_max) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (want_max ? v[i] > v[best] : v[i] < v[best]) best = i;
  }
  return best;
}

}  // namespace

std::vector<SelectionRecord> select_all(const std::vector<CandidateSet>& candidates,
                                        const std::vector<ItemScores>& scores, const std::vector<Method>& methods,
                                        const std::vector<Method>& ensembles) {
  const IndexedInputs idx = index_inputs(candidates, scores);
  const ItemScores empty;
  std::vector<SelectionRecord> out;
  for (const auto& c : candidates) {
    const ItemScores& s = scores_for(idx, c.item_id, empty);
    for (const auto* list : {&methods, &ensembles}) {
      for (const auto& m : *list) {
        if (m.is_oracle()) continue;
        SelectionRecord rec{c.item_id, m, select_for_item(m, s, c), {}};
        if (rec.result) rec.selected_question = c.sampled[rec.result->selected_index];
        out.push_back(std::move(rec));
      }
    }
  }
  return out;
}

EvaluationOutput evaluate(const std::vector<GenerationItem>& items, const std::vector<CandidateSet>& candidates,
                          const std::vector<ItemScores>& scores, const std::vector<Method>& methods,
                          const std::vector<Method>& ensembles, MetricName metric,
                          const FailureStats& sampling_failures) {
  std::vector<std::string> missing;
  for (const auto& item : items) {
    if (!item.reference_question || trim(*item.reference_question).empty()) missing.push_back(item.id);
  }
  if (!missing.empty()) throw MissingReferences(std::move(missing));

  const IndexedInputs idx = index_inputs(candidates, scores);
  const ItemScores empty;

  // Fold in item-id order so aggregation does not depend on input order.
  std::vector<const GenerationItem*> ordered;
  for (const auto& item : items) ordered.push_back(&item);
  std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->id < b->id; });

  std::vector<Method> selectors = methods;
  selectors.insert(selectors.end(), ensembles.begin(), ensembles.end());
  const std::size_t baseline_rows = 4;
  const std::size_t row_count = baseline_rows + selectors.size();

  EvaluationOutput out;
  ResultTable& table = out.table;
  const bool bleu = metric == MetricName::bleu4;
  if (bleu) {
    table.columns = {{"bleu4 (sentence mean)", true}, {"bleu4 (corpus)", false}};
  } else {
    table.columns = {{std::string(to_string(metric)), true}};
  }
  table.items = items.size();

  std::vector<double> sums(row_count, 0.0);
  std::vector<std::size_t> ties(row_count, 0);
  std::vector<std::size_t> no_eligible(row_count, 0);
  // Corpus BLEU pairs per row; the sample-average row keeps one list per slot.
  std::vector<std::vector<BleuPair>> corpus(row_count);
  std::vector<std::vector<BleuPair>> slot_corpus;

  std::map<std::string, std::vector<SelectionRecord>> selections_by_item;
  for (const GenerationItem* item : ordered) {
    auto cit = idx.candidates.find(item->id);
    if (cit == idx.candidates.end()) throw FormatError("no candidate set for item " + item->id);
    const CandidateSet& cands = *cit->second;
    const ItemScores& s = scores_for(idx, item->id, empty);
    const std::string& ref = *item->reference_question;

    const std::vector<double> values = candidate_metric_values(cands, ref, metric);
    const double greedy_value = cands.greedy_flagged ? 0.0 : metric_value(cands.greedy, ref, metric);
    const BaselineStats base = compute_baselines(greedy_value, values);
    sums[0] += base.m_greedy;
    sums[1] += base.m_mean;
    sums[2] += base.m_min;
    sums[3] += base.m_max;

    TokenSequence ref_tokens;
    auto pair_for = [&](std::string_view text) { return BleuPair{tokenize_simple(text), {ref_tokens}}; };
    if (bleu) {
      ref_tokens = tokenize_simple(ref);
      corpus[0].push_back(pair_for(cands.greedy_flagged ? std::string() : cands.greedy));
      if (slot_corpus.size() < cands.sampled.size()) slot_corpus.resize(cands.sampled.size());
      for (std::size_t j = 0; j < cands.sampled.size(); ++j) {
        slot_corpus[j].push_back(pair_for(cands.is_flagged(j) ? std::string() : cands.sampled[j]));
      }
      const std::size_t lo = extreme_index(values, false);
      const std::size_t hi = extreme_index(values, true);
      corpus[2].push_back(pair_for(cands.is_flagged(lo) ? std::string() : cands.sampled[lo]));
      corpus[3].push_back(pair_for(cands.is_flagged(hi) ? std::string() : cands.sampled[hi]));
    }

    auto& item_selections = selections_by_item[item->id];
    for (std::size_t m = 0; m < selectors.size(); ++m) {
      const std::size_t row = baseline_rows + m;
      SelectionRecord rec{item->id, selectors[m], select_for_item(selectors[m], s, cands, &values), {}};
      double v = 0.0;
      std::string chosen;
      if (rec.result) {
        v = values[rec.result->selected_index];
        chosen = cands.sampled[rec.result->selected_index];
        rec.selected_question = chosen;
        ties[row] += rec.result->tie_broken ? 1 : 0;
      } else {
        ++no_eligible[row];
      }
      sums[row] += v;
      if (bleu) corpus[row].push_back(pair_for(chosen));
      item_selections.push_back(std::move(rec));
    }
  }

  const double n = static_cast<double>(ordered.size());
  auto mean = [&](std::size_t row) { return ordered.empty() ? 0.0 : sums[row] / n; };
  auto corpus_value = [](const std::vector<BleuPair>& pairs) {
    return pairs.empty() ? 0.0 : corpus_bleu4(pairs).value;
  };
  std::vector<double> corpus_values(row_count, 0.0);
  if (bleu) {
    for (std::size_t r = 0; r < row_count; ++r) {
      if (r != 1) corpus_values[r] = corpus_value(corpus[r]);
    }
    double slot_sum = 0.0;
    for (const auto& pairs : slot_corpus) slot_sum += corpus_value(pairs);
    corpus_values[1] = slot_corpus.empty() ? 0.0 : slot_sum / static_cast<double>(slot_corpus.size());
  }

  const std::array<std::pair<std::string_view, std::string_view>, 4> baselines = {{
      {kRowGreedy, "M_g (greedy)"},
      {kRowSampleAvg, "M_s (sample avg)"},
      {kRowLowerbound, "M_min (lowerbound)"},
      {kRowUpperbound, "M_max (upperbound)"},
  }};
  for (std::size_t r = 0; r < row_count; ++r) {
    ResultRow row;
    if (r < baseline_rows) {
      row.key = std::string(baselines[r].first);
      row.label = std::string(baselines[r].second);
      row.group = RowGroup::baseline;
    } else {
      const Method& m = selectors[r - baseline_rows];
      row.key = m.name();
      row.label = m.label();
      row.group = m.kind == MethodKind::ensemble ? RowGroup::ensemble : RowGroup::method;
    }
    row.values.push_back(mean(r));
    if (bleu) row.values.push_back(corpus_values[r]);
    row.items = ordered.size();
    row.ties = ties[r];
    row.no_eligible = no_eligible[r];
    table.rows.push_back(std::move(row));
  }

  table.failures = sampling_failures;
  for (const auto& s : scores) table.failures += s.failures;

  // Selection records follow the input item order.
  for (const auto& item : items) {
    auto& recs = selections_by_item[item.id];
    for (auto& r : recs) out.selections.push_back(std::move(r));
    recs.clear();
  }
  return out;
}

std::vector<SampleOutcome> generate_all(const std::vector<GenerationItem>& items, CompletionBackend& backend,
                                        const ExperimentConfig& config) {
  std::vector<std::optional<SampleOutcome>> slots(items.size());
  SamplingOptions options;
  options.model_id = config.model_id;
  parallel_for(items.size(), config.parallelism, [&](std::size_t i) {
    slots[i] = sample_candidates(items[i], backend, config.k, config.temperature, options);
  });
  std::vector<SampleOutcome> out;
  out.reserve(items.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<ItemScores> score_all(const std::vector<GenerationItem>& items,
                                  const std::vector<CandidateSet>& candidates, CompletionBackend* backend,
                                  const ExperimentConfig& config, const MetaQuestionTable* metas) {
  std::map<std::string, const CandidateSet*> by_id;
  for (const auto& c : candidates) by_id.emplace(c.item_id, &c);
  const std::vector<Method> methods = base_methods(config.methods, config.ensembles);
  ScorerOptions options;
  options.model_id = config.model_id;
  options.similarity = config.similarity;
  options.meta_questions = metas;
  std::vector<std::optional<ItemScores>> slots(items.size());
  parallel_for(items.size(), config.parallelism, [&](std::size_t i) {
    auto it = by_id.find(items[i].id);
    if (it == by_id.end()) throw FormatError("no candidate set for item " + items[i].id);
    slots[i] = score_item(items[i], *it->second, methods, backend, options);
  });
  std::vector<ItemScores> out;
  out.reserve(items.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

EvaluationOutput run_experiment(const std::vector<GenerationItem>& items, CompletionBackend& backend,
                                const ExperimentConfig& config, PipelineRun* run) {
  PipelineRun local;
  PipelineRun& r = run ? *run : local;
  r.candidates.clear();
  r.sampling_failures = {};
  for (auto& outcome : generate_all(items, backend, config)) {
    r.sampling_failures += outcome.failures;
    r.candidates.push_back(std::move(outcome.candidates));
  }
  MetaQuestionTable metas;
  if (!config.meta_questions.empty()) metas = load_meta_questions(config.meta_questions);
  r.scores = score_all(items, r.candidates, &backend, config, metas.empty() ? nullptr : &metas);
  return evaluate(items, r.candidates, r.scores, config.methods, config.ensembles, config.metric, r.sampling_failures);
}

}  // namespace qselect
