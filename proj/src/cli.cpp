// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include "qselect/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "qselect/harness.hpp"

namespace qselect {

namespace {

// Raised when every completion call of a stage failed.
class BackendUnusable : public Error {
 public:
  using Error::Error;
};

const char* const kDefaultMethods[] = {"unigram", "bigram", "trigram", "roundtrip", "ops", "aps"};
const char* const kDefaultEnsembles[] = {
    "aps+roundtrip",   "bigram+roundtrip",     "trigram+roundtrip",
    "bigram+aps",      "trigram+aps",          "bigram+aps+roundtrip",
    "trigram+aps+roundtrip"};

struct Flags {
  std::string config;
  std::string dataset;
  std::string tag;
  std::size_t k = 5;
  double temperature = kSamplingTemperature;
  std::string methods;
  std::vector<std::string> ensembles;
  std::string backend;
  std::string cache_dir;
  std::string out_dir;
  std::string metric;
  std::size_t parallelism = 1;
  double rpm = 20.0;
  std::string script;
  std::string meta_questions;
  std::string model;
  std::string similarity;
};

void add_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON run configuration");
  app->add_option("--dataset", f.dataset, "dataset file (SQuAD JSON, Fairytale CSV or items JSONL)");
  app->add_option("--tag", f.tag, "dataset kind: squad, fairytale or generic");
  app->add_option("--k", f.k, "candidates sampled per item (default 5)");
  app->add_option("--temperature", f.temperature, "sampling temperature (default 0.7)");
  app->add_option("--methods", f.methods, "comma-separated selection methods");
  app->add_option("--ensemble", f.ensembles, "ensemble such as bigram+aps+roundtrip (repeatable)")->delimiter(',');
  app->add_option("--backend", f.backend, "live, record, replay or scripted");
  app->add_option("--cache-dir", f.cache_dir, "replay cache directory");
  app->add_option("--out-dir", f.out_dir, "output directory");
  app->add_option("--metric", f.metric, "bleu4, rouge_l or token_f1");
  app->add_option("--parallelism", f.parallelism, "items processed concurrently");
  app->add_option("--rpm", f.rpm, "live request budget per minute");
  app->add_option("--script", f.script, "scripted backend response file");
  app->add_option("--meta-questions", f.meta_questions, "meta-question table override (TSV)");
  app->add_option("--model", f.model, "logical model id sent to the endpoint");
  app->add_option("--similarity", f.similarity, "round-trip answer similarity: by_dataset, token_f1 or rouge_l");
}

std::vector<Method> parse_methods_flag(const std::string& text) {
  std::vector<Method> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    const std::string name = trim(std::string_view(text).substr(start, comma - start));
    if (!name.empty()) out.push_back(Method::parse(name));
    start = comma + 1;
  }
  return out;
}

ExperimentConfig resolve_config(const CLI::App& sub, const Flags& f) {
  ExperimentConfig cfg;
  bool methods_given = false;
  bool ensembles_given = false;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw ConfigError("cannot read configuration file " + f.config);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(f.config + ": " + e.what());
    }
    cfg = ExperimentConfig::from_json(j);
    methods_given = j.contains("methods");
    ensembles_given = j.contains("ensembles");
  }
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  try {
    if (given("--dataset")) cfg.dataset = f.dataset;
    if (given("--tag")) cfg.tag = parse_dataset_tag(f.tag);
    if (given("--k")) cfg.k = f.k;
    if (given("--temperature")) cfg.temperature = f.temperature;
    if (given("--methods")) {
      cfg.methods = parse_methods_flag(f.methods);
      methods_given = true;
    }
    if (given("--ensemble")) {
      cfg.ensembles.clear();
      for (const auto& e : f.ensembles) {
        if (trim(e).empty()) continue;
        Method m = Method::parse(e);
        cfg.ensembles.push_back(m.kind == MethodKind::ensemble ? m : Method::ensemble({m}));
      }
      ensembles_given = true;
    }
    if (given("--backend")) cfg.backend = parse_backend_mode(f.backend);
    if (given("--cache-dir")) cfg.cache_dir = f.cache_dir;
    if (given("--out-dir")) cfg.out_dir = f.out_dir;
    if (given("--metric")) cfg.metric = parse_metric(f.metric);
    if (given("--parallelism")) cfg.parallelism = f.parallelism;
    if (given("--rpm")) cfg.rpm = f.rpm;
    if (given("--script")) cfg.script = f.script;
    if (given("--meta-questions")) cfg.meta_questions = f.meta_questions;
    if (given("--model")) cfg.model_id = f.model;
    if (given("--similarity")) cfg.similarity = parse_answer_similarity(f.similarity);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (!methods_given) {
    for (const char* name : kDefaultMethods) cfg.methods.push_back(Method::parse(name));
  }
  if (!ensembles_given) {
    for (const char* name : kDefaultEnsembles) cfg.ensembles.push_back(Method::parse(name));
  }
  return cfg;
}

class Pipeline {
 public:
  Pipeline(ExperimentConfig cfg, std::ostream& out, std::ostream& err)
      : cfg_(std::move(cfg)), out_(out), err_(err) {}

  void ingest() {
    if (cfg_.dataset.empty()) throw ConfigError("no dataset given (--dataset)");
    std::vector<GenerationItem> items;
    if (cfg_.tag == DatasetTag::generic) {
      items = read_items_jsonl(cfg_.dataset);
      err_ << "ingested " << items.size() << " items from " << cfg_.dataset.string() << "\n";
    } else {
      LoadResult r = cfg_.tag == DatasetTag::squad ? load_squad(cfg_.dataset)
                                                   : load_fairytale(cfg_.dataset, cfg_.fairytale_columns);
      for (const auto& d : r.diagnostics) {
        err_ << (d.rejected ? "rejected " : "note ") << d.where;
        if (!d.item_id.empty()) err_ << " (" << d.item_id << ")";
        err_ << ": " << d.message << "\n";
      }
      err_ << "ingested " << r.items.size() << " of " << r.records_seen << " records from "
           << cfg_.dataset.string() << " (" << r.rejected() << " rejected, " << r.boundary_expanded.size()
           << " with multi-sentence context)\n";
      items = std::move(r.items);
    }
    ensure_out_dir();
    write_items_jsonl(items, path("items.jsonl"));
    items_ = std::move(items);
  }

  void generate() {
    CompletionBackend& b = backend();
    const auto& items = load_items();
    std::vector<CandidateSet> sets;
    FailureStats stats;
    for (auto& o : generate_all(items, b, cfg_)) {
      stats += o.failures;
      sets.push_back(std::move(o.candidates));
    }
    const std::size_t calls = items.size() * (cfg_.k + 1);
    if (calls > 0 && stats.sampling_backend_failures == calls) {
      throw BackendUnusable("all " + std::to_string(calls) + " generation calls failed in " +
                            std::string(to_string(cfg_.backend)) + " mode");
    }
    ensure_out_dir();
    write_candidates_jsonl(sets, path("candidates.jsonl"));
    write_text(path("generation.json"), nlohmann::json{{"failures", to_json(stats)}}.dump(2) + "\n");
    err_ << "generated candidates for " << sets.size() << " items (" << stats.empty_generations
         << " empty, " << stats.sampling_backend_failures << " backend failures)\n";
    candidates_ = std::move(sets);
    sampling_failures_ = stats;
  }

  void score() {
    const auto& items = load_items();
    const auto& candidates = load_candidates();
    const std::vector<Method> methods = base_methods(cfg_.methods, cfg_.ensembles);
    const bool needs_backend =
        std::any_of(methods.begin(), methods.end(), [](const Method& m) { return m.needs_backend(); });
    MetaQuestionTable metas;
    if (!cfg_.meta_questions.empty()) metas = load_meta_questions(cfg_.meta_questions);
    std::vector<ItemScores> scores = score_all(items, candidates, needs_backend ? &backend() : nullptr, cfg_,
                                               metas.empty() ? nullptr : &metas);
    std::size_t attempted = 0;
    std::size_t failed = 0;
    for (const auto& s : scores) {
      if (s.roundtrip) {
        for (const auto& e : s.roundtrip->entries) attempted += e.skipped ? 0 : 1;
      }
      if (s.prompt) {
        for (bool skip : s.prompt->skipped) attempted += skip ? 0 : kDimensionCount;
      }
      failed += s.failures.roundtrip_failures + s.failures.prompt_backend_failures;
    }
    if (attempted > 0 && failed == attempted) {
      throw BackendUnusable("all " + std::to_string(attempted) + " scoring calls failed in " +
                            std::string(to_string(cfg_.backend)) + " mode");
    }
    std::vector<nlohmann::json> rows;
    for (const auto& s : scores) {
      for (auto& r : score_dump_rows(s)) rows.push_back(std::move(r));
    }
    ensure_out_dir();
    write_jsonl(rows, path("scores.jsonl"));
    err_ << "scored " << scores.size() << " items with " << methods.size() << " methods\n";
    scores_ = std::move(scores);
  }

  void select_stage() {
    const auto& candidates = load_candidates();
    const auto& scores = load_scores();
    write_selections(select_all(candidates, scores, cfg_.methods, cfg_.ensembles));
  }

  void evaluate_stage() {
    const auto& items = load_items();
    const auto& candidates = load_candidates();
    const auto& scores = load_scores();
    EvaluationOutput result =
        evaluate(items, candidates, scores, cfg_.methods, cfg_.ensembles, cfg_.metric, load_sampling_failures());
    if (auto v = result.table.tautology_violations(); !v.empty()) {
      throw InvariantBreach("selection outside the oracle bounds: " + v.front());
    }
    write_selections(result.selections);
    emit_report(result.table, cfg_.out_dir);
    out_ << render_text(result.table);
  }

  void report() {
    const auto results = path("results.json");
    if (!std::filesystem::exists(results)) {
      evaluate_stage();
      return;
    }
    std::ifstream in(results);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(results.string() + ": " + e.what());
    }
    const ResultTable table = ResultTable::from_json(j);
    emit_report(table, cfg_.out_dir);
    out_ << render_text(table);
  }

  void cache_stats() {
    const ReplayStore store(cfg_.cache_dir, false);
    const auto s = store.stats();
    nlohmann::json j = {{"cache_dir", cfg_.cache_dir.string()},
                        {"records", s.records},
                        {"bytes", s.bytes},
                        {"by_backend", s.by_backend}};
    out_ << j.dump(2) << "\n";
  }

 private:
  std::filesystem::path path(const char* name) const { return cfg_.out_dir / name; }

  void ensure_out_dir() {
    std::error_code ec;
    std::filesystem::create_directories(cfg_.out_dir, ec);
    if (ec) throw Error("cannot create " + cfg_.out_dir.string() + ": " + ec.message());
  }

  static void write_text(const std::filesystem::path& p, const std::string& body) {
    std::ofstream o(p, std::ios::binary | std::ios::trunc);
    if (!(o << body)) throw Error("cannot write " + p.string());
  }

  CompletionBackend& backend() {
    if (!backend_) {
      cfg_.validate();
      backend_ = make_backend(cfg_);
    }
    return *backend_;
  }

  const std::vector<GenerationItem>& load_items() {
    if (!items_) {
      if (std::filesystem::exists(path("items.jsonl"))) {
        items_ = read_items_jsonl(path("items.jsonl"));
      } else {
        ingest();
      }
    }
    return *items_;
  }

  const std::vector<CandidateSet>& load_candidates() {
    if (!candidates_) {
      if (std::filesystem::exists(path("candidates.jsonl"))) {
        candidates_ = read_candidates_jsonl(path("candidates.jsonl"));
      } else {
        generate();
      }
    }
    return *candidates_;
  }

  const std::vector<ItemScores>& load_scores() {
    if (!scores_ && std::filesystem::exists(path("scores.jsonl"))) {
      std::vector<nlohmann::json> rows;
      read_jsonl(path("scores.jsonl"), [&](const nlohmann::json& j, std::size_t) { rows.push_back(j); });
      std::vector<ItemScores> loaded = item_scores_from_rows(rows);
      if (covers(loaded)) scores_ = std::move(loaded);
    }
    if (!scores_) score();
    return *scores_;
  }

  // True when the dump holds every required method for every item.
  bool covers(const std::vector<ItemScores>& scores) {
    const std::vector<Method> methods = base_methods(cfg_.methods, cfg_.ensembles);
    std::map<std::string, const ItemScores*> by_id;
    for (const auto& s : scores) by_id.emplace(s.item_id, &s);
    for (const auto& item : load_items()) {
      auto it = by_id.find(item.id);
      if (it == by_id.end()) return methods.empty();
      for (const auto& m : methods) {
        if (!it->second->has(m)) return false;
      }
    }
    return true;
  }

  FailureStats load_sampling_failures() {
    if (sampling_failures_) return *sampling_failures_;
    const auto p = path("generation.json");
    if (!std::filesystem::exists(p)) return {};
    std::ifstream in(p);
    try {
      nlohmann::json j;
      in >> j;
      return failure_stats_from_json(j.at("failures"));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(p.string() + ": " + e.what());
    }
  }

  void write_selections(const std::vector<SelectionRecord>& selections) {
    std::vector<nlohmann::json> rows;
    rows.reserve(selections.size());
    for (const auto& s : selections) rows.push_back(to_json(s));
    ensure_out_dir();
    write_jsonl(rows, path("selections.jsonl"));
    err_ << "wrote " << rows.size() << " selections to " << path("selections.jsonl").string() << "\n";
  }

  ExperimentConfig cfg_;
  std::ostream& out_;
  std::ostream& err_;
  std::shared_ptr<CompletionBackend> backend_;
  std::optional<std::vector<GenerationItem>> items_;
  std::optional<std::vector<CandidateSet>> candidates_;
  std::optional<std::vector<ItemScores>> scores_;
  std::optional<FailureStats> sampling_failures_;
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Select the best of k sampled questions from a black-box question generator", "qselect"};
  app.require_subcommand(1);
  Flags flags;
  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"ingest", "load a dataset into items.jsonl"},
      {"generate", "sample k candidates and a greedy question per item"},
      {"score", "run the scoring methods over the candidates"},
      {"select", "pick one candidate per item with every method and ensemble"},
      {"evaluate", "select and score selections against the reference questions"},
      {"report", "render results.csv and results.txt from the last evaluation"},
      {"cache-stats", "summarize a replay cache directory"},
  };
  for (const auto& s : subs) add_flags(app.add_subcommand(s.name, s.help), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "qselect: " << e.what() << "\n";
    return kExitUsage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    Pipeline p(resolve_config(*sub, flags), out, err);
    if (name == "ingest") {
      p.ingest();
    } else if (name == "generate") {
      p.generate();
    } else if (name == "score") {
      p.score();
    } else if (name == "select") {
      p.select_stage();
    } else if (name == "evaluate") {
      p.evaluate_stage();
    } else if (name == "report") {
      p.report();
    } else {
      p.cache_stats();
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "qselect " << name << ": configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingReferences& e) {
    err << "qselect " << name << ": " << e.what() << "\n";
    return kExitData;
  } catch (const BackendError& e) {
    err << "qselect " << name << ": backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const BackendUnusable& e) {
    err << "qselect " << name << ": " << e.what() << "\n";
    return kExitBackend;
  } catch (const CacheConflict& e) {
    err << "qselect " << name << ": " << e.what() << "\n";
    return kExitBackend;
  } catch (const InvariantBreach& e) {
    err << "qselect " << name << ": internal invariant breach: " << e.what() << "\n";
    return kExitInternal;
  } catch (const Error& e) {
    err << "qselect " << name << ": " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "qselect " << name << ": unexpected failure: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace qselect
