// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

// Records the replay fixture: fixture_gen <dir> writes <dir>/items.jsonl,
// <dir>/config.json and <dir>/cache/ from the synthetic responder.

#include <fstream>
#include <iostream>

#include "qselect/harness.hpp"
#include "synthetic.hpp"

int main(int argc, char** argv) {
  using namespace qselect;
  if (argc != 2) {
    std::cerr << "usage: fixture_gen <dir>\n";
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  std::filesystem::remove_all(dir / "cache");

  const nlohmann::json config_json = {
      {"tag", "generic"},
      {"k", 5},
      {"temperature", 0.7},
      {"backend", "replay"},
      {"methods", "unigram,bigram,trigram,roundtrip,ops,aps,prompt:clarity,oracle_max,oracle_min"},
      {"ensembles",
       {"aps+roundtrip", "bigram+roundtrip", "trigram+roundtrip", "bigram+aps", "trigram+aps",
        "bigram+aps+roundtrip", "trigram+aps+roundtrip"}},
      {"metric", "bleu4"}};
  ExperimentConfig config = ExperimentConfig::from_json(config_json);

  const auto items = test::synthetic_items(20);
  write_items_jsonl(items, dir / "items.jsonl");
  std::ofstream(dir / "config.json") << config_json.dump(2) << "\n";

  auto scripted = std::make_shared<ScriptedBackend>();
  scripted->add_responder(test::synthetic_response);
  // A fixed timestamp keeps regenerated fixtures byte-identical.
  CachingBackend backend(std::make_shared<ReplayStore>(dir / "cache", true), CacheMode::record, scripted,
                         [] { return std::string("2026-01-01T00:00:00Z"); });
  const EvaluationOutput out = run_experiment(items, backend, config);
  std::cout << "recorded " << backend.misses() << " completions for " << items.size() << " items\n"
            << render_text(out.table);
  return 0;
}
