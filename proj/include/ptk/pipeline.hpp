// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "ptk/bpe.hpp"
#include "ptk/config.hpp"
#include "ptk/corpus.hpp"
#include "ptk/error.hpp"
#include "ptk/mixture.hpp"
#include "ptk/packing.hpp"
#include "ptk/rng.hpp"
#include "ptk/version.hpp"
#include "ptk/xlingual.hpp"

namespace ptk::pipeline {

enum class Stage { plan, render, train_tokenizer, tokenize, pack };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::plan: return "plan";
    case Stage::render: return "render";
    case Stage::train_tokenizer: return "train-tokenizer";
    case Stage::tokenize: return "tokenize";
    case Stage::pack: return "pack";
  }
  return "?";
}

/// Parses a comma-separated stage list and returns it in dependency order,
/// deduplicated. An empty string is an empty list (validate-only run).
inline std::vector<Stage> parse_stages(const std::string& csv) {
  std::vector<Stage> stages;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto comma = csv.find(',', start);
    std::string name = csv.substr(start, comma == std::string::npos ? csv.size() - start
                                                                    : comma - start);
    if (!name.empty()) {
      bool known = false;
      for (Stage s : {Stage::plan, Stage::render, Stage::train_tokenizer, Stage::tokenize,
                      Stage::pack}) {
        if (name == stage_name(s)) {
          stages.push_back(s);
          known = true;
        }
      }
      require(known, "unknown stage \"", name,
              "\" (expected plan, render, train-tokenizer, tokenize or pack)");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  std::sort(stages.begin(), stages.end());
  stages.erase(std::unique(stages.begin(), stages.end()), stages.end());
  return stages;
}

struct StageResult {
  std::string stage;
  std::string dir;
  nlohmann::ordered_json summary;
};

namespace detail {

inline void write_provenance(const std::string& dir, const cfg::RunConfig& config,
                             const std::string& stage, std::uint64_t stage_seed) {
  nlohmann::ordered_json j;
  j["tool"] = "ptk";
  j["version"] = kVersion;
  j["config_path"] = config.config_path;
  j["config_sha256"] = config.config_sha256;
  j["master_seed"] = config.seed;
  j["stage"] = stage;
  j["stage_seed"] = stage_seed;
  j["seed_derivation"] = "le64(sha256(\"<master>:<stage>\")[0:8])";
  std::ofstream out(dir + "/provenance.json", std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write provenance in ", dir);
  out << j.dump(2) << "\n";
}

inline std::string stage_dir(const std::string& out_dir, Stage s) {
  std::string dir = out_dir + "/" + stage_name(s);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<corpus::Document> docs_for_source(const corpus::CorpusSource& source,
                                                     const std::string& out_dir) {
  if (source.format != corpus::SourceFormat::tsv_pairs) return corpus::read_documents(source);
  std::string rendered = out_dir + "/render/" + source.id;
  require(std::filesystem::exists(rendered + "/manifest.json"),
          "source \"", source.id, "\" needs rendered documents at ", rendered,
          "; run the render stage first");
  return corpus::read_shards(rendered, "xling", source.id);
}

}  // namespace detail

inline StageResult run_plan(const cfg::RunConfig& config, const std::string& out_dir) {
  require(config.budget > 0, "plan stage needs a budget");
  require(!config.sources.empty(), "plan stage needs sources");
  auto plan = mixture::plan_mixture(config.sources, config.policy, config.budget);
  std::string dir = detail::stage_dir(out_dir, Stage::plan);
  mixture::save_plan(plan, dir + "/plan.json");
  detail::write_provenance(dir, config, "plan", derive_seed(config.seed, "plan"));
  StageResult r{"plan", dir, mixture::plan_to_json(plan)};
  return r;
}

inline StageResult run_render(const cfg::RunConfig& config, const std::string& out_dir) {
  std::string dir = detail::stage_dir(out_dir, Stage::render);
  std::uint64_t pairs_total = 0, docs_total = 0, sources_rendered = 0;
  for (const auto& source : config.sources) {
    if (source.format != corpus::SourceFormat::tsv_pairs) continue;
    ++sources_rendered;
    auto pairs = xling::read_pairs(source);
    pairs_total += pairs.size();
    corpus::WriteOptions opt;
    opt.shard_size_docs = 10000;
    opt.created_at = 0;  // rerun-identical artifacts
    corpus::ShardWriter writer(dir + "/" + source.id, opt);
    docs_total += xling::render_all(
        pairs, [&](corpus::Document&& d) { writer.add(d); }, config.xling.language_names);
    writer.finish();
  }
  require(sources_rendered > 0, "render stage: no tsv-pairs source in the config");
  detail::write_provenance(dir, config, "render", derive_seed(config.seed, "render"));
  StageResult r{"render", dir, {}};
  r.summary["pairs"] = pairs_total;
  r.summary["documents"] = docs_total;
  return r;
}

inline StageResult run_train_tokenizer(const cfg::RunConfig& config, const std::string& out_dir) {
  std::map<std::string, std::vector<corpus::Document>> by_lang;
  std::vector<std::string> languages = config.tokenizer.languages;
  for (const auto& source : config.sources) {
    if (source.format == corpus::SourceFormat::tsv_pairs) continue;
    if (!languages.empty() &&
        std::find(languages.begin(), languages.end(), source.lang) == languages.end())
      continue;
    auto docs = corpus::read_documents(source);
    auto& bucket = by_lang[source.lang];
    bucket.insert(bucket.end(), std::make_move_iterator(docs.begin()),
                  std::make_move_iterator(docs.end()));
  }
  bpe::TrainOptions opt;
  opt.vocab_size = config.tokenizer.vocab_size;
  opt.sample_chars_per_lang = config.tokenizer.sample_chars_per_lang;
  opt.seed = derive_seed(config.seed, "train-tokenizer");
  auto model = bpe::train(by_lang, opt);
  std::string dir = detail::stage_dir(out_dir, Stage::train_tokenizer);
  bpe::save_model(model, dir + "/tokenizer.json");
  detail::write_provenance(dir, config, "train-tokenizer", opt.seed);
  StageResult r{"train-tokenizer", dir, {}};
  r.summary["vocab_size"] = model.vocab_size();
  r.summary["merges"] = model.merges.size();
  r.summary["languages"] = by_lang.size();
  return r;
}

inline StageResult run_tokenize(const cfg::RunConfig& config, const std::string& out_dir) {
  std::string plan_path = out_dir + "/plan/plan.json";
  require(std::filesystem::exists(plan_path), "tokenize stage needs ", plan_path,
          "; run the plan stage first");
  std::string model_path = out_dir + "/train-tokenizer/tokenizer.json";
  require(std::filesystem::exists(model_path), "tokenize stage needs ", model_path,
          "; run the train-tokenizer stage first");
  auto plan = mixture::load_plan(plan_path);
  auto model = bpe::load_model(model_path);

  std::map<std::string, std::vector<corpus::Document>> docs_by_source;
  for (const auto& source : config.sources)
    docs_by_source[source.id] = detail::docs_for_source(source, out_dir);

  auto stream = mixture::materialize(plan, docs_by_source, derive_seed(config.seed, "tokenize"));

  std::string dir = detail::stage_dir(out_dir, Stage::tokenize);
  std::ofstream out(dir + "/tokens.jsonl", std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write ", dir, "/tokens.jsonl");
  bpe::Encoder encoder(model);
  std::uint64_t total_tokens = 0;
  for (const auto& doc : stream) {
    auto ids = encoder.encode(doc.text);
    total_tokens += ids.size();
    nlohmann::ordered_json line;
    line["id"] = doc.id;
    line["ids"] = ids;
    out << line.dump() << "\n";
  }
  require(out.good(), "write failure on ", dir, "/tokens.jsonl");
  out.close();

  nlohmann::ordered_json stats;
  stats["documents"] = stream.size();
  stats["tokens"] = total_tokens;
  {
    std::ofstream sout(dir + "/stats.json", std::ios::binary | std::ios::trunc);
    sout << stats.dump(2) << "\n";
  }
  detail::write_provenance(dir, config, "tokenize", derive_seed(config.seed, "tokenize"));
  return StageResult{"tokenize", dir, stats};
}

inline StageResult run_pack(const cfg::RunConfig& config, const std::string& out_dir,
                            unsigned workers = 1) {
  std::string tokens_path = out_dir + "/tokenize/tokens.jsonl";
  require(std::filesystem::exists(tokens_path), "pack stage needs ", tokens_path,
          "; run the tokenize stage first");
  std::string model_path = out_dir + "/train-tokenizer/tokenizer.json";
  require(std::filesystem::exists(model_path), "pack stage needs ", model_path,
          "; run the train-tokenizer stage first");

  std::vector<pack::DocTokens> docs;
  {
    std::ifstream in(tokens_path, std::ios::binary);
    std::string line;
    std::uint64_t record = 0;
    while (std::getline(in, line)) {
      ++record;
      if (line.empty()) continue;
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      require(!j.is_discarded(), tokens_path, " record ", record, ": malformed JSON");
      pack::DocTokens d;
      d.id = j.at("id").get<std::string>();
      d.ids = j.at("ids").get<std::vector<std::uint32_t>>();
      docs.push_back(std::move(d));
    }
  }

  pack::PackingConfig packing = config.packing;
  packing.vocab_size = bpe::load_model(model_path).vocab_size();

  pack::PackStats stats;
  auto flat = pack::pack_sequences(docs, packing, stats, workers);
  std::string dir = detail::stage_dir(out_dir, Stage::pack);
  pack::write_shard(dir + "/sequences.bin", flat, packing.sequence_length);

  nlohmann::ordered_json summary;
  summary["documents"] = docs.size();
  summary["input_tokens"] = stats.input_tokens;
  summary["eos_added"] = stats.eos_added;
  summary["pad_added"] = stats.pad_added;
  summary["sequences"] = stats.sequences;
  summary["sequence_length"] = packing.sequence_length;
  summary["global_batch_size"] = config.global_batch_size;
  if (stats.sequences > 0) {
    auto ledger = pack::ledger(stats.sequences * packing.sequence_length,
                               config.global_batch_size, packing.sequence_length);
    summary["tokens_per_step"] = ledger.tokens_per_step;
    summary["total_tokens"] = ledger.total_tokens;
    summary["steps"] = ledger.steps;
  } else {
    summary["tokens_per_step"] = config.global_batch_size * packing.sequence_length;
    summary["total_tokens"] = 0;
    summary["steps"] = 0;
  }
  {
    std::ofstream lout(dir + "/ledger.json", std::ios::binary | std::ios::trunc);
    lout << summary.dump(2) << "\n";
  }
  detail::write_provenance(dir, config, "pack", derive_seed(config.seed, "pack"));
  return StageResult{"pack", dir, summary};
}

/// Runs the requested stages in dependency order against one output tree.
/// Reruns with the same config and seed rewrite byte-identical artifacts.
inline std::vector<StageResult> run(const cfg::RunConfig& config,
                                    const std::vector<Stage>& stages,
                                    const std::string& out_dir, unsigned workers = 1) {
  std::filesystem::create_directories(out_dir);
  std::vector<StageResult> results;
  for (Stage s : stages) {
    switch (s) {
      case Stage::plan: results.push_back(run_plan(config, out_dir)); break;
      case Stage::render: results.push_back(run_render(config, out_dir)); break;
      case Stage::train_tokenizer: results.push_back(run_train_tokenizer(config, out_dir)); break;
      case Stage::tokenize: results.push_back(run_tokenize(config, out_dir)); break;
      case Stage::pack: results.push_back(run_pack(config, out_dir, workers)); break;
    }
  }
  return results;
}

}  // namespace ptk::pipeline
