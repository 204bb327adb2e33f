// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "ptk/error.hpp"
#include "ptk/rng.hpp"
#include "ptk/xlingual.hpp"

namespace ptk::judge {

// ---------------------------------------------------------------------------
// Open-ended generation prompts

struct GenerationTask {
  std::string title;
  std::string prompt_prefix = "Seuraava teksti on kirjoitettu suomeksi: ";
  int repetitions = 5;
  enum class Category { news, academic, other } category = Category::other;
};

inline std::string build_generation_prompt(const GenerationTask& task) {
  require(!task.title.empty(), "generation task needs a title");
  require(task.repetitions >= 1, "generation task needs repetitions >= 1");
  return task.prompt_prefix + task.title;
}

// ---------------------------------------------------------------------------
// Pairwise judging

/// The fixed instruction block sent to the judge model. The verdict format
/// ("[[A]]" / "[[B]]", no ties allowed) is what parse_verdict matches.
inline constexpr const char* kJudgeInstructions =
    "Please act as an impartial judge and evaluate the quality of two Finnish texts. "
    "Your evaluation should consider these three factors:\n"
    "1. Vocabulary Usage: Wide range of vocabulary used effectively, including more "
    "specialized terms.\n"
    "2. Grammatical Correctness: Strong grammatical skills; errors are rare and minor.\n"
    "3. Coherence: The text is well-structured and coherent throughout.\n"
    "\n"
    "Begin your evaluation by comparing the two texts and provide a short explanation. "
    "Avoid any position biases and ensure that the order in which the texts were presented "
    "does not influence your decision. Be as objective as possible. You are not allowed to "
    "declare a tie. After providing your explanation, output your final verdict by strictly "
    "following this format: \"[[A]]\" if Text A is better, \"[[B]]\" if Text B is better.";

inline std::string build_judge_prompt(std::string_view text_first, std::string_view text_second) {
  require(!text_first.empty() && !text_second.empty(), "judge prompt needs two non-empty texts");
  std::string prompt = kJudgeInstructions;
  prompt += "\n\nText A:\n";
  prompt += text_first;
  prompt += "\n\nText B:\n";
  prompt += text_second;
  return prompt;
}

enum class Pick { A, B, invalid };

/// The last verdict marker in the response wins; judges ramble.
inline Pick parse_verdict(std::string_view response) {
  auto a = response.rfind("[[A]]");
  auto b = response.rfind("[[B]]");
  if (a == std::string_view::npos && b == std::string_view::npos) return Pick::invalid;
  if (a == std::string_view::npos) return Pick::B;
  if (b == std::string_view::npos) return Pick::A;
  return a > b ? Pick::A : Pick::B;
}

struct JudgePair {
  std::string pair_id;
  std::string model_a;
  std::string model_b;
  std::string text_a;
  std::string text_b;
  std::string category = "other";

  void validate() const {
    require(!pair_id.empty(), "judge pair without pair_id");
    require(model_a != model_b, "pair \"", pair_id, "\": model_a equals model_b");
    require(!text_a.empty() && !text_b.empty(), "pair \"", pair_id, "\": empty text");
  }
};

enum class PairResult { win_a, win_b, tie, invalid };

inline const char* result_name(PairResult r) {
  switch (r) {
    case PairResult::win_a: return "win_a";
    case PairResult::win_b: return "win_b";
    case PairResult::tie: return "tie";
    case PairResult::invalid: return "invalid";
  }
  return "?";
}

struct JudgeOutcome {
  std::string pair_id;
  Pick first_pick = Pick::invalid;   // query with (text_a, text_b)
  Pick second_pick = Pick::invalid;  // query with the order swapped
  PairResult result = PairResult::invalid;
  std::string model_a;
  std::string model_b;
  std::string category;
  std::string note;  // failure reason for invalid outcomes
};

/// Combines the two picks. In the swapped query a pick of "A" names model_b,
/// so agreement on a model shows up as opposite raw picks.
inline PairResult combine_picks(Pick first, Pick second) {
  if (first == Pick::invalid || second == Pick::invalid) return PairResult::invalid;
  if (first == Pick::A && second == Pick::B) return PairResult::win_a;
  if (first == Pick::B && second == Pick::A) return PairResult::win_b;
  return PairResult::tie;  // the judge followed the position, not the text
}

/// Judge backend. submit() may throw; run_pairwise retries and then marks the
/// outcome invalid. Implementations over a fixed fake backend must be
/// deterministic so the protocol tests can replay transcripts.
class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual std::string submit(const std::string& prompt) = 0;
};

struct TranscriptEntry {
  std::string pair_id;
  int query_index = 0;  // 0 = original order, 1 = swapped
  std::string prompt;
  std::string response;
  bool failed = false;
};

struct RunOptions {
  int max_retries = 2;
  std::chrono::milliseconds retry_backoff{100};
  unsigned max_in_flight = 1;
  std::function<void(const TranscriptEntry&)> transcript;  // already serialized
};

namespace detail {

inline std::string submit_with_retry(JudgeClient& client, const std::string& prompt,
                                     const RunOptions& options, std::string& error_out) {
  for (int attempt = 0;; ++attempt) {
    try {
      return client.submit(prompt);
    } catch (const std::exception& e) {
      error_out = e.what();
      if (attempt >= options.max_retries) return std::string();
      if (options.retry_backoff.count() > 0)
        std::this_thread::sleep_for(options.retry_backoff * (attempt + 1));
    }
  }
}

}  // namespace detail

/// Queries the judge twice per pair, once in each order, and maps the picks
/// back to models. Outcomes are returned in input order whatever the worker
/// count.
inline std::vector<JudgeOutcome> run_pairwise(const std::vector<JudgePair>& pairs,
                                              JudgeClient& client,
                                              const RunOptions& options = {}) {
  for (const auto& p : pairs) p.validate();
  std::vector<JudgeOutcome> outcomes(pairs.size());
  std::mutex transcript_mu;

  auto judge_one = [&](std::size_t index) {
    const JudgePair& pair = pairs[index];
    JudgeOutcome out;
    out.pair_id = pair.pair_id;
    out.model_a = pair.model_a;
    out.model_b = pair.model_b;
    out.category = pair.category;

    std::string error;
    for (int query = 0; query < 2; ++query) {
      const std::string prompt = query == 0 ? build_judge_prompt(pair.text_a, pair.text_b)
                                            : build_judge_prompt(pair.text_b, pair.text_a);
      std::string response = detail::submit_with_retry(client, prompt, options, error);
      bool failed = response.empty() && !error.empty();
      if (options.transcript) {
        TranscriptEntry entry{pair.pair_id, query, prompt, response, failed};
        std::lock_guard<std::mutex> lock(transcript_mu);
        options.transcript(entry);
      }
      Pick pick = failed ? Pick::invalid : parse_verdict(response);
      if (query == 0)
        out.first_pick = pick;
      else
        out.second_pick = pick;
      if (failed) {
        out.note = concat("transport failure after ", options.max_retries + 1,
                          " attempts: ", error);
        break;
      }
    }
    out.result = combine_picks(out.first_pick, out.second_pick);
    outcomes[index] = std::move(out);
  };

  unsigned workers = std::max(1u, options.max_in_flight);
  if (workers == 1 || pairs.size() < 2) {
    for (std::size_t i = 0; i < pairs.size(); ++i) judge_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) {
      threads.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < pairs.size(); i = next.fetch_add(1))
          judge_one(i);
      });
    }
    for (auto& t : threads) t.join();
  }
  return outcomes;
}

// ---------------------------------------------------------------------------
// Win / tie accounting

struct CategoryRates {
  std::uint64_t valid = 0;
  std::uint64_t wins = 0;   // wins for the baseline model
  std::uint64_t ties = 0;
  double win_pct = 0;
  double tie_pct = 0;
  double loss_pct = 0;
};

struct RatesReport {
  std::map<std::string, CategoryRates> by_category;
  CategoryRates overall;
  std::uint64_t invalid_excluded = 0;
};

/// Win / tie percentages of `baseline` over the valid outcomes, per category.
/// Invalid outcomes are excluded from the denominators and reported.
inline RatesReport win_tie_rates(const std::vector<JudgeOutcome>& outcomes,
                                 const std::string& baseline) {
  require(!outcomes.empty(), "win_tie_rates: no outcomes");
  RatesReport report;
  for (const auto& o : outcomes) {
    if (o.result == PairResult::invalid) {
      ++report.invalid_excluded;
      continue;
    }
    require(o.model_a == baseline || o.model_b == baseline, "outcome \"", o.pair_id,
            "\" does not involve baseline \"", baseline, "\"");
    bool baseline_won = (o.result == PairResult::win_a && o.model_a == baseline) ||
                        (o.result == PairResult::win_b && o.model_b == baseline);
    for (CategoryRates* rates : {&report.by_category[o.category], &report.overall}) {
      ++rates->valid;
      if (o.result == PairResult::tie)
        ++rates->ties;
      else if (baseline_won)
        ++rates->wins;
    }
  }
  require(report.overall.valid > 0, "win_tie_rates: every outcome is invalid");
  auto finalize = [](CategoryRates& r) {
    r.win_pct = 100.0 * static_cast<double>(r.wins) / static_cast<double>(r.valid);
    r.tie_pct = 100.0 * static_cast<double>(r.ties) / static_cast<double>(r.valid);
    r.loss_pct = 100.0 - r.win_pct - r.tie_pct;
  };
  for (auto& [_, rates] : report.by_category) finalize(rates);
  finalize(report.overall);
  return report;
}

// ---------------------------------------------------------------------------
// Few-shot translation prompts

/// k shots sampled without replacement (seeded), one "<src>=<trg>" line each,
/// then the query source with a trailing "=" for the model to complete.
inline std::string build_translation_prompt(const std::vector<xling::TranslationPair>& shots,
                                            const std::string& query_src, std::uint64_t seed,
                                            std::size_t k = 8) {
  require(!query_src.empty(), "translation prompt needs a query source text");
  require(shots.size() >= k, "translation prompt: shot pool has ", shots.size(),
          " pairs, need ", k);
  std::vector<std::uint32_t> indices(shots.size());
  for (std::uint32_t i = 0; i < indices.size(); ++i) indices[i] = i;
  Rng rng(seed);
  auto chosen = rng.sample(indices, k);
  std::string prompt;
  for (std::uint32_t idx : chosen) {
    prompt += shots[idx].src_text;
    prompt += '=';
    prompt += shots[idx].tgt_text;
    prompt += '\n';
  }
  prompt += query_src;
  prompt += '=';
  return prompt;
}

// ---------------------------------------------------------------------------
// Pair / outcome files

inline std::vector<JudgePair> read_pairs_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open pair file: ", path);
  std::vector<JudgePair> pairs;
  std::string line;
  std::uint64_t record = 0;
  while (std::getline(in, line)) {
    ++record;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    require(!j.is_discarded(), path, " record ", record, ": malformed JSON");
    JudgePair p;
    p.pair_id = j.at("pair_id").get<std::string>();
    p.model_a = j.at("model_a").get<std::string>();
    p.model_b = j.at("model_b").get<std::string>();
    p.text_a = j.at("text_a").get<std::string>();
    p.text_b = j.at("text_b").get<std::string>();
    p.category = j.value("category", "other");
    p.validate();
    pairs.push_back(std::move(p));
  }
  return pairs;
}

inline const char* pick_name(Pick p) {
  switch (p) {
    case Pick::A: return "A";
    case Pick::B: return "B";
    case Pick::invalid: return "invalid";
  }
  return "?";
}

inline nlohmann::ordered_json outcome_to_json(const JudgeOutcome& o) {
  nlohmann::ordered_json j;
  j["pair_id"] = o.pair_id;
  j["first_pick"] = pick_name(o.first_pick);
  j["second_pick"] = pick_name(o.second_pick);
  j["result"] = result_name(o.result);
  j["model_a"] = o.model_a;
  j["model_b"] = o.model_b;
  j["category"] = o.category;
  if (!o.note.empty()) j["note"] = o.note;
  return j;
}

inline JudgeOutcome outcome_from_json(const nlohmann::json& j) {
  JudgeOutcome o;
  o.pair_id = j.at("pair_id").get<std::string>();
  auto pick = [](const std::string& s) {
    if (s == "A") return Pick::A;
    if (s == "B") return Pick::B;
    return Pick::invalid;
  };
  o.first_pick = pick(j.at("first_pick").get<std::string>());
  o.second_pick = pick(j.at("second_pick").get<std::string>());
  std::string r = j.at("result").get<std::string>();
  o.result = r == "win_a"   ? PairResult::win_a
             : r == "win_b" ? PairResult::win_b
             : r == "tie"   ? PairResult::tie
                            : PairResult::invalid;
  o.model_a = j.at("model_a").get<std::string>();
  o.model_b = j.at("model_b").get<std::string>();
  o.category = j.value("category", "other");
  o.note = j.value("note", "");
  return o;
}

inline void write_outcomes_jsonl(const std::vector<JudgeOutcome>& outcomes,
                                 const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write outcomes: ", path);
  for (const auto& o : outcomes) out << outcome_to_json(o).dump() << "\n";
}

inline std::vector<JudgeOutcome> read_outcomes_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open outcomes: ", path);
  std::vector<JudgeOutcome> outcomes;
  std::string line;
  std::uint64_t record = 0;
  while (std::getline(in, line)) {
    ++record;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    require(!j.is_discarded(), path, " record ", record, ": malformed JSON");
    outcomes.push_back(outcome_from_json(j));
  }
  return outcomes;
}

}  // namespace ptk::judge
