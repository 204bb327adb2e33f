// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ptk/corpus.hpp"
#include "ptk/error.hpp"
#include "ptk/rational.hpp"
#include "ptk/rng.hpp"

namespace ptk::mixture {

/// Per-source multiplier: a fixed number of epochs, or auto-fill (take
/// whatever budget remains after the fixed sources).
struct EpochSpec {
  bool auto_fill = false;
  Rational epochs = 1;

  static EpochSpec fixed(Rational e) { return {false, e}; }
  static EpochSpec fill() { return {true, 0}; }
};

struct SamplingPolicy {
  std::map<std::string, EpochSpec> epochs;  // keyed by source id
  Rational epoch_cap = 4;
  bool allow_cap_override = false;
};

struct PlannedSource {
  std::string id;
  std::string lang;
  std::uint64_t native_tokens = 0;
  Rational epochs;
  std::uint64_t sampled_tokens = 0;
  Rational proportion;           // of total sampled tokens
  Rational original_proportion;  // of total native tokens
  bool auto_filled = false;
  bool clamped = false;
};

struct MixturePlan {
  std::vector<PlannedSource> sources;
  std::uint64_t total_sampled_tokens = 0;
  std::uint64_t total_native_tokens = 0;
  std::uint64_t budget = 0;
  std::vector<std::string> warnings;

  const PlannedSource* find(const std::string& id) const {
    for (const auto& s : sources)
      if (s.id == id) return &s;
    return nullptr;
  }
};

/// Percent with one decimal, rounded half-up from the exact rational
/// (e.g. 128/990 -> 12.9).
inline double percent_1dp(const Rational& proportion) {
  return static_cast<double>(proportion.round_scaled(1000)) / 10.0;
}

inline MixturePlan plan_mixture(const std::vector<corpus::CorpusSource>& sources,
                                const SamplingPolicy& policy, std::uint64_t budget) {
  require(budget > 0, "plan_mixture: budget must be positive");
  require(policy.epoch_cap > Rational(0), "plan_mixture: epoch_cap must be positive");
  for (const auto& [id, spec] : policy.epochs) {
    bool known = false;
    for (const auto& s : sources) known = known || s.id == id;
    require(known, "policy names unknown source \"", id, "\"");
  }

  MixturePlan plan;
  plan.budget = budget;
  int auto_fill_count = 0;
  std::uint64_t fixed_total = 0;

  for (const auto& src : sources) {
    require(src.native_token_count > 0, "source \"", src.id,
            "\" cannot enter a mixture plan without a positive native_token_count");
    auto it = policy.epochs.find(src.id);
    require(it != policy.epochs.end(), "no epoch multiplier for source \"", src.id, "\"");
    PlannedSource p;
    p.id = src.id;
    p.lang = src.lang;
    p.native_tokens = src.native_token_count;
    if (it->second.auto_fill) {
      ++auto_fill_count;
      require(auto_fill_count <= 1, "at most one source may be auto-fill");
      p.auto_filled = true;
    } else {
      const Rational& e = it->second.epochs;
      require(e > Rational(0), "source \"", src.id, "\": epochs must be positive");
      require(e <= policy.epoch_cap || policy.allow_cap_override, "source \"", src.id,
              "\": epochs ", e.str(), " exceed the cap ", policy.epoch_cap.str(),
              " (set allow_cap_override to permit this)");
      p.epochs = e;
      p.sampled_tokens =
          static_cast<std::uint64_t>(e.floor_mul(static_cast<std::int64_t>(src.native_token_count)));
      fixed_total += p.sampled_tokens;
    }
    plan.total_native_tokens += p.native_tokens;
    plan.sources.push_back(std::move(p));
  }

  require(fixed_total <= budget, "fixed sources already use ", fixed_total,
          " tokens, more than the budget ", budget);

  for (auto& p : plan.sources) {
    if (!p.auto_filled) continue;
    std::uint64_t remaining = budget - fixed_total;
    Rational needed(static_cast<std::int64_t>(remaining),
                    static_cast<std::int64_t>(p.native_tokens));
    if (needed > policy.epoch_cap) {
      require(policy.allow_cap_override, "auto-fill source \"", p.id, "\" would need ",
              needed.str(), " epochs, above the cap ", policy.epoch_cap.str(),
              " (set allow_cap_override to clamp at the cap)");
      plan.warnings.push_back(concat("auto-fill source \"", p.id, "\" clamped to ",
                                     policy.epoch_cap.str(), " epochs (needed ", needed.str(),
                                     "); plan falls short of the budget"));
      p.epochs = policy.epoch_cap;
      p.clamped = true;
    } else {
      p.epochs = needed;
    }
    p.sampled_tokens = static_cast<std::uint64_t>(
        p.epochs.floor_mul(static_cast<std::int64_t>(p.native_tokens)));
  }

  for (const auto& p : plan.sources) plan.total_sampled_tokens += p.sampled_tokens;
  require(plan.total_sampled_tokens > 0, "plan samples zero tokens");
  for (auto& p : plan.sources) {
    p.proportion = Rational(static_cast<std::int64_t>(p.sampled_tokens),
                            static_cast<std::int64_t>(plan.total_sampled_tokens));
    p.original_proportion = Rational(static_cast<std::int64_t>(p.native_tokens),
                                     static_cast<std::int64_t>(plan.total_native_tokens));
  }
  return plan;
}

// --------------------------------------------------------------------------
// Plan file: the sampled-vs-original distribution report, and the input to
// materialization.

inline nlohmann::ordered_json plan_to_json(const MixturePlan& plan) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["budget"] = plan.budget;
  j["total_native_tokens"] = plan.total_native_tokens;
  j["total_sampled_tokens"] = plan.total_sampled_tokens;
  j["sources"] = nlohmann::ordered_json::array();
  for (const auto& s : plan.sources) {
    nlohmann::ordered_json e;
    e["id"] = s.id;
    e["lang"] = s.lang;
    e["native_tokens"] = s.native_tokens;
    e["epochs"] = s.epochs.str();
    e["sampled_tokens"] = s.sampled_tokens;
    e["proportion"] = s.proportion.str();
    e["proportion_percent"] = percent_1dp(s.proportion);
    e["original_proportion_percent"] = percent_1dp(s.original_proportion);
    if (s.auto_filled) e["auto_filled"] = true;
    if (s.clamped) e["clamped"] = true;
    j["sources"].push_back(std::move(e));
  }
  if (!plan.warnings.empty()) j["warnings"] = plan.warnings;
  return j;
}

inline MixturePlan plan_from_json(const nlohmann::json& j) {
  MixturePlan plan;
  plan.budget = j.at("budget").get<std::uint64_t>();
  plan.total_native_tokens = j.at("total_native_tokens").get<std::uint64_t>();
  plan.total_sampled_tokens = j.at("total_sampled_tokens").get<std::uint64_t>();
  for (const auto& e : j.at("sources")) {
    PlannedSource s;
    s.id = e.at("id").get<std::string>();
    s.lang = e.at("lang").get<std::string>();
    s.native_tokens = e.at("native_tokens").get<std::uint64_t>();
    s.epochs = Rational::parse(e.at("epochs").get<std::string>());
    s.sampled_tokens = e.at("sampled_tokens").get<std::uint64_t>();
    s.proportion = Rational::parse(e.at("proportion").get<std::string>());
    s.auto_filled = e.value("auto_filled", false);
    s.clamped = e.value("clamped", false);
    require(s.sampled_tokens ==
                static_cast<std::uint64_t>(
                    s.epochs.floor_mul(static_cast<std::int64_t>(s.native_tokens))),
            "plan source \"", s.id, "\": sampled_tokens does not match epochs x native");
    plan.sources.push_back(std::move(s));
  }
  if (j.contains("warnings")) plan.warnings = j["warnings"].get<std::vector<std::string>>();
  return plan;
}

inline void save_plan(const MixturePlan& plan, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write plan file: ", path);
  out << plan_to_json(plan).dump(2) << "\n";
}

inline MixturePlan load_plan(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open plan file: ", path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("plan file ", path, ": ", e.what());
  }
  return plan_from_json(j);
}

// --------------------------------------------------------------------------
// Materialization

/// Realizes the plan over concrete documents. Each document is emitted
/// floor(epochs) times, plus once more if it lands in the seeded partial-pass
/// subset, which is filled until it covers frac(epochs) of the source's
/// measured tokens. Sources are then interleaved by a seeded draw weighted by
/// remaining tokens. Deterministic for a fixed (plan, seed).
inline std::vector<corpus::Document> materialize(
    const MixturePlan& plan,
    const std::map<std::string, std::vector<corpus::Document>>& docs_by_source,
    std::uint64_t seed, const corpus::TokenCounter& counter = corpus::whitespace_token_count) {
  struct SourceQueue {
    const std::vector<corpus::Document>* docs;
    std::vector<std::uint32_t> order;  // emission order, indices into *docs
    std::size_t next = 0;
    std::vector<std::uint64_t> doc_tokens;
    std::uint64_t remaining_tokens = 0;
  };

  std::vector<SourceQueue> queues;
  for (const auto& s : plan.sources) {
    auto it = docs_by_source.find(s.id);
    require(it != docs_by_source.end(), "materialize: no documents supplied for source \"", s.id,
            "\"");
    const auto& docs = it->second;
    require(!docs.empty() || s.sampled_tokens == 0, "materialize: source \"", s.id,
            "\" has no documents");
    SourceQueue q;
    q.docs = &docs;
    q.doc_tokens.reserve(docs.size());
    std::uint64_t measured_total = 0;
    for (const auto& d : docs) {
      q.doc_tokens.push_back(counter(d));
      measured_total += q.doc_tokens.back();
    }

    std::int64_t full = s.epochs.floor();
    Rational frac = s.epochs - Rational(full);
    for (std::int64_t pass = 0; pass < full; ++pass)
      for (std::uint32_t i = 0; i < docs.size(); ++i) q.order.push_back(i);
    if (!frac.is_zero() && measured_total > 0) {
      Rational target = frac * Rational(static_cast<std::int64_t>(measured_total));
      std::vector<std::uint32_t> picks(docs.size());
      for (std::uint32_t i = 0; i < docs.size(); ++i) picks[i] = i;
      Rng rng(derive_seed(seed, "materialize:" + s.id));
      rng.shuffle(picks);
      Rational cum = 0;
      for (std::uint32_t idx : picks) {
        if (cum >= target) break;
        q.order.push_back(idx);
        cum = cum + Rational(static_cast<std::int64_t>(q.doc_tokens[idx]));
      }
    }
    for (std::uint32_t idx : q.order) q.remaining_tokens += q.doc_tokens[idx];
    queues.push_back(std::move(q));
  }

  std::uint64_t total_remaining = 0;
  for (const auto& q : queues) total_remaining += q.remaining_tokens;

  std::vector<corpus::Document> out;
  Rng interleave(derive_seed(seed, "interleave"));
  while (true) {
    // some queues can hold zero-token documents; flush them round-robin first
    bool emitted_empty = false;
    for (auto& q : queues) {
      while (q.next < q.order.size() && q.doc_tokens[q.order[q.next]] == 0) {
        out.push_back((*q.docs)[q.order[q.next]]);
        ++q.next;
        emitted_empty = true;
      }
    }
    if (total_remaining == 0) break;
    (void)emitted_empty;
    std::uint64_t r = interleave.below(total_remaining);
    for (auto& q : queues) {
      if (r < q.remaining_tokens) {
        std::uint32_t idx = q.order[q.next];
        out.push_back((*q.docs)[idx]);
        ++q.next;
        q.remaining_tokens -= q.doc_tokens[idx];
        total_remaining -= q.doc_tokens[idx];
        break;
      }
      r -= q.remaining_tokens;
    }
  }
  return out;
}

}  // namespace ptk::mixture
