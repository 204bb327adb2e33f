// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "ptk/corpus.hpp"
#include "ptk/error.hpp"
#include "ptk/metrics.hpp"
#include "ptk/mixture.hpp"
#include "ptk/packing.hpp"
#include "ptk/rational.hpp"
#include "ptk/schedule.hpp"
#include "ptk/sha256.hpp"
#include "ptk/xlingual.hpp"

namespace ptk::cfg {

struct TokenizerConfig {
  std::uint32_t vocab_size = 131072;
  std::uint64_t sample_chars_per_lang = 0;  // 0 = smallest language
  std::vector<std::string> languages;       // empty = every non-pair source language
};

struct XlingConfig {
  xling::LanguageNames language_names = xling::default_language_names();
};

struct RunConfig {
  std::uint64_t budget = 0;
  std::uint64_t seed = 0;
  std::vector<corpus::CorpusSource> sources;
  mixture::SamplingPolicy policy;
  XlingConfig xling;
  TokenizerConfig tokenizer;
  pack::PackingConfig packing;  // vocab_size is bound to the trained tokenizer later
  std::uint64_t global_batch_size = 2048;
  sched::ScheduleConfig schedule;
  sched::EnergyModel energy;
  bool has_energy = false;
  metrics::BleuConfig bleu;

  std::string config_path;
  std::string config_sha256;
};

struct ValidationResult {
  RunConfig config;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

namespace detail {

/// Accepts JSON numbers and strings; strings go through the exact rational
/// parser so values like "1.5" or "1e12" carry no float artifacts.
inline Rational rational_from_json(const nlohmann::json& j) {
  if (j.is_string()) return Rational::parse(j.get<std::string>());
  if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
  if (j.is_number_unsigned()) return Rational(static_cast<std::int64_t>(j.get<std::uint64_t>()));
  if (j.is_number_float()) return Rational::parse(j.dump());  // shortest round-trip text
  fail("expected a number or numeric string, got ", j.dump());
}

inline std::uint64_t u64_from_json(const nlohmann::json& j) {
  Rational r = rational_from_json(j);
  require(r.is_integer() && r.num() >= 0, "expected a non-negative integer, got ", j.dump());
  return static_cast<std::uint64_t>(r.num());
}

/// Relative paths inside a config resolve against the config file's
/// directory, so a config tree works from any working directory.
inline std::string resolve_path(const std::string& config_path, const std::string& p) {
  std::filesystem::path candidate(p);
  if (candidate.is_absolute()) return candidate.lexically_normal().string();
  return (std::filesystem::path(config_path).parent_path() / candidate)
      .lexically_normal()
      .string();
}

class Collector {
 public:
  explicit Collector(std::vector<std::string>& errors) : errors_(errors) {}

  template <typename Fn>
  void apply(const std::string& where, Fn&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      errors_.push_back(where + ": " + e.what());
    }
  }

  void reject_unknown(const nlohmann::json& j, const std::string& where,
                      const std::set<std::string>& known) {
    for (auto& [key, _] : j.items())
      if (!known.count(key)) errors_.push_back(where + ": unknown key \"" + key + "\"");
  }

 private:
  std::vector<std::string>& errors_;
};

}  // namespace detail

/// Full-file validation: collects every problem it can find instead of
/// stopping at the first, and checks that every referenced file exists.
inline ValidationResult validate(const std::string& path) {
  ValidationResult result;
  RunConfig& cfg = result.config;
  cfg.config_path = path;
  detail::Collector check(result.errors);

  std::ifstream in(path, std::ios::binary);
  if (!in.good()) {
    result.errors.push_back("cannot open config file: " + path);
    return result;
  }
  std::string raw((std::istreambuf_iterator<char>(in)), {});
  cfg.config_sha256 = Sha256::hex_digest(raw);
  nlohmann::json j = nlohmann::json::parse(raw, nullptr, false);
  if (j.is_discarded()) {
    // re-parse with exceptions for the line/column diagnostics
    try {
      nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception& e) {
      result.errors.push_back(std::string("config parse error: ") + e.what());
    }
    return result;
  }

  check.reject_unknown(j, "config",
                       {"budget", "seed", "sources", "policy", "xling", "tokenizer", "packing",
                        "schedule", "energy", "eval"});

  if (j.contains("budget"))
    check.apply("budget", [&] { cfg.budget = detail::u64_from_json(j["budget"]); });
  if (j.contains("seed"))
    check.apply("seed", [&] { cfg.seed = detail::u64_from_json(j["seed"]); });

  if (j.contains("sources")) {
    check.apply("sources", [&] {
      require(j["sources"].is_array(), "expected an array");
      std::size_t index = 0;
      for (const auto& s : j["sources"]) {
        std::string where = "sources[" + std::to_string(index++) + "]";
        check.reject_unknown(s, where, {"id", "lang", "format", "paths", "native_token_count"});
        check.apply(where, [&] {
          corpus::CorpusSource src;
          src.id = s.at("id").get<std::string>();
          src.lang = s.at("lang").get<std::string>();
          if (s.contains("format")) src.format = corpus::parse_format(s["format"].get<std::string>());
          src.paths = s.at("paths").get<std::vector<std::string>>();
          require(!src.paths.empty(), "source \"", src.id, "\" has no paths");
          for (auto& p : src.paths) p = detail::resolve_path(path, p);
          if (s.contains("native_token_count"))
            src.native_token_count = detail::u64_from_json(s["native_token_count"]);
          for (const auto& p : src.paths)
            if (!std::filesystem::exists(p))
              result.errors.push_back(where + ": referenced file does not exist: " + p);
          for (const auto& other : cfg.sources)
            require(other.id != src.id, "duplicate source id \"", src.id, "\"");
          cfg.sources.push_back(std::move(src));
        });
      }
    });
  }

  if (j.contains("policy")) {
    const auto& p = j["policy"];
    check.reject_unknown(p, "policy", {"epoch_cap", "allow_cap_override", "epochs"});
    if (p.contains("epoch_cap"))
      check.apply("policy.epoch_cap", [&] {
        cfg.policy.epoch_cap = detail::rational_from_json(p["epoch_cap"]);
        require(cfg.policy.epoch_cap > Rational(0), "epoch_cap must be positive");
      });
    if (p.contains("allow_cap_override"))
      check.apply("policy.allow_cap_override",
                  [&] { cfg.policy.allow_cap_override = p["allow_cap_override"].get<bool>(); });
    if (p.contains("epochs")) {
      int auto_fills = 0;
      for (auto& [source_id, value] : p["epochs"].items()) {
        std::string where = "policy.epochs." + source_id;
        check.apply(where, [&] {
          if (value.is_string() && value.get<std::string>() == "auto-fill") {
            cfg.policy.epochs[source_id] = mixture::EpochSpec::fill();
            require(++auto_fills <= 1, "at most one source may be auto-fill");
            return;
          }
          Rational epochs = detail::rational_from_json(value);
          require(epochs > Rational(0), "epochs must be positive");
          cfg.policy.epochs[source_id] = mixture::EpochSpec::fixed(epochs);
        });
      }
    }
    check.apply("policy", [&] {
      for (const auto& [id, _] : cfg.policy.epochs) {
        bool known = false;
        for (const auto& s : cfg.sources) known = known || s.id == id;
        require(known, "epochs name unknown source \"", id, "\"");
      }
      for (const auto& s : cfg.sources)
        require(cfg.policy.epochs.count(s.id) > 0, "source \"", s.id,
                "\" has no epoch multiplier");
    });
  }

  if (j.contains("xling")) {
    const auto& x = j["xling"];
    check.reject_unknown(x, "xling", {"language_names"});
    if (x.contains("language_names"))
      check.apply("xling.language_names", [&] {
        cfg.xling.language_names.clear();
        for (auto& [tag, name] : x["language_names"].items())
          cfg.xling.language_names[tag] = name.get<std::string>();
      });
  }

  if (j.contains("tokenizer")) {
    const auto& t = j["tokenizer"];
    check.reject_unknown(t, "tokenizer", {"vocab_size", "sample_chars_per_lang", "languages"});
    if (t.contains("vocab_size"))
      check.apply("tokenizer.vocab_size", [&] {
        cfg.tokenizer.vocab_size = static_cast<std::uint32_t>(detail::u64_from_json(t["vocab_size"]));
        require(cfg.tokenizer.vocab_size >= 257, "vocab_size must be at least 257");
      });
    if (t.contains("sample_chars_per_lang"))
      check.apply("tokenizer.sample_chars_per_lang", [&] {
        cfg.tokenizer.sample_chars_per_lang = detail::u64_from_json(t["sample_chars_per_lang"]);
      });
    if (t.contains("languages"))
      check.apply("tokenizer.languages",
                  [&] { cfg.tokenizer.languages = t["languages"].get<std::vector<std::string>>(); });
  }

  if (j.contains("packing")) {
    const auto& p = j["packing"];
    check.reject_unknown(p, "packing",
                         {"sequence_length", "global_batch_size", "eos_id", "pad_id",
                          "cross_document_packing"});
    check.apply("packing", [&] {
      if (p.contains("sequence_length"))
        cfg.packing.sequence_length =
            static_cast<std::uint32_t>(detail::u64_from_json(p["sequence_length"]));
      require(cfg.packing.sequence_length > 0, "sequence_length must be positive");
      if (p.contains("global_batch_size"))
        cfg.global_batch_size = detail::u64_from_json(p["global_batch_size"]);
      require(cfg.global_batch_size > 0, "global_batch_size must be positive");
      if (p.contains("eos_id"))
        cfg.packing.eos_id = static_cast<std::uint32_t>(detail::u64_from_json(p["eos_id"]));
      if (p.contains("pad_id"))
        cfg.packing.pad_id = static_cast<std::uint32_t>(detail::u64_from_json(p["pad_id"]));
      if (p.contains("cross_document_packing"))
        cfg.packing.cross_document_packing = p["cross_document_packing"].get<bool>();
      require(cfg.packing.eos_id < cfg.tokenizer.vocab_size, "eos_id out of vocabulary range");
      require(cfg.packing.pad_id < cfg.tokenizer.vocab_size, "pad_id out of vocabulary range");
    });
  }

  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    check.reject_unknown(s, "schedule",
                         {"max_lr", "min_lr", "warmup_tokens", "decay_end_tokens", "style"});
    check.apply("schedule", [&] {
      if (s.contains("max_lr")) cfg.schedule.max_lr = s["max_lr"].get<double>();
      if (s.contains("min_lr")) cfg.schedule.min_lr = s["min_lr"].get<double>();
      if (s.contains("warmup_tokens"))
        cfg.schedule.warmup_tokens = detail::u64_from_json(s["warmup_tokens"]);
      if (s.contains("decay_end_tokens"))
        cfg.schedule.decay_end_tokens = detail::u64_from_json(s["decay_end_tokens"]);
      if (s.contains("style"))
        require(s["style"].get<std::string>() == "cosine", "only the cosine style is supported");
      cfg.schedule.validate();
    });
  }

  if (j.contains("energy")) {
    const auto& e = j["energy"];
    check.reject_unknown(e, "energy",
                         {"device_count", "device_power_watts", "pue",
                          "carbon_intensity_kg_per_kwh", "throughput_tokens_per_sec"});
    check.apply("energy", [&] {
      cfg.energy.device_count = detail::u64_from_json(e.at("device_count"));
      cfg.energy.device_power_watts = e.at("device_power_watts").get<double>();
      if (e.contains("pue")) cfg.energy.pue = e["pue"].get<double>();
      if (e.contains("carbon_intensity_kg_per_kwh"))
        cfg.energy.carbon_intensity_kg_per_kwh = e["carbon_intensity_kg_per_kwh"].get<double>();
      cfg.energy.throughput_tokens_per_sec = e.at("throughput_tokens_per_sec").get<double>();
      cfg.energy.validate();
      cfg.has_energy = true;
    });
  }

  if (j.contains("eval")) {
    const auto& ev = j["eval"];
    check.reject_unknown(ev, "eval", {"bleu"});
    if (ev.contains("bleu")) {
      const auto& b = ev["bleu"];
      check.reject_unknown(b, "eval.bleu", {"max_order", "smoothing", "k"});
      check.apply("eval.bleu", [&] {
        if (b.contains("max_order")) cfg.bleu.max_order = b["max_order"].get<int>();
        require(cfg.bleu.max_order >= 1, "max_order must be >= 1");
        if (b.contains("smoothing")) {
          auto s = b["smoothing"].get<std::string>();
          if (s == "none")
            cfg.bleu.smoothing = metrics::BleuSmoothing::none;
          else if (s == "add-k")
            cfg.bleu.smoothing = metrics::BleuSmoothing::add_k;
          else
            fail("unknown smoothing \"", s, "\" (expected none or add-k)");
        }
        if (b.contains("k")) cfg.bleu.k = b["k"].get<double>();
      });
    }
  }

  return result;
}

}  // namespace ptk::cfg
