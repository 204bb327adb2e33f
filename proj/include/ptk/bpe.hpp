// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "ptk/corpus.hpp"
#include "ptk/error.hpp"
#include "ptk/rational.hpp"
#include "ptk/rng.hpp"
#include "ptk/unicode.hpp"

namespace ptk::bpe {

inline constexpr std::uint32_t kByteAlphabetSize = 256;

/// Pretokenization rule identifier recorded in model files. The rule: split
/// at word boundaries keeping one preceding plain space with the following
/// piece, decimal digits one per piece, punctuation in runs, other whitespace
/// in runs. Pieces always concatenate back to the input.
inline constexpr const char* kPretokenizerId = "space-prefix-words-digits-v1";

// ---------------------------------------------------------------------------
// Byte <-> visible codepoint mapping, used only in the model file so that raw
// bytes (which need not be valid UTF-8) serialize as plain JSON strings.
// Printable bytes map to themselves; the rest shift into the U+0100 block.

namespace detail {

inline const std::array<char32_t, 256>& byte_to_cp_table() {
  static const std::array<char32_t, 256> table = [] {
    std::array<char32_t, 256> t{};
    auto printable = [](int b) {
      return (b >= 33 && b <= 126) || (b >= 161 && b <= 172) || (b >= 174 && b <= 255);
    };
    char32_t next = 256;
    for (int b = 0; b < 256; ++b) t[static_cast<std::size_t>(b)] = printable(b) ? static_cast<char32_t>(b) : next++;
    return t;
  }();
  return table;
}

inline const std::unordered_map<char32_t, std::uint8_t>& cp_to_byte_table() {
  static const std::unordered_map<char32_t, std::uint8_t> table = [] {
    std::unordered_map<char32_t, std::uint8_t> t;
    const auto& fwd = byte_to_cp_table();
    for (int b = 0; b < 256; ++b) t[fwd[static_cast<std::size_t>(b)]] = static_cast<std::uint8_t>(b);
    return t;
  }();
  return table;
}

}  // namespace detail

inline std::string bytes_to_visible(std::string_view raw) {
  std::string out;
  out.reserve(raw.size() * 2);
  const auto& table = detail::byte_to_cp_table();
  for (unsigned char b : raw) uni::append_utf8(out, table[b]);
  return out;
}

inline std::string visible_to_bytes(std::string_view visible) {
  std::string out;
  const auto& table = detail::cp_to_byte_table();
  std::size_t i = 0;
  char32_t cp;
  while (i < visible.size()) {
    std::size_t n = uni::decode_utf8(visible, i, cp);
    require(n > 0, "model file: invalid UTF-8 in token string");
    auto it = table.find(cp);
    require(it != table.end(), "model file: codepoint U+", std::hex, static_cast<std::uint32_t>(cp),
            " is not in the byte alphabet");
    out.push_back(static_cast<char>(it->second));
    i += n;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pretokenizer

inline std::vector<std::string_view> pretokenize(std::string_view text) {
  std::vector<std::string_view> pieces;
  std::size_t i = 0;
  const std::size_t n = text.size();
  char32_t cp;
  auto decode_at = [&](std::size_t pos) {
    std::size_t len = uni::decode_utf8(text, pos, cp);
    require(len > 0, "pretokenize: invalid UTF-8 at byte offset ", pos);
    return len;
  };
  while (i < n) {
    std::size_t len = decode_at(i);
    std::size_t start = i;
    if (uni::is_whitespace(cp)) {
      std::size_t last_start = i;
      while (i < n) {
        std::size_t l = decode_at(i);
        if (!uni::is_whitespace(cp)) break;
        last_start = i;
        i += l;
      }
      bool attach = i < n && i - last_start == 1 && text[last_start] == ' ';
      if (!attach) {
        pieces.push_back(text.substr(start, i - start));
        continue;
      }
      if (last_start > start) pieces.push_back(text.substr(start, last_start - start));
      start = last_start;  // the single space joins the following piece
    }
    // consume one non-whitespace piece starting at `start`
    len = decode_at(i);
    if (uni::is_letter(cp)) {
      while (i < n) {
        std::size_t l = decode_at(i);
        if (!uni::is_letter(cp)) break;
        i += l;
      }
    } else if (uni::is_digit(cp)) {
      i += len;
    } else {
      while (i < n) {
        std::size_t l = decode_at(i);
        if (uni::is_letter(cp) || uni::is_digit(cp) || uni::is_whitespace(cp)) break;
        i += l;
      }
    }
    pieces.push_back(text.substr(start, i - start));
  }
  return pieces;
}

// ---------------------------------------------------------------------------
// Model

struct TokenizerModel {
  std::vector<std::string> token_bytes;  // id -> raw byte sequence
  std::unordered_map<std::string, std::uint32_t> token_ids;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> merges;  // rank -> (left id, right id)
  std::unordered_map<std::uint64_t, std::uint32_t> merge_lookup;  // pair key -> merged id
  std::string pretokenizer_id = kPretokenizerId;

  std::uint32_t vocab_size() const { return static_cast<std::uint32_t>(token_bytes.size()); }

  static std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
    return (std::uint64_t{a} << 32) | b;
  }

  void rebuild_lookup() {
    token_ids.clear();
    for (std::uint32_t id = 0; id < token_bytes.size(); ++id) token_ids[token_bytes[id]] = id;
    merge_lookup.clear();
    for (std::uint32_t rank = 0; rank < merges.size(); ++rank)
      merge_lookup[pair_key(merges[rank].first, merges[rank].second)] = kByteAlphabetSize + rank;
  }

  void validate() const {
    require(token_bytes.size() >= kByteAlphabetSize, "model: vocabulary below the byte alphabet");
    for (std::uint32_t b = 0; b < kByteAlphabetSize; ++b)
      require(token_bytes[b] == std::string(1, static_cast<char>(b)),
              "model: token id ", b, " is not the corresponding base byte");
    require(token_bytes.size() == token_ids.size(), "model: duplicate token byte sequences");
    require(token_bytes.size() == kByteAlphabetSize + merges.size(),
            "model: merge count does not match vocabulary size");
    for (std::uint32_t rank = 0; rank < merges.size(); ++rank) {
      auto [a, b] = merges[rank];
      std::uint32_t merged = kByteAlphabetSize + rank;
      require(a < merged && b < merged, "model: merge ", rank, " references later tokens");
      require(token_bytes[merged] == token_bytes[a] + token_bytes[b],
              "model: merge ", rank, " does not concatenate to its token");
    }
  }
};

// ---------------------------------------------------------------------------
// Training

namespace trainer_detail {

struct Word {
  std::vector<std::uint32_t> syms;
  std::uint64_t count = 0;
};

struct HeapEntry {
  std::int64_t count;
  std::uint32_t a, b;
};

}  // namespace trainer_detail

/// Greedy BPE over pre-counted pieces: repeatedly merge the most frequent
/// adjacent symbol pair, ties broken by the lexicographically smallest
/// (left bytes, right bytes). Counts are maintained incrementally with a
/// lazy heap; the unit suite checks the merge sequence against a brute-force
/// recount oracle.
inline TokenizerModel train_from_counts(
    const std::unordered_map<std::string, std::uint64_t>& piece_counts,
    std::uint32_t vocab_size) {
  require(vocab_size >= kByteAlphabetSize + 1, "vocab_size must be at least ",
          kByteAlphabetSize + 1, " (byte alphabet + specials)");
  require(!piece_counts.empty(), "tokenizer training corpus is empty");

  using trainer_detail::HeapEntry;
  using trainer_detail::Word;

  TokenizerModel model;
  model.token_bytes.reserve(vocab_size);
  for (std::uint32_t b = 0; b < kByteAlphabetSize; ++b)
    model.token_bytes.emplace_back(1, static_cast<char>(b));

  std::vector<Word> words;
  words.reserve(piece_counts.size());
  for (const auto& [piece, count] : piece_counts) {
    Word w;
    w.count = count;
    w.syms.reserve(piece.size());
    for (unsigned char c : piece) w.syms.push_back(c);
    if (w.syms.size() >= 2) words.push_back(std::move(w));
  }

  auto key = TokenizerModel::pair_key;
  std::unordered_map<std::uint64_t, std::int64_t> pair_counts;
  std::unordered_map<std::uint64_t, std::unordered_set<std::uint32_t>> pair_words;
  for (std::uint32_t wi = 0; wi < words.size(); ++wi) {
    const Word& w = words[wi];
    for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
      std::uint64_t k = key(w.syms[i], w.syms[i + 1]);
      pair_counts[k] += static_cast<std::int64_t>(w.count);
      pair_words[k].insert(wi);
    }
  }

  // Max-heap: higher count first, then lexicographically smaller pair bytes.
  auto lower_priority = [&model](const HeapEntry& x, const HeapEntry& y) {
    if (x.count != y.count) return x.count < y.count;
    const std::string &xa = model.token_bytes[x.a], &ya = model.token_bytes[y.a];
    if (xa != ya) return xa > ya;
    return model.token_bytes[x.b] > model.token_bytes[y.b];
  };
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, decltype(lower_priority)> heap(
      lower_priority);
  for (const auto& [k, c] : pair_counts)
    if (c >= 2)
      heap.push({c, static_cast<std::uint32_t>(k >> 32), static_cast<std::uint32_t>(k & 0xFFFFFFFFu)});

  while (model.token_bytes.size() < vocab_size && !heap.empty()) {
    HeapEntry top = heap.top();
    heap.pop();
    auto it = pair_counts.find(key(top.a, top.b));
    std::int64_t current = it == pair_counts.end() ? 0 : it->second;
    if (current != top.count) {
      if (current >= 2) heap.push({current, top.a, top.b});
      continue;
    }
    if (top.count < 2) break;

    const std::uint32_t a = top.a, b = top.b;
    const std::uint32_t merged = static_cast<std::uint32_t>(model.token_bytes.size());
    model.token_bytes.push_back(model.token_bytes[a] + model.token_bytes[b]);
    model.merges.emplace_back(a, b);

    auto affected_it = pair_words.find(key(a, b));
    std::vector<std::uint32_t> affected;
    if (affected_it != pair_words.end()) {
      affected.assign(affected_it->second.begin(), affected_it->second.end());
      pair_words.erase(affected_it);
    }

    std::unordered_set<std::uint64_t> changed;
    for (std::uint32_t wi : affected) {
      Word& w = words[wi];
      bool has = false;
      for (std::size_t i = 0; i + 1 < w.syms.size() && !has; ++i)
        has = w.syms[i] == a && w.syms[i + 1] == b;
      if (!has) continue;  // stale index entry

      for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
        std::uint64_t k = key(w.syms[i], w.syms[i + 1]);
        auto pit = pair_counts.find(k);
        pit->second -= static_cast<std::int64_t>(w.count);
        changed.insert(k);
        if (pit->second <= 0) pair_counts.erase(pit);
      }
      std::vector<std::uint32_t> rebuilt;
      rebuilt.reserve(w.syms.size());
      for (std::size_t i = 0; i < w.syms.size();) {
        if (i + 1 < w.syms.size() && w.syms[i] == a && w.syms[i + 1] == b) {
          rebuilt.push_back(merged);
          i += 2;
        } else {
          rebuilt.push_back(w.syms[i]);
          ++i;
        }
      }
      w.syms = std::move(rebuilt);
      for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
        std::uint64_t k = key(w.syms[i], w.syms[i + 1]);
        pair_counts[k] += static_cast<std::int64_t>(w.count);
        pair_words[k].insert(wi);
        changed.insert(k);
      }
    }
    changed.erase(key(a, b));
    for (std::uint64_t k : changed) {
      auto cit = pair_counts.find(k);
      if (cit != pair_counts.end() && cit->second >= 2)
        heap.push({cit->second, static_cast<std::uint32_t>(k >> 32),
                   static_cast<std::uint32_t>(k & 0xFFFFFFFFu)});
    }
  }

  model.rebuild_lookup();
  return model;
}

struct TrainOptions {
  std::uint32_t vocab_size = 0;
  std::uint64_t seed = 0;
  /// Characters drawn per language; 0 means the size of the smallest
  /// language, so every language contributes the same volume.
  std::uint64_t sample_chars_per_lang = 0;
};

namespace detail {

/// Cuts text to at most `budget` scalars, at a codepoint boundary.
inline std::string_view truncate_scalars(std::string_view text, std::uint64_t budget) {
  std::size_t i = 0;
  std::uint64_t taken = 0;
  char32_t cp;
  while (i < text.size() && taken < budget) {
    std::size_t n = uni::decode_utf8(text, i, cp);
    require(n > 0, "invalid UTF-8 in training document");
    i += n;
    ++taken;
  }
  return text.substr(0, i);
}

}  // namespace detail

/// Trains on an equal seeded character volume from every language.
inline TokenizerModel train(
    const std::map<std::string, std::vector<corpus::Document>>& docs_by_lang,
    const TrainOptions& options) {
  require(!docs_by_lang.empty(), "tokenizer training corpus is empty");
  std::uint64_t min_chars = std::numeric_limits<std::uint64_t>::max();
  for (const auto& [lang, docs] : docs_by_lang) {
    require(!docs.empty(), "no training documents for language \"", lang, "\"");
    std::uint64_t chars = 0;
    for (const auto& d : docs) chars += uni::scalar_count(d.text);
    min_chars = std::min(min_chars, chars);
  }
  std::uint64_t budget =
      options.sample_chars_per_lang > 0 ? options.sample_chars_per_lang : min_chars;
  require(budget > 0, "tokenizer training corpus has no characters");

  std::unordered_map<std::string, std::uint64_t> piece_counts;
  for (const auto& [lang, docs] : docs_by_lang) {
    std::vector<std::uint32_t> order(docs.size());
    for (std::uint32_t i = 0; i < docs.size(); ++i) order[i] = i;
    Rng rng(derive_seed(options.seed, "tok-sample:" + lang));
    rng.shuffle(order);
    std::uint64_t taken = 0;
    for (std::uint32_t idx : order) {
      if (taken >= budget) break;
      std::string_view text = docs[idx].text;
      std::uint64_t want = budget - taken;
      std::string_view slice = detail::truncate_scalars(text, want);
      taken += uni::scalar_count(slice);
      for (std::string_view piece : pretokenize(slice))
        piece_counts[std::string(piece)] += 1;
    }
  }
  return train_from_counts(piece_counts, options.vocab_size);
}

// ---------------------------------------------------------------------------
// Encode / decode

namespace detail {

inline void encode_piece(const TokenizerModel& model, std::string_view piece,
                         std::vector<std::uint32_t>& out) {
  thread_local std::vector<std::uint32_t> syms;
  syms.clear();
  for (unsigned char c : piece) syms.push_back(c);
  while (syms.size() >= 2) {
    std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = model.merge_lookup.find(TokenizerModel::pair_key(syms[i], syms[i + 1]));
      if (it != model.merge_lookup.end() && it->second < best) best = it->second;
    }
    if (best == std::numeric_limits<std::uint32_t>::max()) break;
    const auto [a, b] = model.merges[best - kByteAlphabetSize];
    std::size_t w = 0;
    for (std::size_t i = 0; i < syms.size();) {
      if (i + 1 < syms.size() && syms[i] == a && syms[i + 1] == b) {
        syms[w++] = best;
        i += 2;
      } else {
        syms[w++] = syms[i];
        ++i;
      }
    }
    syms.resize(w);
  }
  out.insert(out.end(), syms.begin(), syms.end());
}

}  // namespace detail

/// Pretokenize, then apply merges in ascending rank order until fixpoint.
inline std::vector<std::uint32_t> encode(const TokenizerModel& model, std::string_view text) {
  std::vector<std::uint32_t> out;
  for (std::string_view piece : pretokenize(text)) detail::encode_piece(model, piece, out);
  return out;
}

struct DecodeResult {
  std::string text;      // raw bytes, lossless even when not valid UTF-8
  bool valid_utf8 = true;
};

inline DecodeResult decode(const TokenizerModel& model, std::span<const std::uint32_t> ids) {
  DecodeResult r;
  for (std::uint32_t id : ids) {
    require(id < model.vocab_size(), "decode: token id ", id, " out of range (vocab ",
            model.vocab_size(), ")");
    r.text += model.token_bytes[id];
  }
  r.valid_utf8 = uni::valid_utf8(r.text);
  return r;
}

/// Piece-level cache around encode() for bulk tokenization.
class Encoder {
 public:
  explicit Encoder(const TokenizerModel& model, std::size_t max_cache_entries = 1 << 16)
      : model_(model), max_entries_(max_cache_entries) {}

  std::vector<std::uint32_t> encode(std::string_view text) {
    std::vector<std::uint32_t> out;
    for (std::string_view piece : pretokenize(text)) {
      auto it = cache_.find(std::string(piece));
      if (it == cache_.end()) {
        std::vector<std::uint32_t> ids;
        detail::encode_piece(model_, piece, ids);
        if (cache_.size() >= max_entries_) cache_.clear();
        it = cache_.emplace(std::string(piece), std::move(ids)).first;
      }
      out.insert(out.end(), it->second.begin(), it->second.end());
    }
    return out;
  }

 private:
  const TokenizerModel& model_;
  std::size_t max_entries_;
  std::unordered_map<std::string, std::vector<std::uint32_t>> cache_;
};

// ---------------------------------------------------------------------------
// Fertility

enum class FertilityUnit { word, line_word };

inline const char* unit_name(FertilityUnit u) {
  return u == FertilityUnit::word ? "word" : "line-word";
}

struct FertilityReport {
  std::uint64_t token_count = 0;
  std::uint64_t unit_count = 0;
  Rational fertility;
  FertilityUnit unit = FertilityUnit::word;
};

/// Tokens per whitespace-delimited word, corpus-pooled. Tokens whose bytes
/// are entirely whitespace belong to no word and are not charged.
inline FertilityReport fertility(const TokenizerModel& model, const std::vector<std::string>& texts,
                                 FertilityUnit unit = FertilityUnit::word) {
  require(!texts.empty(), "fertility: no texts");
  FertilityReport report;
  report.unit = unit;
  Encoder enc(model);
  for (const auto& text : texts) {
    report.unit_count += uni::word_count(text);
    for (std::uint32_t id : enc.encode(text))
      if (!uni::whitespace_only(model.token_bytes[id])) ++report.token_count;
  }
  require(report.unit_count > 0, "fertility: zero units in the supplied texts");
  report.fertility = Rational(static_cast<std::int64_t>(report.token_count),
                              static_cast<std::int64_t>(report.unit_count));
  return report;
}

/// Mean of per-text fertility; texts without any unit are skipped.
inline double per_text_mean_fertility(const TokenizerModel& model,
                                      const std::vector<std::string>& texts) {
  require(!texts.empty(), "fertility: no texts");
  Encoder enc(model);
  double sum = 0;
  std::uint64_t n = 0;
  for (const auto& text : texts) {
    std::uint64_t units = uni::word_count(text);
    if (units == 0) continue;
    std::uint64_t tokens = 0;
    for (std::uint32_t id : enc.encode(text))
      if (!uni::whitespace_only(model.token_bytes[id])) ++tokens;
    sum += static_cast<double>(tokens) / static_cast<double>(units);
    ++n;
  }
  require(n > 0, "fertility: zero units in the supplied texts");
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Model file

inline void save_model(const TokenizerModel& model, const std::string& path) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["model_type"] = "byte-bpe";
  j["pretokenizer"] = model.pretokenizer_id;
  j["vocab_size"] = model.vocab_size();
  nlohmann::ordered_json vocab = nlohmann::ordered_json::object();
  for (std::uint32_t id = 0; id < model.vocab_size(); ++id)
    vocab[bytes_to_visible(model.token_bytes[id])] = id;
  j["vocab"] = std::move(vocab);
  nlohmann::ordered_json merges = nlohmann::ordered_json::array();
  for (const auto& [a, b] : model.merges)
    merges.push_back(bytes_to_visible(model.token_bytes[a]) + " " +
                     bytes_to_visible(model.token_bytes[b]));
  j["merges"] = std::move(merges);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write model file: ", path);
  out << j.dump() << "\n";
}

inline TokenizerModel load_model(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open model file: ", path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("model file ", path, ": ", e.what());
  }
  require(j.value("format_version", 0) == 1, "model file ", path, ": unsupported format version");
  require(j.value("model_type", "") == "byte-bpe", "model file ", path, ": unsupported model type");

  TokenizerModel model;
  model.pretokenizer_id = j.at("pretokenizer").get<std::string>();
  require(model.pretokenizer_id == kPretokenizerId, "model file ", path,
          ": unknown pretokenizer \"", model.pretokenizer_id, "\"");
  auto vocab_size = j.at("vocab_size").get<std::uint32_t>();
  model.token_bytes.assign(vocab_size, std::string());
  std::vector<bool> seen(vocab_size, false);
  for (const auto& [token, id_json] : j.at("vocab").items()) {
    auto id = id_json.get<std::uint32_t>();
    require(id < vocab_size, "model file ", path, ": token id ", id, " out of range");
    require(!seen[id], "model file ", path, ": duplicate token id ", id);
    seen[id] = true;
    model.token_bytes[id] = visible_to_bytes(token);
  }
  for (std::uint32_t id = 0; id < vocab_size; ++id)
    require(seen[id], "model file ", path, ": missing token id ", id);

  std::unordered_map<std::string, std::uint32_t> ids;
  for (std::uint32_t id = 0; id < vocab_size; ++id) ids[model.token_bytes[id]] = id;
  for (const auto& m : j.at("merges")) {
    auto s = m.get<std::string>();
    auto space = s.find(' ');
    require(space != std::string::npos, "model file ", path, ": malformed merge \"", s, "\"");
    std::string left = visible_to_bytes(s.substr(0, space));
    std::string right = visible_to_bytes(s.substr(space + 1));
    auto lit = ids.find(left);
    auto rit = ids.find(right);
    require(lit != ids.end() && rit != ids.end(), "model file ", path,
            ": merge references unknown token");
    model.merges.emplace_back(lit->second, rit->second);
  }
  model.rebuild_lookup();
  model.validate();
  return model;
}

}  // namespace ptk::bpe
