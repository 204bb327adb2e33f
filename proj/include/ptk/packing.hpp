// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "ptk/error.hpp"

namespace ptk::pack {

struct PackingConfig {
  std::uint32_t sequence_length = 2048;
  std::uint32_t eos_id = 0;
  std::uint32_t pad_id = 0;
  bool cross_document_packing = true;
  std::uint32_t vocab_size = 0;  // bound for token id validation

  void validate() const {
    require(sequence_length > 0, "sequence_length must be positive");
    require(vocab_size > 0, "packing config needs the vocabulary size");
    require(eos_id < vocab_size, "eos_id ", eos_id, " out of range (vocab ", vocab_size, ")");
    require(pad_id < vocab_size, "pad_id ", pad_id, " out of range (vocab ", vocab_size, ")");
  }
};

struct TokenLedger {
  std::uint64_t total_tokens = 0;
  std::uint64_t sequences = 0;
  std::uint64_t global_batch_size = 2048;
  std::uint64_t tokens_per_step = 0;
  std::uint64_t steps = 0;
};

inline TokenLedger ledger(std::uint64_t total_tokens, std::uint64_t global_batch,
                          std::uint64_t seq_len) {
  require(total_tokens > 0 && global_batch > 0 && seq_len > 0,
          "ledger: all inputs must be positive");
  TokenLedger l;
  l.total_tokens = total_tokens;
  l.global_batch_size = global_batch;
  l.tokens_per_step = global_batch * seq_len;
  l.sequences = (total_tokens + seq_len - 1) / seq_len;
  l.steps = (total_tokens + l.tokens_per_step - 1) / l.tokens_per_step;
  return l;
}

struct DocTokens {
  std::string id;
  std::vector<std::uint32_t> ids;
};

struct PackStats {
  std::uint64_t input_tokens = 0;
  std::uint64_t eos_added = 0;
  std::uint64_t pad_added = 0;
  std::uint64_t sequences = 0;
};

namespace detail {

// Virtual concatenated stream in cross-document mode: doc i occupies
// [offset[i], offset[i]+len_i+1), the final position being its eos.
struct CrossDocLayout {
  std::vector<std::uint64_t> offsets;  // size docs+1
  std::uint64_t total = 0;             // tokens + eos markers

  std::uint32_t at(const std::vector<DocTokens>& docs, std::uint64_t pos, std::uint32_t eos_id,
                   std::size_t& hint) const {
    while (pos >= offsets[hint + 1]) ++hint;
    while (pos < offsets[hint]) --hint;
    std::uint64_t rel = pos - offsets[hint];
    const auto& ids = docs[hint].ids;
    return rel < ids.size() ? ids[rel] : eos_id;
  }
};

inline void fill_range(std::vector<std::uint32_t>& flat, const std::vector<DocTokens>& docs,
                       const CrossDocLayout& layout, const PackingConfig& config,
                       std::uint64_t begin_pos, std::uint64_t end_pos) {
  if (begin_pos >= end_pos) return;
  // start the doc hint with a binary search, then advance linearly
  std::size_t hint =
      static_cast<std::size_t>(std::upper_bound(layout.offsets.begin(), layout.offsets.end(),
                                                begin_pos) -
                               layout.offsets.begin()) -
      1;
  for (std::uint64_t pos = begin_pos; pos < end_pos; ++pos)
    flat[pos] = layout.at(docs, pos, config.eos_id, hint);
}

}  // namespace detail

/// Packs eos-terminated documents into fixed-length sequences. In
/// cross-document mode documents run back to back and only the final sequence
/// is padded; otherwise every document starts a fresh sequence and pads its
/// own tail. Token conservation holds exactly:
/// input + eos + padding == sequences * sequence_length.
/// The output is byte-identical for any worker count.
inline std::vector<std::uint32_t> pack_sequences(const std::vector<DocTokens>& docs,
                                                 const PackingConfig& config, PackStats& stats,
                                                 unsigned workers = 1) {
  config.validate();
  stats = PackStats{};
  for (const auto& d : docs) {
    for (std::uint32_t id : d.ids)
      require(id < config.vocab_size, "document \"", d.id, "\": token id ", id,
              " out of range (vocab ", config.vocab_size, ")");
    stats.input_tokens += d.ids.size();
  }
  stats.eos_added = docs.size();
  const std::uint64_t s = config.sequence_length;

  if (config.cross_document_packing) {
    detail::CrossDocLayout layout;
    layout.offsets.resize(docs.size() + 1);
    for (std::size_t i = 0; i < docs.size(); ++i)
      layout.offsets[i + 1] = layout.offsets[i] + docs[i].ids.size() + 1;
    layout.total = layout.offsets.back();

    std::uint64_t seq_count = (layout.total + s - 1) / s;
    std::vector<std::uint32_t> flat(seq_count * s, config.pad_id);
    unsigned n_workers = std::max(1u, workers);
    if (n_workers == 1 || seq_count < 2 * n_workers) {
      detail::fill_range(flat, docs, layout, config, 0, layout.total);
    } else {
      std::vector<std::thread> threads;
      std::uint64_t seqs_per_worker = (seq_count + n_workers - 1) / n_workers;
      for (unsigned w = 0; w < n_workers; ++w) {
        std::uint64_t begin_pos = std::min<std::uint64_t>(w * seqs_per_worker * s, layout.total);
        std::uint64_t end_pos =
            std::min<std::uint64_t>((w + 1) * seqs_per_worker * s, layout.total);
        threads.emplace_back(detail::fill_range, std::ref(flat), std::cref(docs),
                             std::cref(layout), std::cref(config), begin_pos, end_pos);
      }
      for (auto& t : threads) t.join();
    }
    stats.sequences = seq_count;
    stats.pad_added = seq_count * s - layout.total;
    return flat;
  }

  // one document per sequence run; each tail padded
  std::vector<std::uint32_t> flat;
  for (const auto& d : docs) {
    std::uint64_t len = d.ids.size() + 1;
    std::uint64_t seqs = (len + s - 1) / s;
    std::size_t base = flat.size();
    flat.resize(base + seqs * s, config.pad_id);
    for (std::size_t i = 0; i < d.ids.size(); ++i) flat[base + i] = d.ids[i];
    flat[base + d.ids.size()] = config.eos_id;
    stats.sequences += seqs;
    stats.pad_added += seqs * s - len;
  }
  return flat;
}

// ---------------------------------------------------------------------------
// Binary shard format: 16-byte header (magic "PKSQ", u32 version, u32
// sequence length, u32 sequence count), then count*seq_len token ids, all
// little-endian u32. 128K vocabularies need more than 16 bits per id.

inline constexpr char kShardMagic[4] = {'P', 'K', 'S', 'Q'};
inline constexpr std::uint32_t kShardVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline std::uint32_t get_u32(const char* p) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(p[0])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(p[1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(p[2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(p[3])) << 24);
}

}  // namespace detail

inline void write_shard(const std::string& path, const std::vector<std::uint32_t>& flat,
                        std::uint32_t seq_len) {
  require(seq_len > 0 && flat.size() % seq_len == 0,
          "shard write: token count is not a multiple of the sequence length");
  std::string buf;
  buf.reserve(16 + flat.size() * 4);
  buf.append(kShardMagic, 4);
  detail::put_u32(buf, kShardVersion);
  detail::put_u32(buf, seq_len);
  detail::put_u32(buf, static_cast<std::uint32_t>(flat.size() / seq_len));
  for (std::uint32_t v : flat) detail::put_u32(buf, v);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write shard: ", path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  require(out.good(), "write failure on shard ", path);
}

inline std::vector<std::uint32_t> read_shard(const std::string& path, std::uint32_t& seq_len) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open shard: ", path);
  std::string data((std::istreambuf_iterator<char>(in)), {});
  require(data.size() >= 16, "shard ", path, ": truncated header");
  require(std::equal(data.begin(), data.begin() + 4, kShardMagic), "shard ", path,
          ": bad magic");
  require(detail::get_u32(data.data() + 4) == kShardVersion, "shard ", path,
          ": unsupported version");
  seq_len = detail::get_u32(data.data() + 8);
  std::uint32_t count = detail::get_u32(data.data() + 12);
  std::uint64_t expect = 16 + std::uint64_t{count} * seq_len * 4;
  require(data.size() == expect, "shard ", path, ": size mismatch");
  std::vector<std::uint32_t> flat(std::uint64_t{count} * seq_len);
  for (std::size_t i = 0; i < flat.size(); ++i)
    flat[i] = detail::get_u32(data.data() + 16 + i * 4);
  return flat;
}

}  // namespace ptk::pack
