// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ptk/error.hpp"
#include "ptk/rng.hpp"
#include "ptk/sha256.hpp"
#include "ptk/unicode.hpp"

namespace ptk::corpus {

struct Document {
  std::string id;
  std::string text;
  std::string lang;
  std::string source_id;

  friend bool operator==(const Document&, const Document&) = default;
};

enum class SourceFormat { jsonl, plaintext, tsv_pairs };

inline SourceFormat parse_format(std::string_view s) {
  if (s == "jsonl") return SourceFormat::jsonl;
  if (s == "plaintext") return SourceFormat::plaintext;
  if (s == "tsv-pairs") return SourceFormat::tsv_pairs;
  fail("unknown source format \"", std::string(s), "\" (expected jsonl, plaintext or tsv-pairs)");
}

inline const char* format_name(SourceFormat f) {
  switch (f) {
    case SourceFormat::jsonl: return "jsonl";
    case SourceFormat::plaintext: return "plaintext";
    case SourceFormat::tsv_pairs: return "tsv-pairs";
  }
  return "?";
}

/// A named token pool. native_token_count is declared metadata (counted under
/// whatever reference tokenizer produced it), not something this toolkit
/// recomputes.
struct CorpusSource {
  std::string id;
  std::string lang;
  std::vector<std::string> paths;
  std::uint64_t native_token_count = 0;
  SourceFormat format = SourceFormat::jsonl;
};

inline CorpusSource source_from_json(const nlohmann::json& j) {
  CorpusSource s;
  for (auto& [key, value] : j.items()) {
    if (key == "id") {
      s.id = value.get<std::string>();
    } else if (key == "lang") {
      s.lang = value.get<std::string>();
    } else if (key == "paths") {
      s.paths = value.get<std::vector<std::string>>();
    } else if (key == "native_token_count") {
      s.native_token_count = value.get<std::uint64_t>();
    } else if (key == "format") {
      s.format = parse_format(value.get<std::string>());
    } else {
      fail("unknown key \"", key, "\" in source config");
    }
  }
  require(!s.id.empty(), "source config missing id");
  require(!s.lang.empty(), "source \"", s.id, "\" missing lang");
  require(!s.paths.empty(), "source \"", s.id, "\" has no paths");
  return s;
}

inline CorpusSource load_source(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open source config: ", path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("source config ", path, ": ", e.what());
  }
  return source_from_json(j);
}

using DocumentSink = std::function<void(Document&&)>;

namespace detail {

inline void read_jsonl_file(const std::string& path, const CorpusSource& source,
                            const DocumentSink& sink) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open ", path);
  std::string line;
  std::uint64_t record = 0;
  while (std::getline(in, line)) {
    ++record;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    require(!j.is_discarded(), path, " record ", record, ": malformed JSON");
    require(j.is_object(), path, " record ", record, ": expected an object");
    require(j.contains("id") && j["id"].is_string(), path, " record ", record,
            ": missing string field \"id\"");
    require(j.contains("text") && j["text"].is_string(), path, " record ", record,
            ": missing string field \"text\"");
    Document d;
    d.id = j["id"].get<std::string>();
    d.text = j["text"].get<std::string>();
    d.lang = j.contains("lang") ? j["lang"].get<std::string>() : source.lang;
    d.source_id = j.contains("source_id") ? j["source_id"].get<std::string>() : source.id;
    require(!d.id.empty(), path, " record ", record, ": empty id");
    require(uni::valid_utf8(d.text), path, " record ", record, ": text is not valid UTF-8");
    sink(std::move(d));
  }
}

inline void read_plaintext_file(const std::string& path, const CorpusSource& source,
                                const DocumentSink& sink) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open ", path);
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    require(uni::valid_utf8(line), path, " line ", lineno, ": not valid UTF-8");
    Document d;
    d.id = path + "#" + std::to_string(lineno);
    d.text = line;
    d.lang = source.lang;
    d.source_id = source.id;
    sink(std::move(d));
  }
}

}  // namespace detail

/// Streams documents in deterministic order: paths in declared order, records
/// in file order. Returns the document count.
inline std::uint64_t for_each_document(const CorpusSource& source, const DocumentSink& sink) {
  std::uint64_t count = 0;
  auto counting = [&](Document&& d) {
    ++count;
    sink(std::move(d));
  };
  for (const auto& path : source.paths) {
    require(std::filesystem::exists(path), "source \"", source.id, "\": missing path ", path);
    switch (source.format) {
      case SourceFormat::jsonl:
        detail::read_jsonl_file(path, source, counting);
        break;
      case SourceFormat::plaintext:
        detail::read_plaintext_file(path, source, counting);
        break;
      case SourceFormat::tsv_pairs:
        fail("source \"", source.id,
             "\" holds translation pairs; render them with `xling render` first");
    }
  }
  return count;
}

inline std::vector<Document> read_documents(const CorpusSource& source) {
  std::vector<Document> docs;
  for_each_document(source, [&](Document&& d) { docs.push_back(std::move(d)); });
  return docs;
}

/// Uniform seeded line sample: lines with at least min_alpha letters qualify,
/// and draws (without replacement) continue until their cumulative scalar
/// count reaches target_chars or the pool runs out.
inline std::vector<std::string> sample_lines(const CorpusSource& source,
                                             std::uint64_t target_chars,
                                             std::uint64_t min_alpha, std::uint64_t seed) {
  require(target_chars > 0, "sample_lines: target_chars must be positive");
  std::vector<std::string> pool;
  for_each_document(source, [&](Document&& d) {
    std::size_t start = 0;
    const std::string& t = d.text;
    while (start <= t.size()) {
      std::size_t end = t.find('\n', start);
      std::string_view line = end == std::string::npos
                                  ? std::string_view(t).substr(start)
                                  : std::string_view(t).substr(start, end - start);
      if (uni::letter_count(line) >= min_alpha) pool.emplace_back(line);
      if (end == std::string::npos) break;
      start = end + 1;
    }
  });
  require(!pool.empty(), "sample_lines: no line in source \"", source.id, "\" has at least ",
          min_alpha, " alphabetic characters");
  Rng rng(seed);
  rng.shuffle(pool);
  std::vector<std::string> out;
  std::uint64_t chars = 0;
  for (auto& line : pool) {
    chars += uni::scalar_count(line);
    out.push_back(std::move(line));
    if (chars >= target_chars) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shards

struct ShardEntry {
  std::string path;  // relative to the manifest
  std::uint64_t documents = 0;
  std::uint64_t tokens = 0;
  std::string sha256;
};

struct ShardManifest {
  std::int64_t created_at = 0;  // unix seconds
  std::string tokenizer_id;     // empty = whitespace-word counts
  std::uint64_t total_documents = 0;
  std::uint64_t total_tokens = 0;
  std::vector<ShardEntry> shards;
};

using TokenCounter = std::function<std::uint64_t(const Document&)>;

inline std::uint64_t whitespace_token_count(const Document& d) {
  return uni::word_count(d.text);
}

inline std::string document_json_line(const Document& d) {
  nlohmann::ordered_json j;
  j["id"] = d.id;
  j["text"] = d.text;
  j["lang"] = d.lang;
  if (!d.source_id.empty()) j["source_id"] = d.source_id;
  return j.dump();
}

struct WriteOptions {
  std::uint64_t shard_size_docs = 10000;
  std::string tokenizer_id;                 // recorded in the manifest
  TokenCounter counter;                     // default: whitespace words
  std::int64_t created_at = -1;             // -1 = current time
};

/// Streaming shard writer; owns its output directory for the duration.
class ShardWriter {
 public:
  ShardWriter(std::string out_dir, WriteOptions options)
      : out_dir_(std::move(out_dir)), options_(std::move(options)) {
    require(options_.shard_size_docs > 0, "shard_size_docs must be positive");
    if (!options_.counter) options_.counter = whitespace_token_count;
    std::filesystem::create_directories(out_dir_);
  }

  void add(const Document& d) {
    if (!out_.is_open()) open_next();
    std::string line = document_json_line(d) + "\n";
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    require(out_.good(), "write failure on shard ", current_name_);
    ++docs_in_shard_;
    tokens_in_shard_ += options_.counter(d);
    if (docs_in_shard_ == options_.shard_size_docs) close_current();
  }

  ShardManifest finish() {
    if (out_.is_open()) close_current();
    ShardManifest m;
    m.created_at = options_.created_at >= 0 ? options_.created_at : std::time(nullptr);
    m.tokenizer_id = options_.tokenizer_id;
    m.shards = std::move(entries_);
    for (const auto& e : m.shards) {
      m.total_documents += e.documents;
      m.total_tokens += e.tokens;
    }
    write_manifest(m);
    return m;
  }

 private:
  void open_next() {
    char name[32];
    std::snprintf(name, sizeof name, "shard-%05zu.jsonl", entries_.size());
    current_name_ = name;
    out_.open(out_dir_ + "/" + current_name_, std::ios::binary | std::ios::trunc);
    require(out_.good(), "cannot open shard for writing: ", out_dir_, "/", current_name_);
    docs_in_shard_ = 0;
    tokens_in_shard_ = 0;
  }

  void close_current() {
    out_.close();
    ShardEntry e;
    e.path = current_name_;
    e.documents = docs_in_shard_;
    e.tokens = tokens_in_shard_;
    e.sha256 = Sha256::hex_digest_file(out_dir_ + "/" + current_name_);
    entries_.push_back(std::move(e));
  }

  void write_manifest(const ShardManifest& m) const {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["created_at"] = m.created_at;
    if (!m.tokenizer_id.empty()) j["tokenizer_id"] = m.tokenizer_id;
    j["total_documents"] = m.total_documents;
    j["total_tokens"] = m.total_tokens;
    j["shards"] = nlohmann::ordered_json::array();
    for (const auto& e : m.shards) {
      j["shards"].push_back({{"path", e.path},
                             {"documents", e.documents},
                             {"tokens", e.tokens},
                             {"sha256", e.sha256}});
    }
    std::ofstream out(out_dir_ + "/manifest.json", std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot write manifest in ", out_dir_);
    out << j.dump(2) << "\n";
  }

  std::string out_dir_;
  WriteOptions options_;
  std::ofstream out_;
  std::string current_name_;
  std::uint64_t docs_in_shard_ = 0;
  std::uint64_t tokens_in_shard_ = 0;
  std::vector<ShardEntry> entries_;
};

inline ShardManifest write_shards(const std::vector<Document>& docs, std::uint64_t shard_size_docs,
                                  const std::string& out_dir, WriteOptions options = {}) {
  options.shard_size_docs = shard_size_docs;
  ShardWriter writer(out_dir, options);
  for (const auto& d : docs) writer.add(d);
  return writer.finish();
}

inline ShardManifest read_manifest(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  require(in.good(), "cannot open manifest in ", dir);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("manifest in ", dir, ": ", e.what());
  }
  ShardManifest m;
  m.created_at = j.value("created_at", std::int64_t{0});
  m.tokenizer_id = j.value("tokenizer_id", std::string());
  m.total_documents = j.at("total_documents").get<std::uint64_t>();
  m.total_tokens = j.at("total_tokens").get<std::uint64_t>();
  std::uint64_t docs = 0, tokens = 0;
  for (const auto& e : j.at("shards")) {
    ShardEntry entry;
    entry.path = e.at("path").get<std::string>();
    entry.documents = e.at("documents").get<std::uint64_t>();
    entry.tokens = e.at("tokens").get<std::uint64_t>();
    entry.sha256 = e.at("sha256").get<std::string>();
    docs += entry.documents;
    tokens += entry.tokens;
    m.shards.push_back(std::move(entry));
  }
  require(docs == m.total_documents && tokens == m.total_tokens,
          "manifest in ", dir, ": totals do not match shard entries");
  return m;
}

/// Re-reads a shard directory (verifying checksums) in manifest order.
inline std::vector<Document> read_shards(const std::string& dir, const std::string& source_lang = "",
                                         const std::string& source_id = "") {
  ShardManifest m = read_manifest(dir);
  std::vector<Document> docs;
  docs.reserve(m.total_documents);
  for (const auto& e : m.shards) {
    std::string path = dir + "/" + e.path;
    std::string digest = Sha256::hex_digest_file(path);
    require(digest == e.sha256, "checksum mismatch for shard ", path);
    CorpusSource shard_source;
    shard_source.id = source_id;
    shard_source.lang = source_lang;
    shard_source.paths = {path};
    shard_source.format = SourceFormat::jsonl;
    std::uint64_t n = 0;
    detail::read_jsonl_file(path, shard_source, [&](Document&& d) {
      ++n;
      docs.push_back(std::move(d));
    });
    require(n == e.documents, "shard ", path, ": expected ", e.documents, " documents, found ", n);
  }
  return docs;
}

}  // namespace ptk::corpus
