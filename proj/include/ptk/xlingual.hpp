// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ptk/corpus.hpp"
#include "ptk/error.hpp"
#include "ptk/unicode.hpp"

namespace ptk::xling {

struct TranslationPair {
  std::string src_text;
  std::string tgt_text;
  std::string src_lang;
  std::string tgt_lang;
  std::string id;
};

using LanguageNames = std::map<std::string, std::string>;

inline LanguageNames default_language_names() {
  return {{"en", "English"}, {"fi", "Finnish"}};
}

enum class Direction { forward, reversed };

inline std::string trim_trailing_linebreaks(std::string_view s) {
  std::size_t end = s.size();
  while (end > 0 && (s[end - 1] == '\n' || s[end - 1] == '\r')) --end;
  return std::string(s.substr(0, end));
}

inline TranslationPair make_pair(std::string id, std::string_view src, std::string_view tgt,
                                 std::string src_lang, std::string tgt_lang) {
  TranslationPair p;
  p.id = std::move(id);
  p.src_text = trim_trailing_linebreaks(src);
  p.tgt_text = trim_trailing_linebreaks(tgt);
  p.src_lang = std::move(src_lang);
  p.tgt_lang = std::move(tgt_lang);
  return p;
}

namespace detail {

inline const std::string& display_name(const LanguageNames& names, const std::string& tag,
                                       const std::string& pair_id) {
  auto it = names.find(tag);
  require(it != names.end(), "pair \"", pair_id, "\": no display name for language tag \"", tag,
          "\"");
  return it->second;
}

inline void check_pair(const TranslationPair& p) {
  require(!p.src_text.empty() && !p.tgt_text.empty(), "pair \"", p.id,
          "\": source and target text must be non-empty");
  require(p.src_lang != p.tgt_lang, "pair \"", p.id, "\": source and target language are equal");
}

}  // namespace detail

/// One instruction-formatted pretraining document per pair and direction:
/// a user turn asking for the translation, a line feed, and an assistant turn
/// holding it. No trailing line break; the bytes are the contract.
inline corpus::Document render(const TranslationPair& pair, Direction direction,
                               const LanguageNames& names = default_language_names()) {
  detail::check_pair(pair);
  const bool fwd = direction == Direction::forward;
  const std::string& into = detail::display_name(names, fwd ? pair.tgt_lang : pair.src_lang,
                                                 pair.id);
  const std::string& shown = fwd ? pair.src_text : pair.tgt_text;
  const std::string& answer = fwd ? pair.tgt_text : pair.src_text;
  corpus::Document d;
  d.id = pair.id + (fwd ? ":fwd" : ":rev");
  d.lang = "xling";
  d.text = "<|user|>Translate into " + into + ": " + shown + "\n<|assistant|>" + answer;
  return d;
}

using PairSink = std::function<void(corpus::Document&&)>;

/// Emits exactly two documents per pair: forward, then reversed.
inline std::uint64_t render_all(const std::vector<TranslationPair>& pairs, const PairSink& sink,
                                const LanguageNames& names = default_language_names()) {
  std::uint64_t count = 0;
  for (const auto& p : pairs) {
    sink(render(p, Direction::forward, names));
    sink(render(p, Direction::reversed, names));
    count += 2;
  }
  return count;
}

inline std::vector<corpus::Document> render_all(const std::vector<TranslationPair>& pairs,
                                                const LanguageNames& names
                                                = default_language_names()) {
  std::vector<corpus::Document> docs;
  docs.reserve(pairs.size() * 2);
  render_all(pairs, [&](corpus::Document&& d) { docs.push_back(std::move(d)); }, names);
  return docs;
}

/// Tab-separated pair file: id <TAB> source <TAB> target.
inline std::vector<TranslationPair> read_pairs(const std::string& path, std::string src_lang,
                                               std::string tgt_lang) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open pair file: ", path);
  std::vector<TranslationPair> pairs;
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    require(uni::valid_utf8(line), path, " line ", lineno, ": not valid UTF-8");
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    require(t2 != std::string::npos, path, " line ", lineno,
            ": expected three tab-separated fields (id, source, target)");
    pairs.push_back(make_pair(line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1),
                              line.substr(t2 + 1), src_lang, tgt_lang));
    require(!pairs.back().id.empty(), path, " line ", lineno, ": empty pair id");
  }
  return pairs;
}

inline std::vector<TranslationPair> read_pairs(const corpus::CorpusSource& source) {
  require(source.format == corpus::SourceFormat::tsv_pairs, "source \"", source.id,
          "\" is not a tsv-pairs source");
  // The source's lang tag is "<src>-<tgt>", e.g. "en-fi".
  auto dash = source.lang.find('-');
  require(dash != std::string::npos, "tsv-pairs source \"", source.id,
          "\" needs lang of the form \"<src>-<tgt>\"");
  std::string src_lang = source.lang.substr(0, dash);
  std::string tgt_lang = source.lang.substr(dash + 1);
  std::vector<TranslationPair> pairs;
  for (const auto& path : source.paths) {
    auto file_pairs = read_pairs(path, src_lang, tgt_lang);
    pairs.insert(pairs.end(), std::make_move_iterator(file_pairs.begin()),
                 std::make_move_iterator(file_pairs.end()));
  }
  return pairs;
}

}  // namespace ptk::xling
