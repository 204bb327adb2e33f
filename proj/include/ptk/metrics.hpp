// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ptk/error.hpp"
#include "ptk/unicode.hpp"

namespace ptk::metrics {

/// One scored text: per-token negative log-likelihoods (natural log) from any
/// scoring backend, plus the unicode scalar count of the text. Only the nll
/// sum and the character count enter PPL_c, which is what makes it comparable
/// across tokenizers.
struct ScoredText {
  std::string text;
  std::vector<double> token_nlls;
  std::uint64_t char_count = 0;
};

inline ScoredText make_scored_text(std::string text, std::vector<double> token_nlls) {
  ScoredText s;
  s.char_count = uni::scalar_count(text);
  s.text = std::move(text);
  s.token_nlls = std::move(token_nlls);
  return s;
}

namespace detail {

// Fixed-order compensated sum so parallel callers cannot change results.
inline double kahan_sum(std::span<const double> values) {
  double sum = 0, c = 0;
  for (double v : values) {
    double y = v - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  return sum;
}

}  // namespace detail

/// Character-level perplexity: exp(total nll / character count).
inline double char_ppl(const ScoredText& item) {
  require(item.char_count > 0, "char_ppl: character count must be positive");
  for (double nll : item.token_nlls)
    require(nll >= 0, "char_ppl: negative log-likelihoods must be >= 0");
  return std::exp(detail::kahan_sum(item.token_nlls) / static_cast<double>(item.char_count));
}

inline double mean_char_ppl(std::span<const ScoredText> items) {
  require(!items.empty(), "mean_char_ppl: no items");
  double sum = 0;
  for (const auto& item : items) sum += char_ppl(item);
  return sum / static_cast<double>(items.size());
}

// ---------------------------------------------------------------------------
// Corpus BLEU

enum class BleuSmoothing { none, add_k };

struct BleuConfig {
  int max_order = 4;
  BleuSmoothing smoothing = BleuSmoothing::add_k;
  double k = 1.0;  // added to numerator and denominator of orders >= 2
  std::string tokenizer_ref = "whitespace";
};

using TokenizeFn = std::function<std::vector<std::string>(const std::string&)>;

inline std::vector<std::string> whitespace_tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  for (auto [begin, end] : uni::word_spans(text)) tokens.push_back(text.substr(begin, end - begin));
  return tokens;
}

/// Corpus-level BLEU in [0, 100]: clipped n-gram precisions up to max_order,
/// geometric mean, brevity penalty. Pass a subword tokenizer to get
/// spBLEU-style scores; the tokenizer is what defines the n-gram space.
inline double corpus_bleu(const std::vector<std::string>& hypotheses,
                          const std::vector<std::string>& references,
                          const BleuConfig& config = {},
                          const TokenizeFn& tokenize = whitespace_tokenize) {
  require(hypotheses.size() == references.size(), "corpus_bleu: ", hypotheses.size(),
          " hypotheses vs ", references.size(), " references");
  require(!hypotheses.empty(), "corpus_bleu: empty corpus");
  require(config.max_order >= 1, "corpus_bleu: max_order must be >= 1");

  const int n_orders = config.max_order;
  std::vector<std::uint64_t> matches(static_cast<std::size_t>(n_orders), 0);
  std::vector<std::uint64_t> totals(static_cast<std::size_t>(n_orders), 0);
  std::uint64_t hyp_len = 0, ref_len = 0;

  using Ngram = std::vector<std::string>;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    auto hyp = tokenize(hypotheses[s]);
    auto ref = tokenize(references[s]);
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (int n = 1; n <= n_orders; ++n) {
      std::map<Ngram, std::uint64_t> ref_counts;
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= ref.size(); ++i)
        ref_counts[Ngram(ref.begin() + static_cast<std::ptrdiff_t>(i),
                         ref.begin() + static_cast<std::ptrdiff_t>(i + static_cast<std::size_t>(n)))]++;
      std::map<Ngram, std::uint64_t> hyp_counts;
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= hyp.size(); ++i)
        hyp_counts[Ngram(hyp.begin() + static_cast<std::ptrdiff_t>(i),
                         hyp.begin() + static_cast<std::ptrdiff_t>(i + static_cast<std::size_t>(n)))]++;
      for (const auto& [ngram, count] : hyp_counts) {
        auto it = ref_counts.find(ngram);
        if (it != ref_counts.end()) matches[static_cast<std::size_t>(n - 1)] += std::min(count, it->second);
      }
      if (hyp.size() >= static_cast<std::size_t>(n))
        totals[static_cast<std::size_t>(n - 1)] += hyp.size() - static_cast<std::size_t>(n) + 1;
    }
  }

  if (hyp_len == 0) return 0.0;

  double log_precision_sum = 0;
  for (int n = 1; n <= n_orders; ++n) {
    double add = (config.smoothing == BleuSmoothing::add_k && n > 1) ? config.k : 0.0;
    double numer = static_cast<double>(matches[static_cast<std::size_t>(n - 1)]) + add;
    double denom = static_cast<double>(totals[static_cast<std::size_t>(n - 1)]) + add;
    if (numer <= 0 || denom <= 0) return 0.0;
    log_precision_sum += std::log(numer / denom);
  }
  double brevity = hyp_len >= ref_len
                       ? 1.0
                       : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * brevity * std::exp(log_precision_sum / n_orders);
}

}  // namespace ptk::metrics
