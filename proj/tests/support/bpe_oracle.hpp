// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force BPE training oracle: recounts every adjacent pair from scratch
// each round. Deliberately shares no code or data structures with the
// library's incremental trainer; symbols are plain byte strings and the best
// pair is found by a full scan of a sorted map.

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace bpe_oracle {

using Merge = std::pair<std::string, std::string>;

inline std::vector<Merge> merge_sequence(const std::map<std::string, std::uint64_t>& pieces,
                                         std::size_t max_merges) {
  std::vector<std::pair<std::vector<std::string>, std::uint64_t>> words;
  for (const auto& [piece, count] : pieces) {
    std::vector<std::string> syms;
    for (unsigned char c : piece) syms.emplace_back(1, static_cast<char>(c));
    words.emplace_back(std::move(syms), count);
  }

  std::vector<Merge> merges;
  while (merges.size() < max_merges) {
    std::map<Merge, std::uint64_t> counts;
    for (const auto& [syms, count] : words)
      for (std::size_t i = 0; i + 1 < syms.size(); ++i)
        counts[{syms[i], syms[i + 1]}] += count;

    bool found = false;
    Merge best;
    std::uint64_t best_count = 0;
    for (const auto& [pair, count] : counts) {
      // strictly greater: the map iterates in ascending lexicographic order,
      // so on ties the first (smallest) pair seen wins
      if (count > best_count) {
        best = pair;
        best_count = count;
        found = true;
      }
    }
    if (!found || best_count < 2) break;

    merges.push_back(best);
    std::string joined = best.first + best.second;
    for (auto& [syms, count] : words) {
      std::vector<std::string> rebuilt;
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == best.first && syms[i + 1] == best.second) {
          rebuilt.push_back(joined);
          i += 2;
        } else {
          rebuilt.push_back(syms[i]);
          ++i;
        }
      }
      syms = std::move(rebuilt);
    }
  }
  return merges;
}

}  // namespace bpe_oracle
