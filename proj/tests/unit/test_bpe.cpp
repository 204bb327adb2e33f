// SPDX-License-Identifier: Apache-2.0
#include "ptk/bpe.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <map>

#include "../support/bpe_oracle.hpp"

namespace bpe = ptk::bpe;
using ptk::Rng;

namespace {

bpe::TokenizerModel byte_only_model() {
  bpe::TokenizerModel m;
  for (std::uint32_t b = 0; b < 256; ++b) m.token_bytes.emplace_back(1, static_cast<char>(b));
  m.rebuild_lookup();
  m.validate();
  return m;
}

bpe::TokenizerModel model_with_merges(const std::vector<std::pair<std::string, std::string>>& merges) {
  bpe::TokenizerModel m = byte_only_model();
  for (const auto& [l, r] : merges) {
    auto lit = m.token_ids.find(l);
    auto rit = m.token_ids.find(r);
    REQUIRE(lit != m.token_ids.end());
    REQUIRE(rit != m.token_ids.end());
    m.merges.emplace_back(lit->second, rit->second);
    m.token_bytes.push_back(l + r);
    m.rebuild_lookup();
  }
  m.validate();
  return m;
}

std::vector<std::pair<std::string, std::string>> merge_bytes(const bpe::TokenizerModel& m) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [a, b] : m.merges) out.emplace_back(m.token_bytes[a], m.token_bytes[b]);
  return out;
}

std::map<std::string, std::uint64_t> count_pieces(const std::string& text) {
  std::map<std::string, std::uint64_t> counts;
  for (auto piece : bpe::pretokenize(text)) counts[std::string(piece)] += 1;
  return counts;
}

bpe::TokenizerModel train_text(const std::string& text, std::uint32_t vocab) {
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& [p, c] : count_pieces(text)) counts[p] = c;
  return bpe::train_from_counts(counts, vocab);
}

std::string random_text(Rng& rng, std::size_t max_scalars) {
  static const std::vector<std::string> pool = {
      "a", "b",  "c",  "d", "e", "f", "g", "h", "i", "j", "k",  "l", "m", "n", "o",
      "p", "q",  "r",  "s", "t", "u", "v", "w", "x", "y", "z",  "ä", "ö", "å", "é",
      " ", " ",  " ",  " ", "\n", "\t", ".", ",", "!", "?", "=", "(", ")", "{", "}",
      "0", "1",  "2",  "9", ":", ";", "_", "-", "\"", "'", "中", "文", "Ж", "😀", "🎉",
      "€", "\xC2\xA0"};
  std::size_t len = rng.below(max_scalars + 1);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) s += pool[rng.below(pool.size())];
  return s;
}

}  // namespace

TEST_CASE("byte/visible mapping is a bijection on all bytes") {
  std::string all;
  for (int b = 0; b < 256; ++b) all.push_back(static_cast<char>(b));
  auto visible = bpe::bytes_to_visible(all);
  CHECK(ptk::uni::valid_utf8(visible));
  CHECK(bpe::visible_to_bytes(visible) == all);
  CHECK(bpe::bytes_to_visible(" ") == "\xC4\xA0");  // space -> U+0120
  CHECK_THROWS_AS(bpe::visible_to_bytes("中"), ptk::Error);
}

TEST_CASE("pretokenize partitions the input") {
  for (const std::string text :
       {std::string("Hello world"), std::string("  leading and trailing  "),
        std::string("a1b22 c,d!e"), std::string("tämä on testi 123"),
        std::string("foo\n bar\tbaz"), std::string(""), std::string("   "),
        std::string("x=1; // comment")}) {
    std::string joined;
    for (auto p : bpe::pretokenize(text)) joined += std::string(p);
    CHECK(joined == text);
  }
}

TEST_CASE("pretokenize splits as documented") {
  auto to_vec = [](std::string_view text) {
    std::vector<std::string> out;
    for (auto p : bpe::pretokenize(text)) out.emplace_back(p);
    return out;
  };
  CHECK(to_vec("Hello world") == std::vector<std::string>{"Hello", " world"});
  CHECK(to_vec("a1b2") == std::vector<std::string>{"a", "1", "b", "2"});
  CHECK(to_vec("hei 12") == std::vector<std::string>{"hei", " 1", "2"});
  CHECK(to_vec("a  b") == std::vector<std::string>{"a", " ", " b"});
  CHECK(to_vec("a\n b") == std::vector<std::string>{"a", "\n", " b"});
  CHECK(to_vec("a \nb") == std::vector<std::string>{"a", " \n", "b"});
  CHECK(to_vec("e.g.") == std::vector<std::string>{"e", ".", "g", "."});
  CHECK(to_vec(" word") == std::vector<std::string>{" word"});
}

TEST_CASE("pretokenize keeps words intact across scripts") {
  auto pieces = bpe::pretokenize("hyvää yötä");
  REQUIRE(pieces.size() == 2);
  CHECK(pieces[0] == "hyvää");
  CHECK(pieces[1] == " yötä");
}

TEST_CASE("the only repeated pair is merged first") {
  auto model = train_text("aaaa", 258);
  REQUIRE(model.merges.size() == 1);  // (aa,aa) occurs once, below threshold
  CHECK(merge_bytes(model)[0] == std::pair<std::string, std::string>{"a", "a"});
  CHECK(model.vocab_size() == 257);
}

TEST_CASE("training requires room above the byte alphabet") {
  CHECK_THROWS_AS(train_text("aaaa", 256), ptk::Error);
  CHECK_THROWS_AS(bpe::train_from_counts({}, 300), ptk::Error);
}

TEST_CASE("low low lower merge sequence matches the brute-force oracle") {
  const std::string text = "low low lower";
  auto model = train_text(text, 256 + 50);
  auto expect = bpe_oracle::merge_sequence(count_pieces(text), 50);
  CHECK(merge_bytes(model) == expect);
  // spot check the head of the sequence
  REQUIRE(expect.size() >= 3);
  CHECK(expect[0] == bpe_oracle::Merge{"l", "o"});
  CHECK(expect[1] == bpe_oracle::Merge{"lo", "w"});
  CHECK(expect[2] == bpe_oracle::Merge{" ", "low"});
}

TEST_CASE("ties break toward the lexicographically smaller pair") {
  // (a,b) and (c,d) both occur four times
  auto model = train_text("abab cdcd abab cdcd", 256 + 1);
  CHECK(merge_bytes(model)[0] == std::pair<std::string, std::string>{"a", "b"});
}

TEST_CASE("merge sequence equals the oracle on random small corpora") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    Rng rng(seed);
    std::string text = random_text(rng, 1000);
    auto model = train_text(text, 256 + 40);
    auto expect = bpe_oracle::merge_sequence(count_pieces(text), 40);
    INFO("seed " << seed);
    CHECK(merge_bytes(model) == expect);
  }
}

TEST_CASE("larger vocabularies extend the merge list monotonically") {
  const std::string text = "kissa istuu ikkunalla ja katselee kissaa ikkunan takana";
  auto small = train_text(text, 256 + 10);
  auto large = train_text(text, 256 + 20);
  REQUIRE(small.merges.size() <= large.merges.size());
  for (std::size_t i = 0; i < small.merges.size(); ++i)
    CHECK(merge_bytes(large)[i] == merge_bytes(small)[i]);
}

TEST_CASE("encode basics") {
  auto model = byte_only_model();
  CHECK(bpe::encode(model, "").empty());
  auto ids = bpe::encode(model, "abc");
  CHECK(ids == std::vector<std::uint32_t>{'a', 'b', 'c'});
}

TEST_CASE("encode follows a hand-traced merge application") {
  // merges, in rank order: a+a, m+aa, i+l, " "+maa
  auto model = model_with_merges({{"a", "a"}, {"m", "aa"}, {"i", "l"}, {" ", "maa"}});
  // "Hei maailma": H e i | " maa" (259) + "il" (258) + m + a
  auto ids = bpe::encode(model, "Hei maailma");
  CHECK(ids == std::vector<std::uint32_t>{'H', 'e', 'i', 259, 258, 'm', 'a'});
}

TEST_CASE("encode of trained pieces reproduces the trainer's segmentation") {
  const std::string text = "low low lower lowest";
  auto model = train_text(text, 256 + 6);
  // "low" must be a single token once (l,o)(lo,w) are merged
  auto ids = bpe::encode(model, "low");
  REQUIRE(ids.size() == 1);
  CHECK(model.token_bytes[ids[0]] == "low");
}

TEST_CASE("decode validates ids and flags non-text output") {
  auto model = byte_only_model();
  CHECK(bpe::decode(model, std::vector<std::uint32_t>{}).text.empty());
  CHECK_THROWS_AS(bpe::decode(model, std::vector<std::uint32_t>{999}), ptk::Error);
  auto r = bpe::decode(model, std::vector<std::uint32_t>{0xFF, 0xFE});
  CHECK_FALSE(r.valid_utf8);
  CHECK(r.text == "\xFF\xFE");  // lossless bytes either way
}

TEST_CASE("roundtrip on assorted strings") {
  auto trained = train_text("tämä on testi tämä on koe this is a test x=1 y=22", 256 + 30);
  for (const auto* model : {&trained}) {
    for (const std::string s :
         {std::string("tämä on testi"), std::string("Hei maailma! 😀"),
          std::string("def f(x):\n  return x*2"), std::string("   "),
          std::string("ääkköset ja €-merkki"), std::string("")}) {
      auto back = bpe::decode(*model, bpe::encode(*model, s));
      CHECK(back.valid_utf8);
      CHECK(back.text == s);
    }
  }
}

TEST_CASE("roundtrip property over random unicode strings") {
  auto model = train_text("sana toinen kolmas word another x=1", 256 + 20);
  Rng rng(4242);
  for (int i = 0; i < 500; ++i) {
    std::string s = random_text(rng, 60);
    auto back = bpe::decode(model, bpe::encode(model, s));
    CHECK(back.text == s);
  }
}

TEST_CASE("uniform per-language sampling trains across languages") {
  std::map<std::string, std::vector<ptk::corpus::Document>> by_lang;
  for (int i = 0; i < 20; ++i) {
    by_lang["fi"].push_back({"f" + std::to_string(i), "kissa juoksee nopeasti pihalla", "fi", "s"});
    by_lang["en"].push_back({"e" + std::to_string(i), "the cat runs quickly outside", "en", "s"});
  }
  bpe::TrainOptions opt;
  opt.vocab_size = 256 + 40;
  opt.seed = 9;
  auto model = bpe::train(by_lang, opt);
  CHECK(model.merges.size() > 0);
  // determinism
  auto again = bpe::train(by_lang, opt);
  CHECK(merge_bytes(model) == merge_bytes(again));
  // both languages roundtrip
  for (const std::string s : {std::string("kissa juoksee"), std::string("the cat runs")})
    CHECK(bpe::decode(model, bpe::encode(model, s)).text == s);

  by_lang["empty"] = {};
  CHECK_THROWS_AS(bpe::train(by_lang, opt), ptk::Error);
}

TEST_CASE("fertility is 1.0 when every word variant is a single token") {
  auto model = train_text("ab ab ab", 256 + 10);
  auto report = bpe::fertility(model, {"ab ab ab"});
  CHECK(report.token_count == 3);
  CHECK(report.unit_count == 3);
  CHECK(report.fertility == ptk::Rational(1));
}

TEST_CASE("byte-fallback fertility counts bytes per word") {
  auto model = byte_only_model();
  auto report = bpe::fertility(model, {"abc def"});
  CHECK(report.token_count == 6);  // the lone space token is charged to no word
  CHECK(report.unit_count == 2);
  CHECK(report.fertility == ptk::Rational(3));
  CHECK(report.fertility.to_double() == 3.0);
}

TEST_CASE("fertility input validation") {
  auto model = byte_only_model();
  CHECK_THROWS_AS(bpe::fertility(model, {}), ptk::Error);
  CHECK_THROWS_AS(bpe::fertility(model, {"   ", ""}), ptk::Error);
  CHECK(bpe::per_text_mean_fertility(model, {"ab", "a b c"}) ==
        (2.0 + 1.0) / 2.0);  // 2 tokens/1 word and 3 tokens/3 words
}

TEST_CASE("model file roundtrip preserves behaviour and bytes") {
  auto model = train_text("hyvää päivää 😀 x=12; print(x)", 256 + 25);
  const std::string path = "/tmp/ptk_bpe_model_test.json";
  bpe::save_model(model, path);
  auto loaded = bpe::load_model(path);
  CHECK(loaded.vocab_size() == model.vocab_size());
  CHECK(merge_bytes(loaded) == merge_bytes(model));
  const std::string sample = "hyvää päivää kaikille 😀";
  CHECK(bpe::encode(loaded, sample) == bpe::encode(model, sample));

  // re-saving the loaded model is byte-identical
  const std::string path2 = "/tmp/ptk_bpe_model_test2.json";
  bpe::save_model(loaded, path2);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("encoder cache does not change results") {
  auto model = train_text("yksi kaksi kolme yksi kaksi", 256 + 15);
  bpe::Encoder enc(model);
  for (const std::string s : {std::string("yksi kaksi kolme"), std::string("kolme yksi"),
                              std::string("yksi kaksi kolme")}) {
    CHECK(enc.encode(s) == bpe::encode(model, s));
  }
}
