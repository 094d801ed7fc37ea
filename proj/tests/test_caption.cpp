// Copyright 2026 The histocap Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <random>

#include "doctest.h"
#include "histocap/caption.hpp"
#include "histocap/config.hpp"
#include "histocap/corpus.hpp"
#include "histocap/error.hpp"
#include "histocap/slide.hpp"
#include "test_util.hpp"

using namespace histocap;

namespace {

const char* kExampleSentence =
    "this is a small intestine - terminal ileum tissue from a male patient and it has 6 pieces, prominent "
    "lymphoid component in 4 of 6 pieces.";

}  // namespace

TEST_CASE("render_caption examples") {
  CHECK(render_caption("liver", "female", "2 pieces") ==
        "this is a liver tissue from a female patient and it has 2 pieces.");
  CHECK(render_caption("small intestine - terminal ileum", "male",
                       "6 pieces, prominent lymphoid component in 4 of 6 pieces.") == kExampleSentence);
  CHECK_THROWS_AS(render_caption("liver", "", "2 pieces"), InvalidArgument);
  CHECK_THROWS_AS(render_caption("  ", "male", "2 pieces"), InvalidArgument);
  // lowercase, and no doubled period
  CHECK(render_caption("Liver", "Male", "2 pieces.") == "this is a liver tissue from a male patient and it has 2 pieces.");
}

TEST_CASE("parse_caption examples") {
  auto r = parse_caption(kExampleSentence);
  REQUIRE(r.ok());
  CHECK(r.caption->tissue_type == "small intestine - terminal ileum");
  CHECK(r.caption->sex == "male");
  CHECK(r.caption->pathology_notes == "6 pieces, prominent lymphoid component in 4 of 6 pieces.");

  auto bad = parse_caption("hello world");
  CHECK_FALSE(bad.ok());
  CHECK(bad.error.find("tissue from a") != std::string::npos);
  auto half = parse_caption("this is a liver tissue from a male");
  CHECK_FALSE(half.ok());
  CHECK(half.error.find("patient and it has") != std::string::npos);
  CHECK_FALSE(parse_caption("").ok());
}

TEST_CASE("render then parse is the identity on 1000 random records") {
  std::mt19937_64 rng(2024);
  const auto& tissues = default_tissue_types();
  const std::vector<std::string> extras = {"", ", prominent lymphoid component in 2 of 3 pieces",
                                           ", autolysis - mild", ", 2 - 3 mm fragments"};
  for (int i = 0; i < 1000; ++i) {
    std::string tissue = tissues[rng() % tissues.size()];
    std::string sex = rng() % 2 ? "male" : "female";
    std::string notes = std::to_string(1 + rng() % 6) + " pieces" + extras[rng() % extras.size()] + ".";
    auto c = make_caption(tissue, sex, notes);
    auto p = parse_caption(c.text);
    REQUIRE(p.ok());
    CHECK(*p.caption == c);
    CHECK(p.caption->tissue_type == tissue);
    CHECK(p.caption->sex == sex);
    CHECK(p.caption->pathology_notes == notes);
  }
  auto example = make_caption("small intestine - terminal ileum", "male",
                            "6 pieces, prominent lymphoid component in 4 of 6 pieces.");
  CHECK(example.text == kExampleSentence);
  CHECK(*parse_caption(example.text).caption == example);
}

TEST_CASE("tokenize examples") {
  CHECK(tokenize("2 pieces.") == std::vector<std::string>{"2", "pieces", "."});
  CHECK(tokenize("small intestine - terminal ileum") ==
        std::vector<std::string>{"small", "intestine", "-", "terminal", "ileum"});
  CHECK(tokenize("A,B") == std::vector<std::string>{"a", ",", "b"});
  CHECK(tokenize("   ").empty());
}

TEST_CASE("detokenize inverts tokenize on every rendered corpus caption") {
  RunConfig cfg;
  for (const auto& e : generate_corpus(cfg)) {
    const auto& text = e.caption().text;
    auto toks = tokenize(text);
    CHECK(detokenize(toks) == normalize_text(text));
    CHECK(detokenize(toks) == text);
  }
  CHECK(normalize_text(kExampleSentence) == kExampleSentence);
}

TEST_CASE("vocab build, ids and file round trip") {
  std::vector<std::string> caps{"b a.", "c a"};
  auto v = Vocab::build(caps);
  CHECK(v.size() == 4 + 4);
  CHECK(v.token(Vocab::kPad) == "[PAD]");
  CHECK(v.token(Vocab::kUnk) == "[UNK]");
  CHECK(v.id(".") == 4);
  CHECK(v.id("a") == 5);
  CHECK(v.id("c") == 7);
  CHECK(v.id("zzz") == Vocab::kUnk);
  for (int id = 4; id < 8; ++id) CHECK(v.id(v.token(id)) == id);

  testutil::TempDir dir;
  v.save(dir.path / "vocab.txt");
  CHECK(testutil::read_text(dir.path / "vocab.txt") == ".\na\nb\nc\n");
  CHECK(Vocab::load(dir.path / "vocab.txt") == v);
  CHECK_THROWS_AS(Vocab::load(dir.path / "missing.txt"), DataError);
}

TEST_CASE("encode/decode examples") {
  std::vector<std::string> caps{"a"};
  auto v = Vocab::build(caps);
  auto seq = encode_ids("a", v, 8);
  CHECK(seq.ids == std::vector<int>{Vocab::kBos, v.id("a"), Vocab::kEos});
  CHECK(seq.inputs() == std::vector<int>{Vocab::kBos, v.id("a")});
  CHECK(seq.labels() == std::vector<int>{v.id("a"), Vocab::kEos});
  CHECK(decode_ids(seq.ids, v) == "a");

  auto oov = encode_ids("a q", v, 8);
  CHECK(oov.ids[2] == Vocab::kUnk);
  CHECK(decode_ids(oov.ids, v) == "a [UNK]");

  CHECK_THROWS_AS(encode_ids("a", v, 2), InvalidArgument);
  auto cut = encode_ids("a a a a a a", v, 4);
  CHECK(cut.ids.size() == 4);
  CHECK(cut.ids.front() == Vocab::kBos);
  CHECK(cut.ids.back() == Vocab::kEos);

  // decode stops at the first EOS and skips padding
  std::vector<int> padded{Vocab::kBos, v.id("a"), Vocab::kPad, Vocab::kEos, v.id("a")};
  CHECK(decode_ids(padded, v) == "a");
}

TEST_CASE("corpus vocabulary is closed over val and test") {
  RunConfig cfg;
  auto corpus = generate_corpus(cfg);
  std::vector<std::string> texts;
  for (const auto& e : select_split(corpus, "train")) texts.push_back(e.caption().text);
  auto vocab = Vocab::build(texts);
  for (const char* split : {"val", "test"}) {
    for (const auto& e : select_split(corpus, split)) {
      auto seq = encode_ids(e.caption().text, vocab, cfg.max_len);
      CHECK(seq.ids.front() == Vocab::kBos);
      CHECK(seq.ids.back() == Vocab::kEos);
      CHECK(std::count(seq.ids.begin(), seq.ids.end(), Vocab::kUnk) == 0);
      CHECK(std::count(seq.ids.begin(), seq.ids.end(), Vocab::kEos) == 1);
      CHECK(decode_ids(seq.ids, vocab) == e.caption().text);
    }
  }
}
