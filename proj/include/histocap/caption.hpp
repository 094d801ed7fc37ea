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
// Caption template, parser, word tokenizer and vocabulary.

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace histocap {

struct Caption {
  std::string tissue_type;
  std::string sex;
  std::string pathology_notes;
  std::string text;

  bool operator==(const Caption&) const = default;
};

// "this is a {tissue} tissue from a {sex} patient and it has {notes}." in
// lowercase; a final period is appended to the notes only if missing.
std::string render_caption(std::string_view tissue_type, std::string_view sex, std::string_view pathology_notes);
Caption make_caption(std::string_view tissue_type, std::string_view sex, std::string_view pathology_notes);

inline constexpr std::string_view kTissueDelimiter = " tissue from a ";
inline constexpr std::string_view kSexDelimiter = " patient and it has ";

struct ParseResult {
  std::optional<Caption> caption;
  std::string error;  // names the missing delimiter when parsing fails

  bool ok() const { return caption.has_value(); }
};

ParseResult parse_caption(std::string_view text);

// Lowercase, whitespace split, with '.', ',' and '-' detached as tokens.
std::vector<std::string> tokenize(std::string_view text);
// Joins with single spaces, reattaching '.' and ',' to the preceding token.
std::string detokenize(std::span<const std::string> tokens);
std::string normalize_text(std::string_view text);

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kNumSpecial = 4;
  static constexpr std::string_view kUnkMarker = "[UNK]";

  Vocab();
  // Sorted set of every token in `captions`.
  static Vocab build(std::span<const std::string> captions);
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  int id(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

// [BOS, tokens..., EOS] with at most max_len entries.
struct TokenSeq {
  std::vector<int> ids;

  std::vector<int> inputs() const;  // without the final EOS
  std::vector<int> labels() const;  // without the leading BOS
};

TokenSeq encode_ids(std::string_view text, const Vocab& vocab, std::size_t max_len);
// Skips BOS/PAD, stops at the first EOS, renders unknown ids as [UNK].
std::string decode_ids(std::span<const int> ids, const Vocab& vocab);

}  // namespace histocap
