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
#include "histocap/caption.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "histocap/error.hpp"

namespace histocap {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool is_detached(char c) { return c == '.' || c == ',' || c == '-'; }

}  // namespace

std::string render_caption(std::string_view tissue_type, std::string_view sex, std::string_view pathology_notes) {
  const auto t = trim(tissue_type), s = trim(sex), n = trim(pathology_notes);
  if (t.empty() || s.empty() || n.empty()) throw InvalidArgument("render_caption: every field must be non-empty");
  std::string notes = n;
  if (notes.back() != '.') notes.push_back('.');
  return lower("this is a " + t + std::string(kTissueDelimiter) + s + std::string(kSexDelimiter) + notes);
}

Caption make_caption(std::string_view tissue_type, std::string_view sex, std::string_view pathology_notes) {
  auto text = render_caption(tissue_type, sex, pathology_notes);
  auto parsed = parse_caption(text);
  return *parsed.caption;
}

ParseResult parse_caption(std::string_view text) {
  const auto p1 = text.find(kTissueDelimiter);
  if (p1 == std::string_view::npos) return {std::nullopt, "missing delimiter '" + std::string(kTissueDelimiter) + "'"};
  const auto rest = text.substr(p1 + kTissueDelimiter.size());
  const auto p2 = rest.find(kSexDelimiter);
  if (p2 == std::string_view::npos) return {std::nullopt, "missing delimiter '" + std::string(kSexDelimiter) + "'"};
  std::string_view head = text.substr(0, p1);
  constexpr std::string_view kLead = "this is a ";
  if (head.starts_with(kLead)) head.remove_prefix(kLead.size());
  Caption c;
  c.tissue_type = trim(head);
  c.sex = trim(rest.substr(0, p2));
  c.pathology_notes = trim(rest.substr(p2 + kSexDelimiter.size()));
  c.text = std::string(text);
  return {std::move(c), {}};
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  const auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_detached(c)) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    const bool attach = t == "." || t == ",";
    if (!out.empty() && !attach) out.push_back(' ');
    out += t;
  }
  return out;
}

std::string normalize_text(std::string_view text) {
  const auto toks = tokenize(text);
  return detokenize(toks);
}

Vocab::Vocab() {
  for (const char* s : {"[PAD]", "[BOS]", "[EOS]", "[UNK]"}) {
    ids_.emplace(s, static_cast<int>(tokens_.size()));
    tokens_.emplace_back(s);
  }
}

void Vocab::add(const std::string& token) {
  if (ids_.count(token)) throw DataError("vocab: duplicate token '" + token + "'");
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocab Vocab::build(std::span<const std::string> captions) {
  std::set<std::string> seen;
  for (const auto& c : captions) {
    for (auto& t : tokenize(c)) seen.insert(std::move(t));
  }
  Vocab v;
  for (const auto& t : seen) v.add(t);
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocab " + path.string());
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw DataError("vocab " + path.string() + ": empty line");
    v.add(line);
  }
  return v;
}

void Vocab::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write vocab " + path.string());
  for (std::size_t i = kNumSpecial; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end() || it->second < kNumSpecial) return kUnk;
  return it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) return tokens_[kUnk];
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> TokenSeq::inputs() const { return {ids.begin(), ids.end() - 1}; }
std::vector<int> TokenSeq::labels() const { return {ids.begin() + 1, ids.end()}; }

TokenSeq encode_ids(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 3) throw InvalidArgument("encode_ids: max_len must be at least 3");
  TokenSeq seq;
  seq.ids.push_back(Vocab::kBos);
  for (const auto& t : tokenize(text)) {
    if (seq.ids.size() >= max_len - 1) break;
    seq.ids.push_back(vocab.id(t));
  }
  seq.ids.push_back(Vocab::kEos);
  return seq;
}

std::string decode_ids(std::span<const int> ids, const Vocab& vocab) {
  std::vector<std::string> toks;
  for (int id : ids) {
    if (id == Vocab::kEos) break;
    if (id == Vocab::kBos || id == Vocab::kPad) continue;
    toks.push_back(id == Vocab::kUnk ? std::string(Vocab::kUnkMarker) : vocab.token(id));
  }
  return detokenize(toks);
}

}  // namespace histocap
