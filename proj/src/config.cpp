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
#include "histocap/config.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "histocap/error.hpp"
#include "json.hpp"

namespace histocap {

using nlohmann::json;

namespace {

// One table drives both directions of (de)serialisation.
template <typename Fn>
void visit_fields(RunConfig& c, Fn&& fn) {
  fn("slide-size", c.slide_size);
  fn("level2-size", c.level2_size);
  fn("level1-size", c.level1_size);
  fn("token-size", c.token_size);
  fn("d1", c.d1);
  fn("d2", c.d2);
  fn("depth1", c.depth1);
  fn("depth2", c.depth2);
  fn("heads1", c.heads1);
  fn("heads2", c.heads2);
  fn("mlp-ratio", c.mlp_ratio);
  fn("encoder-seed", c.encoder_seed);
  fn("pool-hidden", c.pool_hidden);
  fn("decoder-layers", c.decoder_layers);
  fn("decoder-hidden", c.decoder_hidden);
  fn("decoder-heads", c.decoder_heads);
  fn("decoder-ffn", c.decoder_ffn);
  fn("max-len", c.max_len);
  fn("tie-lm-head", c.tie_lm_head);
  fn("unfreeze-last-n", c.unfreeze_last_n);
  fn("unfreeze-all-xattn", c.unfreeze_all_xattn);
  fn("unfreeze-embeddings", c.unfreeze_embeddings);
  fn("lr", c.lr);
  fn("reference-lr", c.reference_lr);
  fn("accumulation", c.accumulation);
  fn("epochs", c.epochs);
  fn("clip", c.clip);
  fn("seed", c.seed);
  fn("init-seed", c.init_seed);
  fn("train-size", c.train_size);
  fn("val-size", c.val_size);
  fn("test-size", c.test_size);
  fn("blob-coverage", c.blob_coverage);
  fn("background-threshold", c.background_threshold);
  fn("write-images", c.write_images);
  fn("runs", c.runs);
  fn("corpus-dir", c.corpus_dir);
  fn("cache-dir", c.cache_dir);
  fn("checkpoint-dir", c.checkpoint_dir);
  fn("report-dir", c.report_dir);
}

}  // namespace

HiptConfig RunConfig::hipt() const {
  HiptConfig h;
  h.level2_size = level2_size;
  h.level1_size = level1_size;
  h.level1 = ViTConfig{level1_size, token_size, token_size * token_size * 3, d1, depth1, heads1, mlp_ratio};
  h.level2 = ViTConfig{level2_size, level1_size, d1, d2, depth2, heads2, mlp_ratio};
  h.seed = encoder_seed;
  return h;
}

DecoderConfig RunConfig::decoder(std::size_t vocab_size) const {
  return DecoderConfig{decoder_layers, decoder_hidden, decoder_heads, decoder_ffn, vocab_size, max_len, tie_lm_head};
}

FreezeSpec RunConfig::freeze() const {
  const std::size_t n = unfreeze_last_n < 0 ? decoder_layers : static_cast<std::size_t>(unfreeze_last_n);
  return FreezeSpec{n, unfreeze_all_xattn, unfreeze_embeddings};
}

ModelDims RunConfig::dims(std::size_t vocab_size) const {
  return ModelDims{decoder(vocab_size), d1 + d2, pool_hidden};
}

SynthConfig RunConfig::synth() const {
  auto s = default_synth_config(level2_size);
  s.blob_coverage = blob_coverage;
  return s;
}

void RunConfig::set_root(const std::filesystem::path& root) {
  for (auto* p : {&corpus_dir, &cache_dir, &checkpoint_dir, &report_dir}) {
    if (p->is_relative()) *p = root / *p;
  }
}

void RunConfig::validate() const {
  hipt().validate();
  if (slide_size == 0 || slide_size % level2_size != 0) {
    throw InvalidArgument("config: slide-size must be a positive multiple of level2-size");
  }
  if (accumulation == 0) throw InvalidArgument("config: accumulation must be positive");
  if (epochs == 0) throw InvalidArgument("config: epochs must be positive");
  if (!(clip > 0.0)) throw InvalidArgument("config: clip must be positive");
  if (!(lr > 0.0)) throw InvalidArgument("config: lr must be positive");
  if (unfreeze_last_n > static_cast<long>(decoder_layers)) {
    throw InvalidArgument("config: unfreeze-last-n exceeds decoder-layers");
  }
  if (runs == 0) throw InvalidArgument("config: runs must be positive");
}

std::string RunConfig::to_json(bool include_paths) const {
  json j = json::object();
  auto copy = *this;
  visit_fields(copy, [&](const char* key, auto& field) {
    using T = std::decay_t<decltype(field)>;
    if constexpr (std::is_same_v<T, std::filesystem::path>) {
      if (include_paths) j[key] = field.generic_string();
    } else {
      j[key] = field;
    }
  });
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("config: top-level value must be an object");
  RunConfig c;
  std::size_t known = 0;
  visit_fields(c, [&](const char* key, auto& field) {
    auto it = j.find(key);
    if (it == j.end()) return;
    ++known;
    using T = std::decay_t<decltype(field)>;
    try {
      if constexpr (std::is_same_v<T, std::filesystem::path>) {
        field = it->template get<std::string>();
      } else {
        field = it->template get<T>();
      }
    } catch (const json::exception& e) {
      throw InvalidArgument(std::string("config: bad value for '") + key + "': " + e.what());
    }
  });
  if (known != j.size()) {
    for (const auto& [key, value] : j.items()) {
      bool found = false;
      visit_fields(c, [&](const char* k, auto&) { found = found || key == k; });
      if (!found) throw InvalidArgument("config: unknown key '" + key + "'");
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write config " + path.string());
  out << to_json() << '\n';
}

std::string RunConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_json(/*include_paths=*/false)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace histocap
