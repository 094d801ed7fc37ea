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
// histocap command-line tool.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "histocap/decoder.hpp"
#include "histocap/error.hpp"
#include "histocap/pipeline.hpp"

namespace {

using namespace histocap;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig resolve(const Globals& g) {
  RunConfig c = g.config_path.empty() ? RunConfig{} : RunConfig::load(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) {
    c.set_root(g.out);
  } else if (!g.config_path.empty()) {
    auto parent = std::filesystem::path(g.config_path).parent_path();
    if (!parent.empty()) c.set_root(parent);
  }
  c.validate();
  return c;
}

void print_counts(const ModelDims& dims, const std::string& label) {
  std::printf("%s: layers %zu, hidden %zu, heads %zu, ffn %zu, vocab %zu\n", label.c_str(), dims.decoder.layers,
              dims.decoder.hidden, dims.decoder.heads, dims.decoder.ffn, dims.decoder.vocab_size);
  auto b = count_params(dims, FreezeSpec::all(dims.decoder.layers));
  std::printf("  embeddings   %zu\n  layer core   %zu\n  layer xattn  %zu\n  head         %zu\n"
              "  pooling      %zu\n  projection   %zu\n  total        %zu\n",
              b.embeddings, b.layer_core, b.layer_cross, b.head, b.pool, b.projection, b.total);
  std::printf("  %-18s %s\n", "unfrozen", "# trained params");
  for (std::size_t n = 1; n <= std::min<std::size_t>(3, dims.decoder.layers); ++n) {
    auto t = count_params(dims, FreezeSpec{n, true, false});
    std::printf("  %-18s %zu\n", ("last " + std::to_string(n) + " + xattn").c_str(), t.trainable);
  }
  std::printf("  %-18s %zu\n", "all", b.trainable);
}

std::size_t toy_vocab_size(const RunConfig& c) {
  auto vocab_path = c.checkpoint_dir / "vocab.txt";
  if (std::filesystem::exists(vocab_path)) return Vocab::load(vocab_path).size();
  std::vector<std::string> texts;
  for (const auto& e : select_split(load_corpus(c), "train")) texts.push_back(e.caption().text);
  return Vocab::build(texts).size();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"histocap: hierarchical slide encoding and caption generation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration (kebab-case keys)");
  app.add_option("--seed", g.seed, "Override the run seed");
  app.add_option("--out", g.out, "Root directory for relative corpus/cache/checkpoint/report paths");

  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic slide corpus manifest (and PNGs)");
  auto* extract = app.add_subcommand("extract-features", "Encode every slide into the feature cache");
  auto* train = app.add_subcommand("train", "Train and keep the best-validation checkpoint");
  auto* caption = app.add_subcommand("caption", "Caption one slide with the trained checkpoint");
  std::string slide_id;
  caption->add_option("slide_id", slide_id, "Slide identifier from the manifest")->required();
  auto* evaluate = app.add_subcommand("evaluate", "Score the checkpoint on a split and write reports");
  std::string split = "test";
  evaluate->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  auto* count = app.add_subcommand("count-params", "Closed-form parameter counts");
  bool bert_base = false;
  count->add_flag("--bert-base", bert_base, "Count at 12/768/12/3072 with a 28996-token vocabulary");
  auto* report = app.add_subcommand("report", "Run the experiment table (all variants, several seeds each)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    RunConfig c = resolve(g);
    if (gen->parsed()) {
      gen_corpus(c, &std::cout);
    } else if (extract->parsed()) {
      extract_features(c, load_corpus(c), &std::cerr);
    } else if (train->parsed()) {
      auto outcome = run_train(c, &std::cerr);
      std::cout << report_table(outcome.test_report);
    } else if (caption->parsed()) {
      std::cout << run_caption(c, slide_id) << '\n';
    } else if (evaluate->parsed()) {
      std::cout << report_table(run_evaluate(c, split, &std::cerr));
    } else if (count->parsed()) {
      if (bert_base) {
        ModelDims dims{DecoderConfig::bert_base(), 576, 128};
        print_counts(dims, "bert-base");
      } else {
        print_counts(c.dims(toy_vocab_size(c)), "configured");
      }
    } else if (report->parsed()) {
      auto table = run_experiment_table(c, default_variants(c), &std::cerr);
      std::filesystem::create_directories(c.report_dir);
      std::ofstream(c.report_dir / "table.txt") << experiment_table_text(table);
      std::ofstream(c.report_dir / "table.json") << experiment_json(table, c);
      std::cout << experiment_table_text(table);
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kOk;
}
