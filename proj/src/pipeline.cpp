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
#include "histocap/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "binary_io.hpp"
#include "histocap/checkpoint.hpp"
#include "histocap/error.hpp"
#include "json.hpp"

namespace histocap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_file_atomic(path, std::vector<char>(text.begin(), text.end()));
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string encoder_key(const RunConfig& c) {
  json j = {{"slide-size", c.slide_size},   {"level2-size", c.level2_size}, {"level1-size", c.level1_size},
            {"token-size", c.token_size},   {"d1", c.d1},                   {"d2", c.d2},
            {"depth1", c.depth1},           {"depth2", c.depth2},           {"heads1", c.heads1},
            {"heads2", c.heads2},           {"mlp-ratio", c.mlp_ratio},     {"encoder-seed", c.encoder_seed},
            {"blob-coverage", c.blob_coverage}, {"background-threshold", c.background_threshold}};
  return "enc-" + hex16(fnv1a(j.dump()));
}

json means_json(const CorpusMeans& m) {
  return {{"tissue_accuracy", m.tissue_accuracy}, {"bleu4", m.bleu4},         {"rouge_l", m.rouge_l},
          {"meteor", m.meteor},                   {"n_bleu4", m.n_bleu4},     {"n_rouge_l", m.n_rouge_l},
          {"n_meteor", m.n_meteor}};
}

json metric_config_json(const MetricConfig& m) {
  return {{"bleu_max_n", m.bleu_max_n},
          {"bleu_smoothing", m.bleu_add_one_smoothing ? "add-one for n>=2" : "none"},
          {"rouge_beta", m.rouge_beta},
          {"meteor_alpha", m.meteor_alpha},
          {"meteor_penalty_gamma", m.meteor_penalty_gamma},
          {"meteor_penalty_power", m.meteor_penalty_power},
          {"meteor_matching", "exact"}};
}

// Column order shared by the text tables.
constexpr const char* kColumns[] = {"Tiss. Acc.(%)", "BLEU-4",    "ROUGE-L",  "METEOR",
                                    "N BLEU-4",      "N ROUGE-L", "N METEOR"};

std::vector<double> columns(const CorpusMeans& m) {
  return {m.tissue_accuracy * 100.0, m.bleu4, m.rouge_l, m.meteor, m.n_bleu4, m.n_rouge_l, m.n_meteor};
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

fs::path manifest_path(const RunConfig& config) { return config.corpus_dir / "manifest.jsonl"; }

fs::path image_path(const RunConfig& config, const std::string& slide_id) {
  return config.corpus_dir / "images" / (slide_id + ".png");
}

fs::path feature_path(const RunConfig& config, const std::string& slide_id) {
  return config.cache_dir / encoder_key(config) / (slide_id + ".hcfe");
}

std::vector<CorpusEntry> gen_corpus(const RunConfig& config, std::ostream* log) {
  config.validate();
  auto entries = generate_corpus(config);
  write_manifest(manifest_path(config), entries);
  if (config.write_images) {
    auto synth = config.synth();
    fs::create_directories(config.corpus_dir / "images");
    for (const auto& e : entries) write_png(image_path(config, e.record.slide_id), synth_slide(e.record, synth));
  }
  if (log) *log << "wrote " << entries.size() << " records to " << manifest_path(config).string() << '\n';
  return entries;
}

std::vector<CorpusEntry> load_corpus(const RunConfig& config) {
  auto path = manifest_path(config);
  if (!fs::exists(path)) throw DataError("corpus manifest not found: " + path.string() + " (run gen-corpus)");
  return read_manifest(path);
}

RgbImage load_slide_image(const RunConfig& config, const SlideRecord& record) {
  auto path = image_path(config, record.slide_id);
  if (fs::exists(path)) return read_png(path);
  return synth_slide(record, config.synth());
}

std::optional<SlideFeatures> slide_features(const RunConfig& config, const CorpusEntry& entry,
                                            const HiptEncoder& encoder, std::ostream* log) {
  auto path = feature_path(config, entry.record.slide_id);
  if (fs::exists(path)) {
    auto f = cache_read(path);
    if (f.slide_id != entry.record.slide_id) {
      throw CorruptionError(path.string() + ": cached features belong to " + f.slide_id);
    }
    return f;
  }
  auto image = load_slide_image(config, entry.record);
  auto mask = tissue_mask(image, MaskConfig{config.background_threshold});
  auto patches = tile(image, mask, config.level2_size, entry.record.slide_id);
  if (patches.M() == 0) {
    if (log) *log << "warning: " << entry.record.slide_id << " has no tissue patches; skipped\n";
    return std::nullopt;
  }
  auto f = encoder.encode_slide(patches, image);
  cache_write(f, path);
  return f;
}

ExtractStats extract_features(const RunConfig& config, const std::vector<CorpusEntry>& entries, std::ostream* log) {
  HiptEncoder encoder(config.hipt());
  ExtractStats stats;
  for (const auto& e : entries) {
    bool cached = fs::exists(feature_path(config, e.record.slide_id));
    auto f = slide_features(config, e, encoder, log);
    if (!f) {
      ++stats.skipped;
    } else if (cached) {
      ++stats.cached;
    } else {
      ++stats.encoded;
    }
  }
  if (log) {
    *log << "features: " << stats.encoded << " encoded, " << stats.cached << " cached, " << stats.skipped
         << " skipped\n";
  }
  return stats;
}

std::uint64_t model_seed(const RunConfig& config) {
  std::uint64_t z = config.seed + 0x9E3779B97F4A7C15ULL * (config.init_seed + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

std::vector<TrainSample> build_samples(const RunConfig& config, const std::vector<CorpusEntry>& entries,
                                       const HiptEncoder& encoder, const Vocab& vocab, std::ostream* log) {
  std::vector<TrainSample> out;
  for (const auto& e : entries) {
    auto f = slide_features(config, e, encoder, log);
    if (!f) continue;
    out.push_back({e.record.slide_id, f->to_tensor(), encode_ids(e.caption().text, vocab, config.max_len)});
  }
  return out;
}

json epochs_json(const TrainResult& r) {
  json logs = json::array();
  for (const auto& l : r.logs) {
    logs.push_back({{"epoch", l.epoch},
                    {"train_loss", l.train_loss},
                    {"val_loss", l.val_loss},
                    {"seconds", l.seconds},
                    {"frozen_checksum", hex16(l.frozen_checksum)}});
  }
  return {{"best_epoch", r.best_epoch}, {"updates", r.updates}, {"shuffle", "per-epoch, run seed"}, {"epochs", logs}};
}

}  // namespace

TrainOutcome run_train(const RunConfig& config, std::ostream* log) {
  config.validate();
  auto corpus = load_corpus(config);
  auto train_entries = select_split(corpus, "train");
  auto val_entries = select_split(corpus, "val");
  if (train_entries.empty()) throw DataError("training split is empty");
  if (val_entries.empty()) throw DataError("validation split is empty");

  std::vector<std::string> texts;
  for (const auto& e : train_entries) texts.push_back(e.caption().text);
  Vocab vocab = Vocab::build(texts);

  HiptEncoder encoder(config.hipt());
  auto train = build_samples(config, train_entries, encoder, vocab, log);
  auto val = build_samples(config, val_entries, encoder, vocab, log);
  if (train.empty()) throw DataError("training split has no usable slides");
  if (val.empty()) throw DataError("validation split has no usable slides");

  CaptionModel model(config.dims(vocab.size()), model_seed(config));
  auto [trainable, frozen] = model.apply_freeze(config.freeze());
  if (log) *log << "parameters: " << trainable << " trainable, " << frozen << " frozen\n";

  TrainOptions opts{config.lr, config.accumulation, config.epochs, config.clip, config.seed};
  Trainer trainer(model, opts, encoder.parameters());
  auto result = trainer.fit(train, val, [&](const EpochLog& l) {
    if (log) {
      *log << "epoch " << l.epoch << "  train " << fixed(l.train_loss, 4) << "  val " << fixed(l.val_loss, 4)
           << "  " << fixed(l.seconds, 1) << "s\n";
    }
  });

  fs::create_directories(config.checkpoint_dir);
  save_checkpoint(config.checkpoint_dir / "best.hcpt", model.named_parameters());
  vocab.save(config.checkpoint_dir / "vocab.txt");
  config.save(config.checkpoint_dir / "config.json");
  write_text(config.checkpoint_dir / "epochs.json", epochs_json(result).dump(2) + "\n");
  if (log) *log << "best epoch " << result.best_epoch << " saved to " << (config.checkpoint_dir / "best.hcpt").string() << '\n';

  TrainOutcome outcome;
  outcome.result = std::move(result);
  outcome.trainable = trainable;
  outcome.frozen = frozen;
  auto loaded = load_model(config);
  outcome.test_report = evaluate_model(config, loaded, "test", log);
  write_report(outcome.test_report, config, config.report_dir);
  return outcome;
}

LoadedModel load_model(const RunConfig& config) {
  auto vocab_path = config.checkpoint_dir / "vocab.txt";
  auto ckpt_path = config.checkpoint_dir / "best.hcpt";
  if (!fs::exists(vocab_path) || !fs::exists(ckpt_path)) {
    throw DataError("no checkpoint in " + config.checkpoint_dir.string() + " (run train)");
  }
  Vocab vocab = Vocab::load(vocab_path);
  LoadedModel loaded{vocab, CaptionModel(config.dims(vocab.size()), model_seed(config))};
  auto params = loaded.model.named_parameters();
  load_checkpoint_into(ckpt_path, params);
  loaded.model.apply_freeze(config.freeze());
  return loaded;
}

EvalReport evaluate_model(const RunConfig& config, const LoadedModel& loaded, const std::string& split,
                          std::ostream* log) {
  auto entries = select_split(load_corpus(config), split);
  if (entries.empty()) throw DataError(split + " split is empty");
  HiptEncoder encoder(config.hipt());
  std::vector<EvalPair> pairs;
  for (const auto& e : entries) {
    auto f = slide_features(config, e, encoder, log);
    if (!f) continue;
    auto ids = loaded.model.generate(f->to_tensor(), config.max_len);
    pairs.push_back({e.record.slide_id, decode_ids(ids.ids, loaded.vocab), e.caption()});
  }
  if (pairs.empty()) throw DataError(split + " split has no usable slides");
  auto report = evaluate_corpus(pairs);
  report.seed = config.seed;
  report.config_hash = config.hash();
  return report;
}

EvalReport run_evaluate(const RunConfig& config, const std::string& split, std::ostream* log) {
  auto loaded = load_model(config);
  auto report = evaluate_model(config, loaded, split, log);
  write_report(report, config, config.report_dir);
  return report;
}

std::string run_caption(const RunConfig& config, const std::string& slide_id) {
  auto corpus = load_corpus(config);
  auto it = std::find_if(corpus.begin(), corpus.end(), [&](const CorpusEntry& e) { return e.record.slide_id == slide_id; });
  if (it == corpus.end()) throw DataError("unknown slide id " + slide_id);
  auto loaded = load_model(config);
  HiptEncoder encoder(config.hipt());
  auto f = slide_features(config, *it, encoder);
  if (!f) throw DataError(slide_id + " has no tissue patches");
  return decode_ids(loaded.model.generate(f->to_tensor(), config.max_len).ids, loaded.vocab);
}

std::string report_json(const EvalReport& report, const RunConfig& config) {
  json samples = json::array();
  for (const auto& s : report.samples) {
    samples.push_back({{"slide_id", s.slide_id},
                       {"parse_ok", s.parse_ok},
                       {"tissue_correct", s.tissue_correct},
                       {"bleu4", s.bleu4},
                       {"rouge_l", s.rouge_l},
                       {"meteor", s.meteor},
                       {"n_bleu4", s.n_bleu4},
                       {"n_rouge_l", s.n_rouge_l},
                       {"n_meteor", s.n_meteor}});
  }
  json j = {{"config_hash", report.config_hash},
            {"seed", report.seed},
            {"config", json::parse(config.to_json(false))},
            {"metrics", metric_config_json(report.config)},
            {"count", report.samples.size()},
            {"means", means_json(report.means)},
            {"samples", samples}};
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& report) {
  std::ostringstream os;
  std::string header = pad("Split", 10);
  for (const char* c : kColumns) header += pad(c, 15);
  os << header << '\n' << std::string(header.size(), '-') << '\n';
  std::string row = pad("test", 10);
  auto cols = columns(report.means);
  for (std::size_t i = 0; i < cols.size(); ++i) row += pad(fixed(cols[i], i == 0 ? 3 : 4), 15);
  os << row << '\n';
  os << "samples " << report.samples.size() << ", config " << report.config_hash << '\n';
  return os.str();
}

std::string samples_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "slide_id,parse_ok,tissue_correct,bleu4,rouge_l,meteor,n_bleu4,n_rouge_l,n_meteor\n";
  for (const auto& s : report.samples) {
    os << s.slide_id << ',' << (s.parse_ok ? 1 : 0) << ',' << s.tissue_correct << ',' << fmt17(s.bleu4) << ','
       << fmt17(s.rouge_l) << ',' << fmt17(s.meteor) << ',' << fmt17(s.n_bleu4) << ',' << fmt17(s.n_rouge_l) << ','
       << fmt17(s.n_meteor) << '\n';
  }
  return os.str();
}

void write_report(const EvalReport& report, const RunConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "report.json", report_json(report, config));
  write_text(dir / "report.txt", report_table(report));
  write_text(dir / "samples.csv", samples_csv(report));
}

std::vector<Variant> default_variants(const RunConfig& config) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t r = 0; r < config.runs; ++r) seeds.push_back(config.seed + r);
  std::vector<Variant> out;
  for (std::uint64_t init = 0; init < 3; ++init) {
    out.push_back({"init-" + std::to_string(init), FreezeSpec::all(config.decoder_layers), seeds, init});
  }
  for (std::size_t n = 1; n <= config.decoder_layers; ++n) {
    out.push_back({"last-" + std::to_string(n) + "+xattn", FreezeSpec{n, true, false}, seeds, 0});
  }
  return out;
}

std::pair<CorpusMeans, CorpusMeans> mean_and_std(const std::vector<CorpusMeans>& runs) {
  if (runs.empty()) throw InvalidArgument("no runs to aggregate");
  const double n = static_cast<double>(runs.size());
  double CorpusMeans::*fields[] = {&CorpusMeans::tissue_accuracy, &CorpusMeans::bleu4,   &CorpusMeans::rouge_l,
                                   &CorpusMeans::meteor,          &CorpusMeans::n_bleu4, &CorpusMeans::n_rouge_l,
                                   &CorpusMeans::n_meteor};
  CorpusMeans mean, sd;
  for (auto f : fields) {
    double s = 0.0;
    for (const auto& r : runs) s += r.*f;
    double mu = s / n;
    double ss = 0.0;
    for (const auto& r : runs) ss += (r.*f - mu) * (r.*f - mu);
    mean.*f = mu;
    sd.*f = std::sqrt(ss / n);
  }
  return {mean, sd};
}

ExperimentReport run_experiment_table(const RunConfig& config, const std::vector<Variant>& variants,
                                      std::ostream* log) {
  if (variants.empty()) throw InvalidArgument("no variants to run");
  ExperimentReport report;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const auto& variant = variants[v];
    if (variant.seeds.empty()) throw InvalidArgument("variant " + variant.name + " has no seeds");
    VariantRow row;
    row.name = variant.name;
    for (auto seed : variant.seeds) {
      RunConfig rc = config;
      rc.seed = seed;
      rc.init_seed = variant.init_seed;
      rc.unfreeze_last_n = static_cast<long>(variant.freeze.unfreeze_last_n);
      rc.unfreeze_all_xattn = variant.freeze.unfreeze_all_xattn;
      rc.unfreeze_embeddings = variant.freeze.unfreeze_embeddings;
      auto dir = config.report_dir / "variants" / variant.name / ("seed-" + std::to_string(seed));
      rc.checkpoint_dir = dir / "checkpoint";
      rc.report_dir = dir;
      if (log) *log << "== " << variant.name << " seed " << seed << '\n';
      auto outcome = run_train(rc, log);
      row.trained_params = outcome.trainable;
      row.runs.push_back(outcome.test_report.means);
    }
    std::tie(row.mean, row.std) = mean_and_std(row.runs);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string experiment_table_text(const ExperimentReport& report) {
  std::ostringstream os;
  std::string header = pad("Unfrozen", 16) + pad("# Trained Params", 18);
  for (const char* c : kColumns) header += pad(c, 20);
  os << header << '\n' << std::string(header.size(), '-') << '\n';
  for (const auto& row : report.rows) {
    std::string line = pad(row.name, 16) + pad(std::to_string(row.trained_params), 18);
    auto mu = columns(row.mean);
    auto sd = columns(row.std);
    for (std::size_t i = 0; i < mu.size(); ++i) {
      int digits = i == 0 ? 2 : 3;
      line += pad(fixed(mu[i], digits) + "/" + fixed(sd[i], digits), 20);
    }
    os << line << '\n';
  }
  os << "mean/std over runs; std is the population standard deviation\n";
  return os.str();
}

std::string experiment_json(const ExperimentReport& report, const RunConfig& config) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    json runs = json::array();
    for (const auto& r : row.runs) runs.push_back(means_json(r));
    rows.push_back({{"name", row.name},
                    {"trained_params", row.trained_params},
                    {"mean", means_json(row.mean)},
                    {"std", means_json(row.std)},
                    {"runs", runs}});
  }
  json j = {{"config_hash", config.hash()},
            {"config", json::parse(config.to_json(false))},
            {"std", "population"},
            {"rows", rows}};
  return j.dump(2) + "\n";
}

}  // namespace histocap
