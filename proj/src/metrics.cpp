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
#include "histocap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "histocap/error.hpp"

namespace histocap {

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, int> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  std::map<Ngram, int> counts;
  if (toks.size() < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[Ngram(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                                                    toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

std::string lower_trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

double bleu4_tokens(const std::vector<std::string>& hyp, const std::vector<std::string>& ref, const MetricConfig& cfg) {
  if (hyp.empty() || ref.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= cfg.bleu_max_n; ++n) {
    const auto h = ngram_counts(hyp, static_cast<std::size_t>(n));
    const auto r = ngram_counts(ref, static_cast<std::size_t>(n));
    double matched = 0.0, total = 0.0;
    for (const auto& [g, c] : h) {
      total += c;
      auto it = r.find(g);
      if (it != r.end()) matched += std::min(c, it->second);
    }
    if (n >= 2 && cfg.bleu_add_one_smoothing) {
      matched += 1.0;
      total += 1.0;
    }
    if (matched == 0.0) return 0.0;
    log_sum += std::log(matched / total);
  }
  const double c = static_cast<double>(hyp.size()), r = static_cast<double>(ref.size());
  const double bp = c >= r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / cfg.bleu_max_n);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_tokens(const std::vector<std::string>& hyp, const std::vector<std::string>& ref, const MetricConfig& cfg) {
  if (hyp.empty() || ref.empty()) return 0.0;
  const double lcs = static_cast<double>(lcs_length(hyp, ref));
  if (lcs == 0.0) return 0.0;
  const double recall = lcs / static_cast<double>(ref.size());
  const double precision = lcs / static_cast<double>(hyp.size());
  const double b2 = cfg.rouge_beta * cfg.rouge_beta;
  return (1.0 + b2) * recall * precision / (recall + b2 * precision);
}

namespace {

std::size_t count_chunks(const std::vector<int>& h_to_r) {
  std::size_t chunks = 0;
  for (std::size_t i = 0; i < h_to_r.size(); ++i) {
    if (h_to_r[i] < 0) continue;
    if (!(i > 0 && h_to_r[i - 1] >= 0 && h_to_r[i - 1] + 1 == h_to_r[i])) ++chunks;
  }
  return chunks;
}

// Repeatedly aligns the longest common run of unaligned positions (earliest
// hypothesis then reference position on ties). Yields a maximal-match
// alignment whose chunk count seeds the exact search below.
std::vector<int> greedy_runs(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                             std::map<std::string, int> budget) {
  std::vector<int> h_to_r(hyp.size(), -1);
  std::vector<bool> r_used(ref.size(), false);
  while (true) {
    std::size_t best_len = 0, bi = 0, bj = 0;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
      if (h_to_r[i] >= 0) continue;
      for (std::size_t j = 0; j < ref.size(); ++j) {
        std::size_t len = 0;
        std::map<std::string, int> need;
        while (i + len < hyp.size() && j + len < ref.size() && h_to_r[i + len] < 0 && !r_used[j + len] &&
               hyp[i + len] == ref[j + len] && ++need[hyp[i + len]] <= budget[hyp[i + len]]) {
          ++len;
        }
        if (len > best_len) {
          best_len = len;
          bi = i;
          bj = j;
        }
      }
    }
    if (best_len == 0) break;
    for (std::size_t k = 0; k < best_len; ++k) {
      h_to_r[bi + k] = static_cast<int>(bj + k);
      r_used[bj + k] = true;
      --budget[hyp[bi + k]];
    }
  }
  return h_to_r;
}

// Depth-first search over hypothesis positions for the alignment with the
// fewest chunks among those matching every word type min(count_h, count_r)
// times. Branches are pruned once they reach the best chunk count so far.
class ChunkSearch {
 public:
  ChunkSearch(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
              const std::map<std::string, int>& budget, std::size_t upper_bound)
      : hyp_(hyp), ref_(ref), budget_(budget), best_(upper_bound), r_used_(ref.size(), false),
        h_to_r_(hyp.size(), -1) {
    remaining_hyp_.resize(hyp.size() + 1);
    for (std::size_t i = hyp.size(); i-- > 0;) {
      remaining_hyp_[i] = remaining_hyp_[i + 1];
      ++remaining_hyp_[i][hyp[i]];
    }
  }

  std::size_t run() {
    dfs(0, 0);
    return best_;
  }

 private:
  void dfs(std::size_t i, std::size_t chunks) {
    // Degenerate inputs with long runs of repeated words are cut off here;
    // the answer is then the best alignment found so far.
    if (chunks >= best_ || ++nodes_ > kMaxNodes) return;
    if (i == hyp_.size()) {
      best_ = chunks;
      return;
    }
    const auto& word = hyp_[i];
    int& left = budget_[word];
    const int prev = i > 0 ? h_to_r_[i - 1] : -1;
    if (left > 0) {
      // Prefer continuing the current chunk first so good bounds come early.
      if (prev >= 0 && static_cast<std::size_t>(prev + 1) < ref_.size() && !r_used_[static_cast<std::size_t>(prev + 1)] &&
          ref_[static_cast<std::size_t>(prev + 1)] == word) {
        assign(i, prev + 1, chunks, left);
      }
      for (std::size_t j = 0; j < ref_.size(); ++j) {
        if (r_used_[j] || ref_[j] != word || (prev >= 0 && static_cast<int>(j) == prev + 1)) continue;
        assign(i, static_cast<int>(j), chunks + 1, left);
      }
    }
    // Leaving position i unaligned is allowed only if later occurrences can
    // still use up this word's budget.
    const auto it = remaining_hyp_[i + 1].find(word);
    const int later = it == remaining_hyp_[i + 1].end() ? 0 : it->second;
    if (later >= left) dfs(i + 1, chunks);
  }

  void assign(std::size_t i, int j, std::size_t chunks, int& left) {
    h_to_r_[i] = j;
    r_used_[static_cast<std::size_t>(j)] = true;
    --left;
    dfs(i + 1, chunks);
    ++left;
    r_used_[static_cast<std::size_t>(j)] = false;
    h_to_r_[i] = -1;
  }

  const std::vector<std::string>& hyp_;
  const std::vector<std::string>& ref_;
  std::map<std::string, int> budget_;
  std::size_t best_;
  std::vector<bool> r_used_;
  std::vector<int> h_to_r_;
  std::vector<std::map<std::string, int>> remaining_hyp_;
  static constexpr std::size_t kMaxNodes = 2'000'000;
  std::size_t nodes_ = 0;
};

}  // namespace

MeteorAlignment meteor_align(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  std::map<std::string, std::pair<int, int>> counts;
  for (const auto& t : hyp) ++counts[t].first;
  for (const auto& t : ref) ++counts[t].second;
  std::map<std::string, int> budget;
  std::size_t m = 0;
  for (const auto& [t, c] : counts) {
    const int k = std::min(c.first, c.second);
    if (k > 0) budget[t] = k;
    m += static_cast<std::size_t>(k);
  }
  if (m == 0) return {};
  const std::size_t greedy = count_chunks(greedy_runs(hyp, ref, budget));
  if (greedy == 1) return {m, 1};
  // The search only improves on strictly fewer chunks, so seed it with
  // greedy + 1 to let it rediscover the greedy value if that is optimal.
  return {m, ChunkSearch(hyp, ref, budget, greedy + 1).run()};
}

double meteor_tokens(const std::vector<std::string>& hyp, const std::vector<std::string>& ref, const MetricConfig& cfg) {
  if (hyp.empty() || ref.empty()) return 0.0;
  const auto a = meteor_align(hyp, ref);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(hyp.size());
  const double r = m / static_cast<double>(ref.size());
  const double fmean = p * r / (cfg.meteor_alpha * p + (1.0 - cfg.meteor_alpha) * r);
  const double penalty = cfg.meteor_penalty_gamma * std::pow(static_cast<double>(a.chunks) / m, cfg.meteor_penalty_power);
  return fmean * (1.0 - penalty);
}

double bleu4(std::string_view hypothesis, std::string_view reference, const MetricConfig& cfg) {
  return bleu4_tokens(tokenize(hypothesis), tokenize(reference), cfg);
}
double rouge_l(std::string_view hypothesis, std::string_view reference, const MetricConfig& cfg) {
  return rouge_l_tokens(tokenize(hypothesis), tokenize(reference), cfg);
}
double meteor(std::string_view hypothesis, std::string_view reference, const MetricConfig& cfg) {
  return meteor_tokens(tokenize(hypothesis), tokenize(reference), cfg);
}

int tissue_accuracy(std::string_view generated, std::string_view actual_tissue) {
  const auto parsed = parse_caption(generated);
  if (!parsed.ok()) return 0;
  return lower_trim(parsed.caption->tissue_type) == lower_trim(actual_tissue) ? 1 : 0;
}

CorpusMeans corpus_means(const std::vector<SampleScores>& samples) {
  if (samples.empty()) throw InvalidArgument("corpus_means: no samples");
  CorpusMeans m;
  for (const auto& s : samples) {
    m.tissue_accuracy += s.tissue_correct;
    m.bleu4 += s.bleu4;
    m.rouge_l += s.rouge_l;
    m.meteor += s.meteor;
    m.n_bleu4 += s.n_bleu4;
    m.n_rouge_l += s.n_rouge_l;
    m.n_meteor += s.n_meteor;
  }
  const double n = static_cast<double>(samples.size());
  for (double* v : {&m.tissue_accuracy, &m.bleu4, &m.rouge_l, &m.meteor, &m.n_bleu4, &m.n_rouge_l, &m.n_meteor}) *v /= n;
  return m;
}

EvalReport evaluate_corpus(const std::vector<EvalPair>& pairs, const MetricConfig& cfg) {
  if (pairs.empty()) throw InvalidArgument("evaluate_corpus: no pairs");
  EvalReport report;
  report.config = cfg;
  for (const auto& p : pairs) {
    SampleScores s;
    s.slide_id = p.slide_id;
    const auto hyp = tokenize(p.generated);
    const auto ref = tokenize(p.gold.text);
    s.bleu4 = bleu4_tokens(hyp, ref, cfg);
    s.rouge_l = rouge_l_tokens(hyp, ref, cfg);
    s.meteor = meteor_tokens(hyp, ref, cfg);
    const auto parsed = parse_caption(p.generated);
    s.parse_ok = parsed.ok();
    s.tissue_correct = tissue_accuracy(p.generated, p.gold.tissue_type);
    if (parsed.ok()) {
      const auto nh = tokenize(parsed.caption->pathology_notes);
      const auto nr = tokenize(p.gold.pathology_notes);
      s.n_bleu4 = bleu4_tokens(nh, nr, cfg);
      s.n_rouge_l = rouge_l_tokens(nh, nr, cfg);
      s.n_meteor = meteor_tokens(nh, nr, cfg);
    }
    report.samples.push_back(std::move(s));
  }
  report.means = corpus_means(report.samples);
  return report;
}

}  // namespace histocap
