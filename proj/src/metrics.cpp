#include "hiret/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "hiret/errors.hpp"

namespace hiret {

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts out;
  if (tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

struct BleuCounts {
  std::array<double, 4> matched{};
  std::array<double, 4> total{};
  double cand_len = 0.0;
  double ref_len = 0.0;
};

void accumulate(BleuCounts& acc, const Tokens& cand, const Tokens& ref, int n) {
  for (int i = 1; i <= n; ++i) {
    const auto c = ngrams(cand, static_cast<std::size_t>(i));
    const auto r = ngrams(ref, static_cast<std::size_t>(i));
    for (const auto& [gram, count] : c) {
      auto it = r.find(gram);
      acc.matched[static_cast<std::size_t>(i - 1)] += it == r.end() ? 0 : std::min(count, it->second);
      acc.total[static_cast<std::size_t>(i - 1)] += count;
    }
  }
  acc.cand_len += static_cast<double>(cand.size());
  acc.ref_len += static_cast<double>(ref.size());
}

double finish(const BleuCounts& acc, int n) {
  if (acc.cand_len == 0.0) return 0.0;
  double log_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (acc.matched[k] == 0.0 || acc.total[k] == 0.0) return 0.0;
    log_sum += std::log(acc.matched[k] / acc.total[k]);
  }
  const double bp = acc.cand_len >= acc.ref_len ? 1.0 : std::exp(1.0 - acc.ref_len / acc.cand_len);
  return bp * std::exp(log_sum / n);
}

void check_order(int n) {
  if (n < 1 || n > 4) throw ValidationError("BLEU order must be in 1..4, got " + std::to_string(n));
}

void check_pairs(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ValidationError(std::to_string(a) + " candidates but " + std::to_string(b) + " references");
  }
}

}  // namespace

double bleu(const Tokens& candidate, const Tokens& reference, int n) {
  check_order(n);
  BleuCounts acc;
  accumulate(acc, candidate, reference, n);
  return finish(acc, n);
}

double corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references, int n) {
  check_order(n);
  check_pairs(candidates.size(), references.size());
  BleuCounts acc;
  for (std::size_t i = 0; i < candidates.size(); ++i) accumulate(acc, candidates[i], references[i], n);
  return finish(acc, n);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference, double beta) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  const double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

std::vector<double> cider_scores(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references) {
  check_pairs(candidates.size(), references.size());
  constexpr int kMaxN = 4;
  constexpr double kSigma = 6.0;
  const auto docs = static_cast<double>(references.size());

  std::array<std::map<std::vector<std::string>, double>, kMaxN> df;
  for (const auto& ref : references) {
    for (int n = 1; n <= kMaxN; ++n) {
      for (const auto& [gram, _] : ngrams(ref, static_cast<std::size_t>(n))) df[n - 1][gram] += 1.0;
    }
  }
  auto weights = [&](const NgramCounts& counts, int n) {
    std::map<std::vector<std::string>, double> vec;
    for (const auto& [gram, count] : counts) {
      auto it = df[static_cast<std::size_t>(n - 1)].find(gram);
      const double d = it == df[static_cast<std::size_t>(n - 1)].end() ? 0.0 : it->second;
      vec[gram] = count * std::log((docs + 1.0) / (d + 1.0));
    }
    return vec;
  };
  auto norm = [](const std::map<std::vector<std::string>, double>& v) {
    double s = 0.0;
    for (const auto& [_, x] : v) s += x * x;
    return std::sqrt(s);
  };

  std::vector<double> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double delta = static_cast<double>(candidates[i].size()) - static_cast<double>(references[i].size());
    const double penalty = std::exp(-(delta * delta) / (2.0 * kSigma * kSigma));
    double total = 0.0;
    for (int n = 1; n <= kMaxN; ++n) {
      const auto hyp = weights(ngrams(candidates[i], static_cast<std::size_t>(n)), n);
      const auto ref = weights(ngrams(references[i], static_cast<std::size_t>(n)), n);
      const double nh = norm(hyp);
      const double nr = norm(ref);
      if (nh == 0.0 || nr == 0.0) continue;
      double dot = 0.0;
      for (const auto& [gram, w] : hyp) {
        auto it = ref.find(gram);
        if (it != ref.end()) dot += std::min(w, it->second) * it->second;
      }
      total += penalty * dot / (nh * nr);
    }
    out.push_back(10.0 * total / kMaxN);
  }
  return out;
}

double cider(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references) {
  const auto scores = cider_scores(candidates, references);
  if (scores.empty()) return 0.0;
  double s = 0.0;
  for (double x : scores) s += x;
  return s / static_cast<double>(scores.size());
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_pairs(scores.size(), labels.size());
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double pos = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      pos += 1.0;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw ValidationError("AUC needs both positive and negative samples");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

ClinicalAuc clinical_auc(const std::vector<Tokens>& generated, const std::vector<std::vector<int>>& labels,
                         const SyntheticWorld& world) {
  check_pairs(generated.size(), labels.size());
  ClinicalAuc out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < world.num_classes(); ++c) {
    const auto keywords = world.class_unique_tokens(c);
    std::vector<double> scores;
    std::vector<int> truth;
    for (std::size_t i = 0; i < generated.size(); ++i) {
      const std::set<std::string> present(generated[i].begin(), generated[i].end());
      double hits = 0.0;
      for (const auto& k : keywords) hits += present.contains(k) ? 1.0 : 0.0;
      scores.push_back(keywords.empty() ? 0.0 : hits / static_cast<double>(keywords.size()));
      truth.push_back(std::find(labels[i].begin(), labels[i].end(), static_cast<int>(c)) != labels[i].end() ? 1 : 0);
    }
    const auto positives = std::count(truth.begin(), truth.end(), 1);
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(truth.size())) {
      spdlog::warn("clinical AUC: class '{}' has no {} samples; skipped", world.classes()[c].name,
                   positives == 0 ? "positive" : "negative");
      out.per_class.push_back(nan);
      out.skipped.push_back(c);
      continue;
    }
    const double auc = roc_auc(scores, truth);
    out.per_class.push_back(auc);
    sum += auc;
    ++used;
  }
  out.mean = used == 0 ? nan : sum / static_cast<double>(used);
  return out;
}

MetricReport evaluate_reports(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                              const std::vector<std::vector<int>>& labels, const SyntheticWorld& world) {
  check_pairs(candidates.size(), references.size());
  MetricReport r;
  r.cider = cider(candidates, references);
  double rl = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) rl += rouge_l(candidates[i], references[i]);
  r.rouge_l = candidates.empty() ? 0.0 : rl / static_cast<double>(candidates.size());
  for (int n = 1; n <= 4; ++n) r.bleu[static_cast<std::size_t>(n - 1)] = corpus_bleu(candidates, references, n);
  r.auc = clinical_auc(candidates, labels, world).mean;
  return r;
}

Tokens flatten(const std::vector<Sentence>& sentences) {
  Tokens out;
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace hiret
