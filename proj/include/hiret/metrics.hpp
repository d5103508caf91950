#pragma once

#include <array>
#include <string>
#include <vector>

#include "hiret/corpus.hpp"

namespace hiret {

using Tokens = std::vector<std::string>;

// Sentence-level BLEU-n against one reference: geometric mean of clipped
// i-gram precisions (i <= n) times the brevity penalty, no smoothing.
double bleu(const Tokens& candidate, const Tokens& reference, int n);

// Corpus BLEU-n: clipped counts and lengths are summed over all pairs before
// the precisions and brevity penalty are formed.
double corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references, int n);

std::size_t lcs_length(const Tokens& a, const Tokens& b);
double rouge_l(const Tokens& candidate, const Tokens& reference, double beta = 1.2);

// CIDEr-D style consensus score, mean over pairs, in [0, 10]. Document
// frequencies come from the references; idf = log((N + 1) / (df + 1)).
// Hypothesis counts are clipped to the reference counts and a Gaussian length
// penalty with sigma = 6 is applied.
double cider(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references);
// Per-pair CIDEr values (same document frequencies as cider()).
std::vector<double> cider_scores(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references);

// Area under the ROC curve via the rank-sum statistic; tied scores share
// their mean rank. labels are 0/1. Requires both classes to be present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct ClinicalAuc {
  double mean = 0.0;  // NaN when no class could be scored
  std::vector<double> per_class;  // NaN for skipped classes
  std::vector<std::size_t> skipped;
};

// Per class, a report's score is the fraction of the class's unique template
// tokens it contains; AUC against the true labels, macro-averaged over the
// classes that have both positive and negative samples.
ClinicalAuc clinical_auc(const std::vector<Tokens>& generated, const std::vector<std::vector<int>>& labels,
                         const SyntheticWorld& world);

struct MetricReport {
  double cider = 0.0;
  double rouge_l = 0.0;
  std::array<double, 4> bleu{};
  double auc = 0.0;
};

MetricReport evaluate_reports(const std::vector<Tokens>& candidates, const std::vector<Tokens>& references,
                              const std::vector<std::vector<int>>& labels, const SyntheticWorld& world);

Tokens flatten(const std::vector<Sentence>& sentences);

}  // namespace hiret
