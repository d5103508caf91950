#pragma once

// Reference implementations used only by the tests. They are written with
// plain loops and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hiret/tensor.hpp"

namespace oracle {

inline std::vector<double> linear(const hiret::Tensor& x, const hiret::Tensor& w, const hiret::Tensor& b) {
  const std::size_t rows = x.shape()[0];
  const std::size_t in = x.shape()[1];
  const std::size_t out = w.shape()[0];
  std::vector<double> y(rows * out);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += x[r * in + i] * w[o * in + i];
      y[r * out + o] = s;
    }
  }
  return y;
}

inline std::vector<double> softmax(const std::vector<double>& x) {
  std::vector<double> e(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    e[i] = std::exp(x[i]);
    total += e[i];
  }
  for (double& v : e) v /= total;
  return e;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::pair<std::vector<double>, std::vector<double>> lstm(const hiret::Tensor& x, const hiret::Tensor& h,
                                                                const hiret::Tensor& c, const hiret::Tensor& w,
                                                                const hiret::Tensor& b) {
  const std::size_t H = h.numel();
  const std::size_t in = x.numel();
  std::vector<double> z(in + H);
  for (std::size_t i = 0; i < in; ++i) z[i] = x[i];
  for (std::size_t i = 0; i < H; ++i) z[in + i] = h[i];
  auto gate = [&](std::size_t row) {
    double s = b[row];
    for (std::size_t k = 0; k < z.size(); ++k) s += w[row * z.size() + k] * z[k];
    return s;
  };
  std::vector<double> hn(H), cn(H);
  for (std::size_t j = 0; j < H; ++j) {
    const double ig = sigmoid(gate(j));
    const double fg = sigmoid(gate(H + j));
    const double gg = std::tanh(gate(2 * H + j));
    const double og = sigmoid(gate(3 * H + j));
    cn[j] = fg * c[j] + ig * gg;
    hn[j] = og * std::tanh(cn[j]);
  }
  return {hn, cn};
}

inline double bce(const hiret::Tensor& z, const hiret::Tensor& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < z.numel(); ++i) {
    // -t log σ(z) - (1-t) log(1-σ(z)), with log σ(z) = -log(1+e^{-z}).
    const double log_p = z[i] >= 0 ? -std::log1p(std::exp(-z[i])) : z[i] - std::log1p(std::exp(z[i]));
    const double log_q = log_p - z[i];
    s += -t[i] * log_p - (1.0 - t[i]) * log_q;
  }
  return s / static_cast<double>(z.numel());
}

inline double cross_entropy(const hiret::Tensor& logits, const std::vector<int>& targets) {
  const std::size_t V = logits.shape().back();
  double s = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    double mx = logits[r * V];
    for (std::size_t c = 1; c < V; ++c) mx = std::max(mx, logits[r * V + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < V; ++c) z += std::exp(logits[r * V + c] - mx);
    s += -(logits[r * V + targets[r]] - mx - std::log(z));
  }
  return s / static_cast<double>(targets.size());
}

// Score every entry, sort by (score desc, id asc), keep k.
inline std::vector<std::int64_t> brute_topk(const std::vector<std::vector<double>>& embeddings,
                                            const std::vector<std::int64_t>& ids, const std::vector<double>& query,
                                            std::size_t k) {
  std::vector<std::pair<double, std::int64_t>> scored;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < query.size(); ++j) s += embeddings[i][j] * query[j];
    scored.emplace_back(s, ids[i]);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < k && i < scored.size(); ++i) out.push_back(scored[i].second);
  return out;
}

// Quadratic dynamic program for the longest common subsequence.
inline std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    }
  }
  return t[a.size()][b.size()];
}

// AUC as the probability that a random positive outscores a random negative,
// ties counting one half; computed over all pairs.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline std::map<std::string, int> count_tokens(const std::vector<std::vector<std::string>>& docs) {
  std::map<std::string, int> counts;
  for (const auto& d : docs)
    for (const auto& t : d) ++counts[t];
  return counts;
}

}  // namespace oracle
