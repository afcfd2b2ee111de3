// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sentmatch/objectives.hpp"

namespace sentmatch {

/// Sample Pearson correlation. Rejects constant inputs.
inline double metric_pearson(std::span<const double> pred, std::span<const double> gold) {
  if (pred.empty() || pred.size() != gold.size())
    throw std::invalid_argument("pearson: need equal, nonempty inputs (got " + std::to_string(pred.size()) + " and " +
                                std::to_string(gold.size()) + ")");
  const double n = static_cast<double>(pred.size());
  const double mp = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
  const double mg = std::accumulate(gold.begin(), gold.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dx = pred[i] - mp, dy = gold[i] - mg;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::domain_error("pearson: predictions have zero variance");
  if (syy == 0.0) throw std::domain_error("pearson: gold scores have zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Ranks starting at 1; tied values share their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double metric_spearman(std::span<const double> pred, std::span<const double> gold) {
  const auto rp = average_ranks(pred), rg = average_ranks(gold);
  return metric_pearson(rp, rg);
}

inline double metric_mse(std::span<const double> pred, std::span<const double> gold) {
  if (pred.empty() || pred.size() != gold.size()) throw std::invalid_argument("mse: need equal, nonempty inputs");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - gold[i]) * (pred[i] - gold[i]);
  return s / static_cast<double>(pred.size());
}

template <class T>
double metric_accuracy(std::span<const T> pred, std::span<const T> gold) {
  if (pred.size() != gold.size())
    throw std::invalid_argument("accuracy: length mismatch (" + std::to_string(pred.size()) + " vs " +
                                std::to_string(gold.size()) + ")");
  if (pred.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == gold[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

template <class T>
double metric_accuracy(const std::vector<T> &pred, const std::vector<T> &gold) {
  return metric_accuracy(std::span<const T>(pred), std::span<const T>(gold));
}

struct RelatednessMetrics {
  double pearson = 0.0;
  double spearman = 0.0;
  double mse = 0.0;
  double mean_kl = 0.0;
};

struct EntailmentMetrics {
  double accuracy = 0.0;
  /// confusion[gold][predicted]
  std::array<std::array<std::size_t, entailment_classes>, entailment_classes> confusion{};
};

struct MetricsReport {
  std::size_t examples = 0;
  std::optional<RelatednessMetrics> relatedness;
  std::optional<EntailmentMetrics> entailment;
};

/// Pearson/Spearman fall back to NaN when either side is constant, which
/// happens legitimately on tiny or degenerate evaluation sets.
inline RelatednessMetrics relatedness_metrics(std::span<const double> pred, std::span<const double> gold,
                                              double mean_kl) {
  RelatednessMetrics m;
  m.mse = metric_mse(pred, gold);
  m.mean_kl = mean_kl;
  try {
    m.pearson = metric_pearson(pred, gold);
    m.spearman = metric_spearman(pred, gold);
  } catch (const std::domain_error &) {
    m.pearson = m.spearman = std::nan("");
  }
  return m;
}

inline EntailmentMetrics entailment_metrics(const std::vector<std::size_t> &pred, const std::vector<std::size_t> &gold) {
  EntailmentMetrics m;
  m.accuracy = metric_accuracy(pred, gold);
  for (std::size_t i = 0; i < pred.size(); ++i) ++m.confusion.at(gold[i]).at(pred[i]);
  return m;
}

}  // namespace sentmatch
