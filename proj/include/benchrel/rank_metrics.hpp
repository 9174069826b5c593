/*
 * Copyright 2026 The benchrel Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "benchrel/error.hpp"
#include "benchrel/scoring.hpp"

namespace benchrel {

enum class MetaMetricKind {
  kendall,
  weighted_kendall,
  agreement_indicator,
  mwr_similarity,
};

inline const char* to_string(MetaMetricKind k) {
  switch (k) {
    case MetaMetricKind::kendall: return "kendall";
    case MetaMetricKind::weighted_kendall: return "weighted_kendall";
    case MetaMetricKind::agreement_indicator: return "agreement_indicator";
    case MetaMetricKind::mwr_similarity: return "mwr_similarity";
  }
  return "unknown";
}

/// A meta-metric comparison. `value` is in the metric's native range
/// ([-1, 1] for the correlations) and `similarity` is its [0, 1] form.
struct MetaMetricValue {
  MetaMetricKind kind;
  double value;
  double similarity;
};

inline MetaMetricValue correlation_meta(MetaMetricKind kind, double tau) {
  return MetaMetricValue{kind, tau, (tau + 1.0) / 2.0};
}

namespace detail {

/// Maps model -> 0-based position for both rankings, verifying the domains
/// coincide. Returned pair: positions in r1 order, i.e. pos2[i] is the r2
/// position of the model at r1 position i.
inline std::vector<int> cross_positions(const Ranking& r1, const Ranking& r2) {
  if (r1.order.size() != r2.order.size())
    fail(Errc::DomainMismatch, "rankings have different sizes");
  std::unordered_map<std::string, int> pos2;
  pos2.reserve(r2.order.size());
  for (std::size_t i = 0; i < r2.order.size(); ++i)
    pos2.emplace(r2.order[i], static_cast<int>(i));
  std::vector<int> out(r1.order.size());
  for (std::size_t i = 0; i < r1.order.size(); ++i) {
    auto it = pos2.find(r1.order[i]);
    if (it == pos2.end())
      fail(Errc::DomainMismatch,
           "model '" + r1.order[i] + "' missing from second ranking");
    out[i] = it->second;
  }
  return out;
}

/// One directional pass of the weighted correlation: pairs are weighted by
/// the hyperbolic weights of their positions in the *first* argument,
/// w(p) = 1 / (p + 1) with p zero-based.
inline double weighted_directional(const std::vector<int>& pos2) {
  const std::size_t n = pos2.size();
  double num = 0.0, den = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double w = 1.0 / static_cast<double>(a + 1) +
                       1.0 / static_cast<double>(b + 1);
      num += pos2[a] < pos2[b] ? w : -w;
      den += w;
    }
  }
  return den > 0.0 ? num / den : 1.0;
}

/// pos2[i] = position in the second ranking of the model ranked i by the
/// first. The resampling loops call this directly on index vectors.
inline double kendall_from_pos(const std::vector<int>& pos2) {
  const std::size_t n = pos2.size();
  std::int64_t concordant = 0, discordant = 0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      (pos2[a] < pos2[b] ? concordant : discordant) += 1;
  return static_cast<double>(concordant - discordant) /
         (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

}  // namespace detail

/// (concordant - discordant) / (n(n-1)/2) over all unordered model pairs.
inline double kendall_tau(const Ranking& r1, const Ranking& r2) {
  const std::vector<int> pos2 = detail::cross_positions(r1, r2);
  if (pos2.size() < 2) fail(Errc::DomainMismatch, "need at least 2 models");
  return detail::kendall_from_pos(pos2);
}

/// Top-emphasizing correlation: additive hyperbolic pair weights, averaged
/// over both weighting directions so the result is symmetric. Identical
/// rankings give 1, a full reversal gives -1.
inline double weighted_kendall_tau(const Ranking& r1, const Ranking& r2) {
  const std::vector<int> pos12 = detail::cross_positions(r1, r2);
  const std::vector<int> pos21 = detail::cross_positions(r2, r1);
  if (pos12.size() < 2) fail(Errc::DomainMismatch, "need at least 2 models");
  return (detail::weighted_directional(pos12) +
          detail::weighted_directional(pos21)) /
         2.0;
}

/// 1 iff the models at reference positions anchor_pos and
/// anchor_pos + cluster_size - 1 (1-based) appear inverted in r_alt.
inline int cluster_switch(const Ranking& r_ref, const Ranking& r_alt,
                          int anchor_pos, int cluster_size) {
  const int n = static_cast<int>(r_ref.order.size());
  if (cluster_size < 2 || anchor_pos < 1 || anchor_pos + cluster_size > n + 1)
    fail(Errc::OutOfRange,
         "anchor " + std::to_string(anchor_pos) + " with cluster size " +
             std::to_string(cluster_size) + " does not fit " +
             std::to_string(n) + " models");
  const std::string& top = r_ref.order[static_cast<std::size_t>(anchor_pos - 1)];
  const std::string& bottom =
      r_ref.order[static_cast<std::size_t>(anchor_pos + cluster_size - 2)];
  return r_alt.position(top) > r_alt.position(bottom) ? 1 : 0;
}

struct MwrSimilarity {
  double similarity = 1.0;                              // 1 - mean |delta|
  std::vector<std::pair<std::string, double>> per_model;  // |delta| each
};

/// 1 - mean absolute MWR difference over the (identical) model domains.
inline MwrSimilarity mwr_similarity(const ScoreTable& s1, const ScoreTable& s2) {
  if (s1.models != s2.models)
    fail(Errc::DomainMismatch, "score tables cover different models");
  if (s1.models.empty()) fail(Errc::DomainMismatch, "empty score tables");
  MwrSimilarity out;
  double total = 0.0;
  for (std::size_t i = 0; i < s1.models.size(); ++i) {
    const double diff = std::fabs(s1.values[i] - s2.values[i]);
    out.per_model.emplace_back(s1.models[i], diff);
    total += diff;
  }
  out.similarity = 1.0 - total / static_cast<double>(s1.models.size());
  return out;
}

}  // namespace benchrel
