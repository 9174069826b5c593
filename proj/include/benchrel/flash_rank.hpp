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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "benchrel/data.hpp"
#include "benchrel/error.hpp"
#include "benchrel/resampling.hpp"
#include "benchrel/rng.hpp"
#include "benchrel/scoring.hpp"

namespace benchrel {

/// Leaderboard band with the rank precision it demands. Rank 1 demands
/// exact placement (precision 0); precision loosens as tiers worsen.
struct Tier {
  int top_rank;              // best (smallest) rank of the band
  int bottom_rank;           // worst rank; -1 = open-ended
  int required_precision;    // tolerated |rank error|
};

struct TierConfig {
  std::vector<Tier> tiers;  // best tier first, partitioning ranks 1..inf

  static TierConfig defaults() {
    return TierConfig{{{1, 1, 0}, {2, 4, 1}, {5, 9, 2}, {10, 19, 3}, {20, -1, 4}}};
  }

  void validate() const {
    if (tiers.empty()) fail(Errc::InvalidArgument, "tier list is empty");
    int expected_top = 1;
    int last_precision = -1;
    for (std::size_t i = 0; i < tiers.size(); ++i) {
      const Tier& t = tiers[i];
      if (t.top_rank != expected_top)
        fail(Errc::InvalidArgument, "tiers must partition ranks 1..inf");
      const bool open = t.bottom_rank < 0;
      if (open && i + 1 != tiers.size())
        fail(Errc::InvalidArgument, "only the last tier may be open-ended");
      if (!open && t.bottom_rank < t.top_rank)
        fail(Errc::InvalidArgument, "tier bounds out of order");
      if (t.required_precision < last_precision)
        fail(Errc::InvalidArgument, "precision must not tighten as tiers worsen");
      last_precision = t.required_precision;
      expected_top = open ? expected_top : t.bottom_rank + 1;
    }
    if (tiers.back().bottom_rank >= 0)
      fail(Errc::InvalidArgument, "last tier must be open-ended");
  }

  /// Best rank of the best tier whose precision requirement a resolution of
  /// `res` satisfies; the tournament may stop once the model's optimistic
  /// rank is at or beyond it. 0 when no tier tolerates `res`.
  int stop_threshold(int res) const {
    for (const Tier& t : tiers)
      if (t.required_precision >= res) return t.top_rank;
    return 0;
  }

  const Tier& tier_of_rank(int rank) const {
    for (const Tier& t : tiers)
      if (rank >= t.top_rank && (t.bottom_rank < 0 || rank <= t.bottom_rank))
        return t;
    return tiers.back();
  }

  std::string label_for_rank(int rank) const {
    const Tier& t = tier_of_rank(rank);
    if (t.bottom_rank < 0) return std::to_string(t.top_rank) + "+";
    if (t.bottom_rank == t.top_rank) return std::to_string(t.top_rank);
    return std::to_string(t.top_rank) + "-" + std::to_string(t.bottom_rank);
  }
};

struct ResolutionEntry {
  std::int64_t size;  // examples per scenario; kOriginalSize = everything
  int res;            // achieved rank resolution at this size
  int tier_rank;      // stop threshold derived from the tier config; 0 = none
};

struct ResolutionTable {
  std::vector<ResolutionEntry> entries;  // size ascending, original size last
  Grouping grouping = Grouping::by_scenario;
  TiePolicy ties = TiePolicy::strict;
  int B = 0;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  std::uint64_t data_fingerprint = 0;

  const ResolutionEntry* find(std::int64_t size) const {
    for (const auto& e : entries)
      if (e.size == size) return &e;
    return nullptr;
  }
};

namespace detail {

constexpr std::uint64_t kStreamCalibrate = 0xca11;
constexpr std::uint64_t kStreamFlash = 0xf1a5;

/// Sizes ordered ascending with the original-size sentinel last.
inline std::vector<std::int64_t> sorted_sizes(std::vector<std::int64_t> sizes) {
  std::sort(sizes.begin(), sizes.end(), [](std::int64_t a, std::int64_t b) {
    const auto key = [](std::int64_t s) {
      return s == kOriginalSize ? std::numeric_limits<std::int64_t>::max() : s;
    };
    return key(a) < key(b);
  });
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  return sizes;
}

/// Smallest integer r such that at least `confidence` of the deviations
/// are <= r.
inline int coverage_quantile(std::vector<int>& deviations, double confidence) {
  std::sort(deviations.begin(), deviations.end());
  const std::size_t n = deviations.size();
  std::size_t idx = static_cast<std::size_t>(
      std::ceil(confidence * static_cast<double>(n)));
  if (idx > 0) --idx;
  if (idx >= n) idx = n - 1;
  return deviations[idx];
}

}  // namespace detail

/// Calibrates Res(S): for each sample size, the rank deviation bound that
/// holds for `confidence` of all (model, instantiation) pairs across B
/// subsample draws, regularized to be non-increasing in S. The default
/// pools deviations over all models; `per_tier` instead takes the worst
/// per-tier quantile (bucketing models by their full-data tier).
inline ResolutionTable calibrate_resolution(
    const BenchmarkData& data,
    std::vector<std::int64_t> sample_sizes = {20, 50, 200, 1000, kOriginalSize},
    const TierConfig& tiers = TierConfig::defaults(), int B = 1000,
    double confidence = 0.95, std::uint64_t seed = 1,
    Grouping grouping = Grouping::by_scenario,
    TiePolicy ties = TiePolicy::strict, unsigned threads = 1,
    bool per_tier = false) {
  tiers.validate();
  if (data.n_models() < 3)
    fail(Errc::InsufficientModels, "calibration needs at least 3 models");
  if (B < 1) fail(Errc::InvalidArgument, "B must be positive");
  if (confidence <= 0.0 || confidence > 1.0)
    fail(Errc::InvalidArgument, "confidence must be in (0, 1]");

  const EvalContext ctx = EvalContext::make(data, grouping, ties);
  const int n = ctx.n();
  engine::Workspace ws0;
  const FastOutcome original = evaluate_original(ctx, ws0);
  std::vector<int> full_pos(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p)
    full_pos[static_cast<std::size_t>(original.order[static_cast<std::size_t>(p)])] = p;

  const auto sizes = detail::sorted_sizes(std::move(sample_sizes));
  ResolutionTable table;
  table.grouping = grouping;
  table.ties = ties;
  table.B = B;
  table.confidence = confidence;
  table.seed = seed;
  table.data_fingerprint = data.fingerprint();

  for (std::int64_t size : sizes) {
    std::vector<std::vector<int>> dev_per_iter(static_cast<std::size_t>(B));
    parallel_for(0, static_cast<std::size_t>(B), threads, [&](std::size_t i) {
      thread_local engine::Workspace ws;
      Rng rng(seed, {detail::kStreamCalibrate, static_cast<std::uint64_t>(size), i});
      const Selection sel =
          draw_examples_selection(data, size, SampleMode::subsample, rng);
      engine::evaluate(data, ctx.models, ctx.full_plan, sel, ctx.ties, ws);
      std::vector<int>& devs = dev_per_iter[i];
      devs.resize(static_cast<std::size_t>(n));
      for (int p = 0; p < n; ++p) {
        const int slot = ws.order[static_cast<std::size_t>(p)];
        devs[static_cast<std::size_t>(slot)] =
            std::abs(p - full_pos[static_cast<std::size_t>(slot)]);
      }
    });

    int res = 0;
    if (!per_tier) {
      std::vector<int> pooled;
      pooled.reserve(static_cast<std::size_t>(B) * static_cast<std::size_t>(n));
      for (const auto& devs : dev_per_iter)
        pooled.insert(pooled.end(), devs.begin(), devs.end());
      res = detail::coverage_quantile(pooled, confidence);
    } else {
      for (const Tier& t : tiers.tiers) {
        std::vector<int> bucket;
        for (int slot = 0; slot < n; ++slot) {
          const int rank = full_pos[static_cast<std::size_t>(slot)] + 1;
          if (rank < t.top_rank || (t.bottom_rank >= 0 && rank > t.bottom_rank))
            continue;
          for (const auto& devs : dev_per_iter)
            bucket.push_back(devs[static_cast<std::size_t>(slot)]);
        }
        if (!bucket.empty())
          res = std::max(res, detail::coverage_quantile(bucket, confidence));
      }
    }
    table.entries.push_back(ResolutionEntry{size, res, 0});
  }

  // Larger samples cannot be allowed a worse resolution.
  for (int i = static_cast<int>(table.entries.size()) - 2; i >= 0; --i)
    table.entries[static_cast<std::size_t>(i)].res =
        std::max(table.entries[static_cast<std::size_t>(i)].res,
                 table.entries[static_cast<std::size_t>(i + 1)].res);
  for (auto& e : table.entries) e.tier_rank = tiers.stop_threshold(e.res);
  return table;
}

// ---------------------------------------------------------------------------
// Score providers

/// Supplies the new model's scores on demand. Repeated identical requests
/// return identical values; the call counter is the tournament's cost meter
/// and counts every cell fetched.
class ScoreProvider {
 public:
  virtual ~ScoreProvider() = default;

  std::vector<double> fetch(
      const std::string& subscenario,
      const std::vector<std::pair<std::string, std::string>>& cells) {
    calls_ += cells.size();
    return do_fetch(subscenario, cells);
  }

  virtual const std::string& model() const = 0;
  std::uint64_t calls() const { return calls_; }

 protected:
  // cells are (example_id, prompt_id); return scores in request order.
  virtual std::vector<double> do_fetch(
      const std::string& subscenario,
      const std::vector<std::pair<std::string, std::string>>& cells) = 0;

 private:
  std::uint64_t calls_ = 0;
};

/// Provider backed by a pre-scored single-model dataset (the file mode).
class StoredScoreProvider : public ScoreProvider {
 public:
  explicit StoredScoreProvider(BenchmarkData data) : data_(std::move(data)) {
    if (data_.n_models() != 1)
      fail(Errc::InvalidArgument,
           "provider data must contain exactly one model, got " +
               std::to_string(data_.n_models()));
  }

  const std::string& model() const override { return data_.model(0); }

 protected:
  std::vector<double> do_fetch(
      const std::string& subscenario,
      const std::vector<std::pair<std::string, std::string>>& cells) override {
    const int s = data_.sub_index(subscenario);
    if (s < 0)
      fail(Errc::ProviderGap, "no scores for subscenario '" + subscenario + "'");
    const auto& sub = data_.sub(s);
    std::vector<double> out;
    out.reserve(cells.size());
    for (const auto& [example_id, prompt_id] : cells) {
      const auto eit =
          std::lower_bound(sub.examples.begin(), sub.examples.end(), example_id);
      const auto pit =
          std::lower_bound(sub.prompts.begin(), sub.prompts.end(), prompt_id);
      double v = detail::kAbsent;
      if (eit != sub.examples.end() && *eit == example_id &&
          pit != sub.prompts.end() && *pit == prompt_id)
        v = data_.score(0, s, static_cast<int>(eit - sub.examples.begin()),
                        static_cast<int>(pit - sub.prompts.begin()));
      if (!detail::present(v))
        fail(Errc::ProviderGap, "no score for (" + subscenario + ", " +
                                    example_id + ", " + prompt_id + ")");
      out.push_back(v);
    }
    return out;
  }

 private:
  BenchmarkData data_;
};

// ---------------------------------------------------------------------------
// The coarse-to-fine tournament

struct FlashStage {
  std::int64_t size;
  int rank;       // new model's rank at this stage
  int res;        // Res(size)
  int tier_rank;  // stop threshold (0 = none reachable)
  bool stopped;
  std::uint64_t calls_used;  // cumulative provider cells after this stage
};

struct FlashRankResult {
  std::string model;
  std::vector<FlashStage> stages;
  int final_rank = 0;
  std::string tier_label;
  std::uint64_t calls_used = 0;
  std::uint64_t full_calls = 0;
  double savings_factor = 1.0;
};

/// Ranks a new model against the stored reference leaderboard with as few
/// provider calls as the required precision of its tier allows. Stage
/// subsamples are nested (each stage extends the previous one), reference
/// models are never re-scored, and the stop rule is
/// Rank(M,S) - Res(S) >= TierRank(S).
inline FlashRankResult flash_rank(const BenchmarkData& reference,
                                  ScoreProvider& provider,
                                  const ResolutionTable& table,
                                  const TierConfig& tiers,
                                  Grouping grouping, TiePolicy ties,
                                  std::uint64_t seed,
                                  const std::vector<std::int64_t>* schedule = nullptr) {
  tiers.validate();
  if (table.entries.empty())
    fail(Errc::UncalibratedSize, "resolution table is empty");
  if (table.grouping != grouping)
    fail(Errc::InvalidArgument, "calibration used a different grouping");
  if (table.data_fingerprint != 0 &&
      table.data_fingerprint != reference.fingerprint())
    fail(Errc::InvalidArgument,
         "calibration table was built on different reference data");

  std::vector<std::int64_t> stages;
  if (schedule) {
    for (std::int64_t s : *schedule) {
      if (!table.find(s))
        fail(Errc::UncalibratedSize,
             "size " + std::to_string(s) + " is not in the calibration table");
      stages.push_back(s);
    }
    stages = detail::sorted_sizes(std::move(stages));
  } else {
    for (const auto& e : table.entries) stages.push_back(e.size);
  }

  const int n_ref = reference.n_models();
  const std::string& new_model = provider.model();
  for (int m = 0; m < n_ref; ++m)
    if (reference.model(m) == new_model)
      fail(Errc::InvalidArgument,
           "model '" + new_model + "' is already in the reference data");

  const EvalContext ctx = EvalContext::make(reference, grouping, ties);

  // One nested sample path per subscenario: a seeded permutation whose
  // prefixes are the stage samples.
  const int n_subs = reference.n_subs();
  std::vector<std::vector<std::uint32_t>> perm(static_cast<std::size_t>(n_subs));
  for (int s = 0; s < n_subs; ++s) {
    Rng rng(seed, {detail::kStreamFlash, static_cast<std::uint64_t>(s)});
    perm[static_cast<std::size_t>(s)] = rng.sample_without_replacement(
        static_cast<std::uint32_t>(reference.sub(s).n_examples()),
        static_cast<std::uint32_t>(reference.sub(s).n_examples()));
  }

  // The new model's scores arrive lazily; absent cells are NaN until fetched.
  std::vector<std::vector<double>> new_cells(static_cast<std::size_t>(n_subs));
  std::vector<std::uint32_t> have(static_cast<std::size_t>(n_subs), 0);  // prefix fetched
  for (int s = 0; s < n_subs; ++s)
    new_cells[static_cast<std::size_t>(s)].assign(
        reference.sub(s).n_examples() * reference.sub(s).n_prompts(),
        detail::kAbsent);

  std::uint64_t full_calls = 0;
  for (int s = 0; s < n_subs; ++s)
    full_calls += reference.sub(s).n_examples() * reference.sub(s).n_prompts();

  FlashRankResult result;
  result.model = new_model;
  result.full_calls = full_calls;

  engine::Workspace ws;
  std::vector<int> subset(static_cast<std::size_t>(n_ref) + 1);
  std::iota(subset.begin(), subset.end(), 0);

  for (std::size_t stage_idx = 0; stage_idx < stages.size(); ++stage_idx) {
    const std::int64_t size = stages[stage_idx];
    const ResolutionEntry* entry = table.find(size);

    // Per-subscenario counts for this stage; nested by construction.
    Selection sel;
    sel.description = "flash stage " + std::to_string(size);
    sel.subs.resize(static_cast<std::size_t>(n_subs));
    for (int sc = 0; sc < reference.n_scenarios(); ++sc) {
      const auto counts = allocate_scenario_examples(reference, sc, size, true);
      if (counts.empty())
        fail(Errc::SizeExceedsPool,
             "scenario '" + reference.scenario(sc) + "' has fewer than " +
                 std::to_string(size) + " examples");
      const auto& subs = reference.scenario_subs(sc);
      for (std::size_t j = 0; j < subs.size(); ++j) {
        const int s = subs[j];
        auto& e = sel.subs[static_cast<std::size_t>(s)];
        e.sub = s;
        e.kind = Selection::Kind::examples;
        e.example_counts.clear();
        for (std::uint32_t t = 0; t < counts[j]; ++t)
          e.example_counts.emplace_back(perm[static_cast<std::size_t>(s)][t], 1u);
        std::sort(e.example_counts.begin(), e.example_counts.end());
      }
    }

    // Fetch the new model's missing cells (prefix growth only).
    for (int s = 0; s < n_subs; ++s) {
      const auto& sub = reference.sub(s);
      const std::uint32_t want = static_cast<std::uint32_t>(
          sel.subs[static_cast<std::size_t>(s)].example_counts.size());
      if (want <= have[static_cast<std::size_t>(s)]) continue;
      std::vector<std::pair<std::string, std::string>> cells;
      for (std::uint32_t t = have[static_cast<std::size_t>(s)]; t < want; ++t) {
        const std::uint32_t e = perm[static_cast<std::size_t>(s)][t];
        for (std::size_t p = 0; p < sub.n_prompts(); ++p)
          cells.emplace_back(sub.examples[e], sub.prompts[p]);
      }
      const std::vector<double> scores = provider.fetch(sub.id, cells);
      std::size_t at = 0;
      for (std::uint32_t t = have[static_cast<std::size_t>(s)]; t < want; ++t) {
        const std::uint32_t e = perm[static_cast<std::size_t>(s)][t];
        for (std::size_t p = 0; p < sub.n_prompts(); ++p)
          new_cells[static_cast<std::size_t>(s)][e * sub.n_prompts() + p] =
              scores[at++];
      }
      have[static_cast<std::size_t>(s)] = want;
    }

    // Reference scores from stored records; the provider is the only cost.
    engine::evaluate(reference, ctx.models, ctx.full_plan, sel, ties, ws);

    // New model sub scores on the same selection, then the extended matrix.
    const std::size_t n_units = ctx.full_plan.size();
    std::vector<double> new_sub(static_cast<std::size_t>(n_subs), detail::kAbsent);
    for (int s = 0; s < n_subs; ++s) {
      const auto& sub = reference.sub(s);
      const auto& e = sel.subs[static_cast<std::size_t>(s)];
      double sum = 0.0, cnt = 0.0;
      for (const auto& [ex, c] : e.example_counts) {
        for (std::size_t p = 0; p < sub.n_prompts(); ++p) {
          const double v =
              new_cells[static_cast<std::size_t>(s)][ex * sub.n_prompts() + p];
          sum += static_cast<double>(c) * v;
          cnt += static_cast<double>(c);
        }
      }
      if (cnt > 0.0) new_sub[static_cast<std::size_t>(s)] = sum / cnt;
    }
    std::vector<double> matrix(n_units * (static_cast<std::size_t>(n_ref) + 1));
    for (std::size_t u = 0; u < n_units; ++u) {
      double* row = matrix.data() + u * (static_cast<std::size_t>(n_ref) + 1);
      for (int k = 0; k < n_ref; ++k)
        row[k] = ws.unit_scores[u * static_cast<std::size_t>(n_ref) +
                                static_cast<std::size_t>(k)];
      double sum = 0.0, weight = 0.0;
      for (const auto& [slot, w] : ctx.full_plan[u].parts) {
        const double v = new_sub[static_cast<std::size_t>(slot)];
        if (detail::present(v)) {
          sum += static_cast<double>(w) * v;
          weight += static_cast<double>(w);
        }
      }
      row[n_ref] = weight > 0.0 ? sum / weight : detail::kAbsent;
    }

    // Rank of the new model among reference + new.
    std::vector<double> mwr(static_cast<std::size_t>(n_ref) + 1);
    for (int k = 0; k <= n_ref; ++k)
      mwr[static_cast<std::size_t>(k)] = engine::mwr_within_subset(
          matrix.data(), static_cast<std::size_t>(n_ref) + 1, ctx.full_plan,
          subset, k, ties);
    int rank = 1;
    const double mine = mwr[static_cast<std::size_t>(n_ref)];
    for (int k = 0; k < n_ref; ++k) {
      const double v = mwr[static_cast<std::size_t>(k)];
      if (v > mine || (v == mine && reference.model(k) < new_model)) ++rank;
    }

    const bool last = stage_idx + 1 == stages.size();
    const bool stop =
        entry->tier_rank > 0 && rank - entry->res >= entry->tier_rank;
    result.stages.push_back(FlashStage{size, rank, entry->res, entry->tier_rank,
                                       stop, provider.calls()});
    result.final_rank = rank;
    if (stop || last) break;
  }

  result.calls_used = provider.calls();
  result.tier_label = tiers.label_for_rank(result.final_rank);
  result.savings_factor = result.calls_used > 0
                              ? static_cast<double>(result.full_calls) /
                                    static_cast<double>(result.calls_used)
                              : 1.0;
  return result;
}

}  // namespace benchrel
