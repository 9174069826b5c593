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
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "benchrel/data.hpp"
#include "benchrel/error.hpp"
#include "benchrel/parallel.hpp"
#include "benchrel/rank_metrics.hpp"
#include "benchrel/rng.hpp"
#include "benchrel/scoring.hpp"

namespace benchrel {

enum class Axis { scenarios, subscenarios, examples, prompt_pairing };
enum class SampleMode { bootstrap, subsample };

inline const char* to_string(Axis a) {
  switch (a) {
    case Axis::scenarios: return "scenarios";
    case Axis::subscenarios: return "subscenarios";
    case Axis::examples: return "examples";
    case Axis::prompt_pairing: return "prompt_pairing";
  }
  return "unknown";
}
inline const char* to_string(SampleMode m) {
  return m == SampleMode::bootstrap ? "bootstrap" : "subsample";
}

/// Examples-axis sentinel: every scenario keeps its own full pool size.
/// This is the "evaluate everything" point of the compute axis and the
/// default size for bootstrap-at-original-size protocols.
constexpr int kOriginalSize = 0;

/// One resampled realization of a design decision.
struct Instantiation {
  Axis axis = Axis::examples;
  SampleMode mode = SampleMode::bootstrap;
  // scenarios / subscenarios axes: (pool index, multiplicity), index-sorted.
  std::vector<std::pair<int, std::uint32_t>> picked;
  // examples / prompt_pairing axes.
  Selection selection;
  std::uint64_t seed = 0;       // lineage: master seed ...
  std::uint64_t iteration = 0;  // ... and iteration index
};

enum class ObjectiveKind {
  full_ranking_kendall,
  full_ranking_weighted,
  best_model,
  model_quality,
};

inline const char* to_string(ObjectiveKind o) {
  switch (o) {
    case ObjectiveKind::full_ranking_kendall: return "full_ranking_kendall";
    case ObjectiveKind::full_ranking_weighted: return "full_ranking_weighted";
    case ObjectiveKind::best_model: return "best_model";
    case ObjectiveKind::model_quality: return "model_quality";
  }
  return "unknown";
}

inline MetaMetricKind meta_metric_of(ObjectiveKind o) {
  switch (o) {
    case ObjectiveKind::full_ranking_kendall: return MetaMetricKind::kendall;
    case ObjectiveKind::full_ranking_weighted: return MetaMetricKind::weighted_kendall;
    case ObjectiveKind::best_model: return MetaMetricKind::agreement_indicator;
    case ObjectiveKind::model_quality: return MetaMetricKind::mwr_similarity;
  }
  return MetaMetricKind::kendall;
}

// ---------------------------------------------------------------------------
// Drawing

namespace detail {

constexpr std::uint64_t kStreamDior = 0xd104;
constexpr std::uint64_t kStreamBestModel = 0xbe57;
constexpr std::uint64_t kStreamCluster = 0xc105;
constexpr std::uint64_t kStreamPromptCompare = 0x9a12;
constexpr std::uint64_t kStreamResample = 0x5a39;

/// Histogram-based multiset draw: k draws with replacement from [0, n),
/// returned as (index, count) sorted by index.
inline void draw_multiset(Rng& rng, std::uint32_t n, std::uint64_t k,
                          std::vector<std::pair<std::uint32_t, std::uint32_t>>& out) {
  thread_local std::vector<std::uint32_t> hist;
  hist.assign(n, 0);
  for (std::uint64_t d = 0; d < k; ++d)
    hist[static_cast<std::size_t>(rng.below(n))] += 1;
  out.clear();
  for (std::uint32_t i = 0; i < n; ++i)
    if (hist[i]) out.emplace_back(i, hist[i]);
}

inline void draw_distinct(Rng& rng, std::uint32_t n, std::uint32_t k,
                          std::vector<std::pair<std::uint32_t, std::uint32_t>>& out) {
  auto picks = rng.sample_without_replacement(n, k);
  std::sort(picks.begin(), picks.end());
  out.clear();
  for (std::uint32_t i : picks) out.emplace_back(i, 1u);
}

}  // namespace detail

/// Splits a per-scenario example budget across the scenario's subscenarios
/// proportionally to their pool sizes (largest-quotient walk, so prefixes
/// nest: the allocation for size S is contained in the one for S' > S).
/// `capped` limits each subscenario to its pool and reports failure by
/// returning an empty vector when the scenario cannot absorb the budget.
inline std::vector<std::uint32_t> allocate_scenario_examples(
    const BenchmarkData& data, int scenario, std::int64_t size, bool capped) {
  const auto& subs = data.scenario_subs(scenario);
  std::vector<std::uint32_t> counts(subs.size(), 0);
  if (size == kOriginalSize) {
    for (std::size_t j = 0; j < subs.size(); ++j)
      counts[j] = static_cast<std::uint32_t>(data.sub(subs[j]).n_examples());
    return counts;
  }
  for (std::int64_t t = 0; t < size; ++t) {
    double best = -1.0;
    int best_j = -1;
    for (std::size_t j = 0; j < subs.size(); ++j) {
      const double pool = static_cast<double>(data.sub(subs[j]).n_examples());
      if (capped && counts[j] >= pool) continue;
      const double priority = pool / static_cast<double>(counts[j] + 1);
      if (priority > best) {
        best = priority;
        best_j = static_cast<int>(j);
      }
    }
    if (best_j < 0) return {};  // scenario pool exhausted
    counts[static_cast<std::size_t>(best_j)] += 1;
  }
  return counts;
}

/// Draws an examples-axis selection: `size` examples per scenario (its own
/// pool size when kOriginalSize), allocated across subscenarios and then
/// sampled with or without replacement. Chosen examples keep every prompt.
/// `overrides[sub] >= 0` pins that subscenario's count.
inline Selection draw_examples_selection(const BenchmarkData& data,
                                         std::int64_t size, SampleMode mode,
                                         Rng& rng,
                                         const std::vector<std::int64_t>* overrides = nullptr) {
  Selection sel;
  sel.description = std::string("examples ") + (size == kOriginalSize
                                                    ? "original"
                                                    : std::to_string(size)) +
                    " per scenario, " + to_string(mode);
  sel.subs.resize(static_cast<std::size_t>(data.n_subs()));
  const bool capped = mode == SampleMode::subsample;
  for (int sc = 0; sc < data.n_scenarios(); ++sc) {
    auto counts = allocate_scenario_examples(data, sc, size, capped);
    if (counts.empty())
      fail(Errc::SizeExceedsPool,
           "scenario '" + data.scenario(sc) + "' has fewer than " +
               std::to_string(size) + " examples");
    const auto& subs = data.scenario_subs(sc);
    for (std::size_t j = 0; j < subs.size(); ++j) {
      const int s = subs[j];
      const auto& sub = data.sub(s);
      const std::uint32_t pool = static_cast<std::uint32_t>(sub.n_examples());
      std::int64_t want = counts[j];
      if (overrides && (*overrides)[static_cast<std::size_t>(s)] >= 0) {
        want = (*overrides)[static_cast<std::size_t>(s)];
        if (capped && want > pool)
          fail(Errc::SizeExceedsPool,
               "override for '" + sub.id + "' exceeds its pool");
      }
      auto& entry = sel.subs[static_cast<std::size_t>(s)];
      entry.sub = s;
      entry.kind = Selection::Kind::examples;
      if (mode == SampleMode::bootstrap)
        detail::draw_multiset(rng, pool, static_cast<std::uint64_t>(want),
                              entry.example_counts);
      else
        detail::draw_distinct(rng, pool, static_cast<std::uint32_t>(want),
                              entry.example_counts);
    }
  }
  return sel;
}

/// Uniform (example x prompt) draw of `budget` cells per subscenario.
inline Selection draw_pair_selection(const BenchmarkData& data,
                                     std::int64_t budget, SampleMode mode,
                                     Rng& rng) {
  Selection sel;
  sel.description = "uniform pairs, budget " + std::to_string(budget) +
                    " per subscenario, " + to_string(mode);
  sel.subs.resize(static_cast<std::size_t>(data.n_subs()));
  thread_local std::vector<std::pair<std::uint32_t, std::uint32_t>> cells;
  for (int s = 0; s < data.n_subs(); ++s) {
    const auto& sub = data.sub(s);
    const std::uint32_t n_pairs =
        static_cast<std::uint32_t>(sub.n_examples() * sub.n_prompts());
    if (mode == SampleMode::subsample &&
        budget > static_cast<std::int64_t>(n_pairs))
      fail(Errc::BudgetExceedsCrossProduct,
           "budget " + std::to_string(budget) + " exceeds the " +
               std::to_string(n_pairs) + " cells of '" + sub.id + "'");
    if (mode == SampleMode::bootstrap)
      detail::draw_multiset(rng, n_pairs, static_cast<std::uint64_t>(budget), cells);
    else
      detail::draw_distinct(rng, n_pairs, static_cast<std::uint32_t>(budget), cells);
    auto& entry = sel.subs[static_cast<std::size_t>(s)];
    entry.sub = s;
    entry.kind = Selection::Kind::pairs;
    entry.pair_counts.clear();
    const std::uint32_t prompts = static_cast<std::uint32_t>(sub.n_prompts());
    for (const auto& [cell, count] : cells)
      entry.pair_counts.push_back({cell / prompts, cell % prompts, count});
  }
  return sel;
}

/// One instantiation of the given design axis. Deterministic in
/// (data, axis, size, mode, seed, iteration).
inline Instantiation resample(const BenchmarkData& data, Axis axis,
                              std::int64_t size, SampleMode mode,
                              std::uint64_t seed, std::uint64_t iteration = 0) {
  if (axis != Axis::examples && size < 1)
    fail(Errc::InvalidArgument, "size must be at least 1");
  if (axis == Axis::examples && size < 0)
    fail(Errc::InvalidArgument, "size must be positive or the original-size sentinel");

  Instantiation inst;
  inst.axis = axis;
  inst.mode = mode;
  inst.seed = seed;
  inst.iteration = iteration;
  Rng rng(seed, {detail::kStreamResample, static_cast<std::uint64_t>(axis),
                 static_cast<std::uint64_t>(size), iteration});

  auto draw_pool = [&](std::uint32_t pool, const char* what) {
    if (mode == SampleMode::subsample && size > pool)
      fail(Errc::SizeExceedsPool, std::string("cannot subsample ") +
                                      std::to_string(size) + " of " +
                                      std::to_string(pool) + " " + what);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> picks;
    if (mode == SampleMode::bootstrap)
      detail::draw_multiset(rng, pool, static_cast<std::uint64_t>(size), picks);
    else
      detail::draw_distinct(rng, pool, static_cast<std::uint32_t>(size), picks);
    inst.picked.clear();
    for (const auto& [i, c] : picks)
      inst.picked.emplace_back(static_cast<int>(i), c);
  };

  switch (axis) {
    case Axis::scenarios:
      draw_pool(static_cast<std::uint32_t>(data.n_scenarios()), "scenarios");
      break;
    case Axis::subscenarios:
      draw_pool(static_cast<std::uint32_t>(data.n_subs()), "subscenarios");
      break;
    case Axis::examples:
      inst.selection = draw_examples_selection(data, size, mode, rng);
      break;
    case Axis::prompt_pairing:
      inst.selection = draw_pair_selection(data, size, mode, rng);
      break;
    default:
      fail(Errc::UnknownAxis, "unrecognized axis");
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Evaluating instantiations

/// Shared evaluation setup for one (data, model set, grouping, ties) tuple.
struct EvalContext {
  const BenchmarkData* data = nullptr;
  std::vector<int> models;  // data indices, sorted
  Grouping grouping = Grouping::by_scenario;
  TiePolicy ties = TiePolicy::strict;
  Selection full_selection;
  engine::Plan full_plan;

  static EvalContext make(const BenchmarkData& data, Grouping grouping,
                          TiePolicy ties) {
    EvalContext ctx;
    ctx.data = &data;
    ctx.models.resize(static_cast<std::size_t>(data.n_models()));
    std::iota(ctx.models.begin(), ctx.models.end(), 0);
    ctx.grouping = grouping;
    ctx.ties = ties;
    ctx.full_selection = Selection::full(data);
    ctx.full_plan = engine::build_plan(data, grouping, ctx.full_selection);
    return ctx;
  }

  int n() const { return static_cast<int>(models.size()); }
};

/// MWR values plus the induced order (slots into ctx.models, best first).
struct FastOutcome {
  std::vector<double> mwr;
  std::vector<int> order;
};

namespace detail {

inline engine::Plan plan_for_picked(const BenchmarkData& data, Grouping grouping,
                                    Axis axis,
                                    const std::vector<std::pair<int, std::uint32_t>>& picked) {
  engine::Plan plan;
  if (axis == Axis::scenarios) {
    for (const auto& [sc, count] : picked) {
      if (grouping == Grouping::by_subscenario) {
        for (int s : data.scenario_subs(sc)) {
          engine::Unit unit;
          unit.parts.emplace_back(s, 1u);
          unit.multiplicity = count;
          unit.label = data.sub(s).id;
          plan.push_back(std::move(unit));
        }
      } else {
        engine::Unit unit;
        for (int s : data.scenario_subs(sc)) unit.parts.emplace_back(s, 1u);
        unit.multiplicity = count;
        unit.label = data.scenario(sc);
        plan.push_back(std::move(unit));
      }
    }
    return plan;
  }
  // Subscenario axis: the multiset is drawn from the global pool. Under
  // by_scenario, a scenario's unit averages its picked subscenarios with
  // their multiplicities; scenarios with nothing picked drop out.
  if (grouping == Grouping::by_subscenario) {
    for (const auto& [s, count] : picked) {
      engine::Unit unit;
      unit.parts.emplace_back(s, 1u);
      unit.multiplicity = count;
      unit.label = data.sub(s).id;
      plan.push_back(std::move(unit));
    }
    return plan;
  }
  std::vector<std::vector<std::pair<int, std::uint32_t>>> buckets(
      static_cast<std::size_t>(data.n_scenarios()));
  for (const auto& [s, count] : picked)
    buckets[static_cast<std::size_t>(data.sub(s).scenario)].emplace_back(s, count);
  for (int sc = 0; sc < data.n_scenarios(); ++sc) {
    if (buckets[static_cast<std::size_t>(sc)].empty()) continue;
    engine::Unit unit;
    unit.parts = std::move(buckets[static_cast<std::size_t>(sc)]);
    unit.label = data.scenario(sc);
    plan.push_back(std::move(unit));
  }
  return plan;
}

}  // namespace detail

/// Evaluates MWR + order for one instantiation. `ws` is caller-owned scratch.
inline void evaluate_instantiation(const EvalContext& ctx,
                                   const Instantiation& inst,
                                   engine::Workspace& ws, FastOutcome& out) {
  const BenchmarkData& data = *ctx.data;
  if (inst.axis == Axis::examples || inst.axis == Axis::prompt_pairing) {
    engine::evaluate(data, ctx.models, ctx.full_plan, inst.selection, ctx.ties, ws);
  } else {
    const engine::Plan plan =
        detail::plan_for_picked(data, ctx.grouping, inst.axis, inst.picked);
    engine::evaluate(data, ctx.models, plan, ctx.full_selection, ctx.ties, ws);
  }
  out.mwr = ws.mwr;
  out.order = ws.order;
}

/// Full-data outcome (the original instantiation).
inline FastOutcome evaluate_original(const EvalContext& ctx,
                                     engine::Workspace& ws) {
  engine::evaluate(*ctx.data, ctx.models, ctx.full_plan, ctx.full_selection,
                   ctx.ties, ws);
  return FastOutcome{ws.mwr, ws.order};
}

namespace detail {

/// Similarity in [0, 1] between the reference outcome and an alternative.
inline double objective_similarity(const EvalContext& ctx, ObjectiveKind objective,
                                   const FastOutcome& ref, const FastOutcome& alt,
                                   std::vector<int>& pos_scratch) {
  const std::size_t n = ref.order.size();
  switch (objective) {
    case ObjectiveKind::full_ranking_kendall: {
      pos_scratch.assign(n, 0);
      for (std::size_t i = 0; i < n; ++i)
        pos_scratch[static_cast<std::size_t>(alt.order[i])] = static_cast<int>(i);
      std::vector<int> pos2(n);
      for (std::size_t i = 0; i < n; ++i)
        pos2[i] = pos_scratch[static_cast<std::size_t>(ref.order[i])];
      return (kendall_from_pos(pos2) + 1.0) / 2.0;
    }
    case ObjectiveKind::full_ranking_weighted: {
      pos_scratch.assign(n, 0);
      for (std::size_t i = 0; i < n; ++i)
        pos_scratch[static_cast<std::size_t>(alt.order[i])] = static_cast<int>(i);
      std::vector<int> pos12(n), pos21(n);
      for (std::size_t i = 0; i < n; ++i)
        pos12[i] = pos_scratch[static_cast<std::size_t>(ref.order[i])];
      pos_scratch.assign(n, 0);
      for (std::size_t i = 0; i < n; ++i)
        pos_scratch[static_cast<std::size_t>(ref.order[i])] = static_cast<int>(i);
      for (std::size_t i = 0; i < n; ++i)
        pos21[i] = pos_scratch[static_cast<std::size_t>(alt.order[i])];
      const double tau =
          (weighted_directional(pos12) + weighted_directional(pos21)) / 2.0;
      return (tau + 1.0) / 2.0;
    }
    case ObjectiveKind::best_model: {
      // Agreement indicator: 1 unless the reference top two invert.
      const int a = ref.order[0];
      const int b = ref.order[1];
      int pos_a = 0, pos_b = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (alt.order[i] == a) pos_a = static_cast<int>(i);
        if (alt.order[i] == b) pos_b = static_cast<int>(i);
      }
      return pos_a > pos_b ? 0.0 : 1.0;
    }
    case ObjectiveKind::model_quality: {
      double total = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        total += std::fabs(ref.mwr[k] - alt.mwr[k]);
      return 1.0 - total / static_cast<double>(n);
    }
  }
  return 0.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// DIoR

struct ResampleOptions {
  Axis axis = Axis::examples;
  std::int64_t size = kOriginalSize;
  SampleMode mode = SampleMode::bootstrap;
  Grouping grouping = Grouping::by_scenario;
  TiePolicy ties = TiePolicy::strict;
  int B = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool one_sided = false;  // 5th percentile instead of 2.5th
};

struct DiorResult {
  Axis axis;
  std::int64_t size;
  ObjectiveKind objective;
  int B;
  std::uint64_t seed;
  std::vector<double> samples;   // iteration order
  double lower_bound = 0.0;      // the DIoR value
  double point_estimate = 0.0;   // median
};

/// Empirical quantile: sorted ascending, index floor(q * N), clamped.
inline double sample_quantile(std::vector<double> sorted_or_not, double q) {
  std::sort(sorted_or_not.begin(), sorted_or_not.end());
  const std::size_t n = sorted_or_not.size();
  std::size_t idx = static_cast<std::size_t>(q * static_cast<double>(n));
  if (idx >= n) idx = n - 1;
  return sorted_or_not[idx];
}

/// Lower confidence bound + median of a similarity sample vector.
inline std::pair<double, double> summarize_dior_samples(
    const std::vector<double>& samples, bool one_sided = false) {
  return {sample_quantile(samples, one_sided ? 0.05 : 0.025),
          sample_quantile(samples, 0.5)};
}

/// Stability of `objective` under B resampled instantiations of the axis:
/// the lower 95% confidence bound of the similarity between the original
/// outcome and each instantiation's outcome.
inline DiorResult dior(const BenchmarkData& data, ObjectiveKind objective,
                       const ResampleOptions& opt) {
  if (data.n_models() < 2)
    fail(Errc::DegenerateObjective, "objectives need at least 2 models");
  if (opt.B < 100) fail(Errc::InvalidArgument, "B must be at least 100");

  const EvalContext ctx = EvalContext::make(data, opt.grouping, opt.ties);
  engine::Workspace ws0;
  const FastOutcome original = evaluate_original(ctx, ws0);

  DiorResult result;
  result.axis = opt.axis;
  result.size = opt.size;
  result.objective = objective;
  result.B = opt.B;
  result.seed = opt.seed;
  result.samples.assign(static_cast<std::size_t>(opt.B), 0.0);

  parallel_for(0, static_cast<std::size_t>(opt.B), opt.threads, [&](std::size_t i) {
    thread_local engine::Workspace ws;
    thread_local FastOutcome alt;
    thread_local std::vector<int> pos_scratch;
    const Instantiation inst =
        resample(data, opt.axis, opt.size, opt.mode, opt.seed, i);
    evaluate_instantiation(ctx, inst, ws, alt);
    result.samples[i] =
        detail::objective_similarity(ctx, objective, original, alt, pos_scratch);
  });

  const auto [lower, median] = summarize_dior_samples(result.samples, opt.one_sided);
  result.lower_bound = lower;
  result.point_estimate = median;
  return result;
}

// ---------------------------------------------------------------------------
// Best-model error rate with cumulative leader removal

struct BestModelRow {
  std::vector<std::string> removed;  // leaders removed before this repetition
  std::string top;
  std::string runner_up;
  double error_rate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct BestModelResult {
  std::vector<BestModelRow> rows;
  double average_error = 0.0;
};

namespace detail {

inline std::pair<double, double> normal_ci(double p, int n, double z = 1.959963984540054) {
  const double half = z * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

/// Clopper-Pearson via bisection on the binomial tail (log-space sums).
inline std::pair<double, double> exact_binomial_ci(int k, int n, double alpha = 0.05) {
  auto tail_le = [n](int kk, double p) {  // P(X <= kk)
    if (p <= 0.0) return 1.0;
    if (p >= 1.0) return kk >= n ? 1.0 : 0.0;
    double total = 0.0;
    double log_choose = 0.0;
    for (int i = 0; i <= kk; ++i) {
      if (i > 0) log_choose += std::log(static_cast<double>(n - i + 1) / static_cast<double>(i));
      total += std::exp(log_choose + i * std::log(p) + (n - i) * std::log1p(-p));
    }
    return std::min(total, 1.0);
  };
  auto bisect = [](auto fn, double target, bool increasing) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      const bool above = fn(mid) > target;
      if (above == increasing) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  double lo = 0.0, hi = 1.0;
  if (k > 0)
    lo = bisect([&](double p) { return 1.0 - tail_le(k - 1, p); }, alpha / 2.0, false);
  if (k < n)
    hi = bisect([&](double p) { return tail_le(k, p); }, alpha / 2.0, true);
  return {lo, hi};
}

}  // namespace detail

/// Error rate of the best-model objective: the probability across
/// instantiations that the top two models invert, repeated with the current
/// leader removed each time (as if it had never been submitted). Removing a
/// model changes every remaining model's MWR, so each repetition recomputes
/// MWR within its surviving subset. One instantiation per iteration is
/// shared by all repetitions.
inline BestModelResult best_model_error_rate(const BenchmarkData& data,
                                             const ResampleOptions& opt,
                                             int top_removals = 5,
                                             bool exact_ci = false) {
  if (data.n_models() <= top_removals + 1)
    fail(Errc::InsufficientModels,
         "need more than " + std::to_string(top_removals + 1) + " models");

  const EvalContext ctx = EvalContext::make(data, opt.grouping, opt.ties);
  const BenchmarkData& d = data;
  const std::size_t n_total = ctx.models.size();
  engine::Workspace ws0;
  engine::evaluate(d, ctx.models, ctx.full_plan, ctx.full_selection, ctx.ties, ws0);

  auto slot_less = [&d, &ctx](int a, double va, int b, double vb) {
    if (va != vb) return va > vb;  // "less" = ranked better
    return d.model(ctx.models[static_cast<std::size_t>(a)]) <
           d.model(ctx.models[static_cast<std::size_t>(b)]);
  };

  // Repetition r compares the top two of the reduced benchmark's own
  // full-data ranking after the first r leaders have been removed.
  struct Rep {
    std::vector<int> slots;
    int top_slot, second_slot;
    std::vector<std::string> removed;
  };
  std::vector<Rep> reps;
  {
    std::vector<int> slots(n_total);
    std::iota(slots.begin(), slots.end(), 0);
    std::vector<std::string> removed;
    for (int r = 0; r <= top_removals; ++r) {
      int best = -1, second = -1;
      double best_v = 0.0, second_v = 0.0;
      for (int slot : slots) {
        const double v = engine::mwr_within_subset(
            ws0.unit_scores.data(), n_total, ctx.full_plan, slots, slot, ctx.ties);
        if (best < 0 || slot_less(slot, v, best, best_v)) {
          second = best;
          second_v = best_v;
          best = slot;
          best_v = v;
        } else if (second < 0 || slot_less(slot, v, second, second_v)) {
          second = slot;
          second_v = v;
        }
      }
      reps.push_back(Rep{slots, best, second, removed});
      removed.push_back(d.model(ctx.models[static_cast<std::size_t>(best)]));
      slots.erase(std::remove(slots.begin(), slots.end(), best), slots.end());
    }
  }

  std::vector<std::vector<std::uint8_t>> switches(
      reps.size(), std::vector<std::uint8_t>(static_cast<std::size_t>(opt.B), 0));
  parallel_for(0, static_cast<std::size_t>(opt.B), opt.threads, [&](std::size_t i) {
    thread_local engine::Workspace ws;
    const Instantiation inst = resample(d, opt.axis, opt.size, opt.mode, opt.seed, i);
    engine::Plan picked_plan;
    const bool selection_axis =
        inst.axis == Axis::examples || inst.axis == Axis::prompt_pairing;
    if (!selection_axis)
      picked_plan = detail::plan_for_picked(d, ctx.grouping, inst.axis, inst.picked);
    const engine::Plan& plan = selection_axis ? ctx.full_plan : picked_plan;
    const Selection& sel = selection_axis ? inst.selection : ctx.full_selection;
    engine::evaluate(d, ctx.models, plan, sel, ctx.ties, ws);
    for (std::size_t r = 0; r < reps.size(); ++r) {
      const int a = reps[r].top_slot;
      const int b = reps[r].second_slot;
      const double va = engine::mwr_within_subset(
          ws.unit_scores.data(), n_total, plan, reps[r].slots, a, ctx.ties);
      const double vb = engine::mwr_within_subset(
          ws.unit_scores.data(), n_total, plan, reps[r].slots, b, ctx.ties);
      switches[r][i] = slot_less(a, va, b, vb) ? 0 : 1;
    }
  });

  BestModelResult result;
  double total = 0.0;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    int k = 0;
    for (std::uint8_t s : switches[r]) k += s;
    const double rate = static_cast<double>(k) / static_cast<double>(opt.B);
    const auto [lo, hi] = exact_ci ? detail::exact_binomial_ci(k, opt.B)
                                   : detail::normal_ci(rate, opt.B);
    BestModelRow row;
    row.removed = reps[r].removed;
    row.top = d.model(ctx.models[static_cast<std::size_t>(reps[r].top_slot)]);
    row.runner_up = d.model(ctx.models[static_cast<std::size_t>(reps[r].second_slot)]);
    row.error_rate = rate;
    row.ci_lo = lo;
    row.ci_hi = hi;
    result.rows.push_back(std::move(row));
    total += rate;
  }
  result.average_error = total / static_cast<double>(reps.size());
  return result;
}

// ---------------------------------------------------------------------------
// Cluster-switch error curves over the examples axis

struct ClusterCurveRow {
  std::int64_t size;
  int cluster_size;
  double error_rate;
  double band_lo, band_hi;  // 95% band over iterations
};

struct RankTrajectoryRow {
  std::int64_t size;
  std::string model;
  double median_rank;
  double rank_lo, rank_hi;  // 2.5 / 97.5 percentiles
};

struct ClusterCurveResult {
  std::vector<ClusterCurveRow> rows;
  std::vector<RankTrajectoryRow> trajectories;
};

/// For each examples-axis size and cluster size c: the probability that the
/// models ranked (a, a + c - 1) on full data invert under resampling,
/// averaged over every anchor a and all B instantiations.
inline ClusterCurveResult cluster_error_curve(
    const BenchmarkData& data, const std::vector<std::int64_t>& sizes,
    const std::vector<int>& cluster_sizes, const ResampleOptions& opt) {
  if (data.n_models() < 2)
    fail(Errc::DegenerateObjective, "need at least 2 models");
  const EvalContext ctx = EvalContext::make(data, opt.grouping, opt.ties);
  engine::Workspace ws0;
  const FastOutcome original = evaluate_original(ctx, ws0);
  const int n = ctx.n();
  for (int c : cluster_sizes)
    if (c < 2 || c > n)
      fail(Errc::OutOfRange, "cluster size " + std::to_string(c) +
                                 " does not fit " + std::to_string(n) + " models");

  ClusterCurveResult result;
  for (std::size_t size_idx = 0; size_idx < sizes.size(); ++size_idx) {
    const std::int64_t size = sizes[size_idx];
    std::vector<std::vector<double>> per_iter(
        cluster_sizes.size(),
        std::vector<double>(static_cast<std::size_t>(opt.B), 0.0));
    std::vector<std::vector<std::uint16_t>> ranks(
        static_cast<std::size_t>(n),
        std::vector<std::uint16_t>(static_cast<std::size_t>(opt.B), 0));

    parallel_for(0, static_cast<std::size_t>(opt.B), opt.threads, [&](std::size_t i) {
      thread_local engine::Workspace ws;
      thread_local std::vector<int> pos_alt;
      Rng rng(opt.seed, {detail::kStreamCluster, static_cast<std::uint64_t>(size), i});
      const Selection sel = draw_examples_selection(data, size, opt.mode, rng);
      engine::evaluate(data, ctx.models, ctx.full_plan, sel, ctx.ties, ws);
      pos_alt.assign(static_cast<std::size_t>(n), 0);
      for (int p = 0; p < n; ++p) {
        pos_alt[static_cast<std::size_t>(ws.order[static_cast<std::size_t>(p)])] = p;
        ranks[static_cast<std::size_t>(ws.order[static_cast<std::size_t>(p)])][i] =
            static_cast<std::uint16_t>(p + 1);
      }
      for (std::size_t ci = 0; ci < cluster_sizes.size(); ++ci) {
        const int c = cluster_sizes[ci];
        const int anchors = n - c + 1;
        int inverted = 0;
        for (int a = 0; a < anchors; ++a) {
          const int top = original.order[static_cast<std::size_t>(a)];
          const int bottom = original.order[static_cast<std::size_t>(a + c - 1)];
          if (pos_alt[static_cast<std::size_t>(top)] >
              pos_alt[static_cast<std::size_t>(bottom)])
            ++inverted;
        }
        per_iter[ci][i] = static_cast<double>(inverted) / static_cast<double>(anchors);
      }
    });

    for (std::size_t ci = 0; ci < cluster_sizes.size(); ++ci) {
      double mean = 0.0;
      for (double v : per_iter[ci]) mean += v;
      mean /= static_cast<double>(opt.B);
      double var = 0.0;
      for (double v : per_iter[ci]) var += (v - mean) * (v - mean);
      var /= static_cast<double>(opt.B > 1 ? opt.B - 1 : 1);
      const double half = 1.959963984540054 * std::sqrt(var / static_cast<double>(opt.B));
      result.rows.push_back(ClusterCurveRow{size, cluster_sizes[ci], mean,
                                            std::max(0.0, mean - half),
                                            std::min(1.0, mean + half)});
    }
    for (int k = 0; k < n; ++k) {
      std::vector<double> rk(ranks[static_cast<std::size_t>(k)].begin(),
                             ranks[static_cast<std::size_t>(k)].end());
      result.trajectories.push_back(RankTrajectoryRow{
          size, data.model(ctx.models[static_cast<std::size_t>(k)]),
          sample_quantile(rk, 0.5), sample_quantile(rk, 0.025),
          sample_quantile(rk, 0.975)});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Prompt pairing strategies at a fixed call budget

struct PromptCompareRow {
  std::string strategy;  // all_prompts | uniform_pairs
  std::string mode;      // bootstrap | subsample
  std::string model;
  double ci_width;
};

struct PromptCompareResult {
  std::vector<std::string> excluded_subs;  // fewer than 2 distinct prompts
  std::vector<PromptCompareRow> rows;
  // (strategy, mode) -> mean CI width over models
  std::vector<std::tuple<std::string, std::string, double>> summary;
};

namespace detail {

/// all_prompts selection: k examples per subscenario; under bootstrap the
/// prompt set itself is redrawn with repetition (the prompt choice is part
/// of the design), under subsample all prompts are kept.
inline void draw_all_prompts_selection(const BenchmarkData& data,
                                       const std::vector<int>& subs,
                                       std::int64_t budget, SampleMode mode,
                                       Rng& rng, Selection& sel) {
  thread_local std::vector<std::pair<std::uint32_t, std::uint32_t>> ex;
  thread_local std::vector<std::pair<std::uint32_t, std::uint32_t>> pr;
  for (std::size_t slot = 0; slot < subs.size(); ++slot) {
    const auto& sub = data.sub(subs[slot]);
    const std::uint32_t n_ex = static_cast<std::uint32_t>(sub.n_examples());
    const std::uint32_t n_pr = static_cast<std::uint32_t>(sub.n_prompts());
    const std::int64_t k = budget / n_pr;
    if (k < 1)
      fail(Errc::InvalidArgument,
           "budget " + std::to_string(budget) + " is below the prompt count of '" +
               sub.id + "'");
    if (mode == SampleMode::subsample && k > n_ex)
      fail(Errc::SizeExceedsPool,
           "budget needs " + std::to_string(k) + " examples but '" + sub.id +
               "' has " + std::to_string(n_ex));
    if (mode == SampleMode::bootstrap) {
      draw_multiset(rng, n_ex, static_cast<std::uint64_t>(k), ex);
      draw_multiset(rng, n_pr, n_pr, pr);
    } else {
      draw_distinct(rng, n_ex, static_cast<std::uint32_t>(k), ex);
      pr.clear();
      for (std::uint32_t p = 0; p < n_pr; ++p) pr.emplace_back(p, 1u);
    }
    auto& entry = sel.subs[slot];
    entry.pair_counts.clear();
    for (const auto& [e, ce] : ex)
      for (const auto& [p, cp] : pr)
        entry.pair_counts.push_back({e, p, ce * cp});
  }
}

inline void draw_uniform_pairs_selection(const BenchmarkData& data,
                                         const std::vector<int>& subs,
                                         std::int64_t budget, SampleMode mode,
                                         Rng& rng, Selection& sel) {
  thread_local std::vector<std::pair<std::uint32_t, std::uint32_t>> cells;
  for (std::size_t slot = 0; slot < subs.size(); ++slot) {
    const auto& sub = data.sub(subs[slot]);
    const std::uint32_t n_pairs =
        static_cast<std::uint32_t>(sub.n_examples() * sub.n_prompts());
    if (mode == SampleMode::subsample &&
        budget > static_cast<std::int64_t>(n_pairs))
      fail(Errc::BudgetExceedsCrossProduct,
           "budget " + std::to_string(budget) + " exceeds the " +
               std::to_string(n_pairs) + " cells of '" + sub.id + "'");
    if (mode == SampleMode::bootstrap)
      draw_multiset(rng, n_pairs, static_cast<std::uint64_t>(budget), cells);
    else
      draw_distinct(rng, n_pairs, static_cast<std::uint32_t>(budget), cells);
    auto& entry = sel.subs[slot];
    entry.pair_counts.clear();
    const std::uint32_t prompts = static_cast<std::uint32_t>(sub.n_prompts());
    for (const auto& [cell, count] : cells)
      entry.pair_counts.push_back({cell / prompts, cell % prompts, count});
  }
}

}  // namespace detail

/// Compares in-context pairing strategies at an equal per-subscenario call
/// budget: the full cross-product of a sampled example set versus uniform
/// draws from the (example x prompt) grid. Reports the 95% CI width of each
/// model's MWR under both bootstrap and subsample resampling. Subscenarios
/// that do not vary their prompts are excluded and listed.
inline PromptCompareResult prompt_strategy_compare(const BenchmarkData& data,
                                                   std::int64_t budget,
                                                   const ResampleOptions& opt) {
  if (budget < 1) fail(Errc::InvalidArgument, "budget must be at least 1");
  PromptCompareResult result;
  std::vector<int> eligible;
  for (int s = 0; s < data.n_subs(); ++s) {
    if (data.sub(s).n_prompts() >= 2)
      eligible.push_back(s);
    else
      result.excluded_subs.push_back(data.sub(s).id);
  }
  if (eligible.empty())
    fail(Errc::NoEligibleSubscenario,
         "every subscenario has a single distinct prompt");

  // Template selection over eligible subs only; per-iteration draws replace
  // the pair lists in place.
  Selection tmpl;
  tmpl.subs.resize(eligible.size());
  for (std::size_t slot = 0; slot < eligible.size(); ++slot) {
    tmpl.subs[slot].sub = eligible[slot];
    tmpl.subs[slot].kind = Selection::Kind::pairs;
  }
  const EvalContext ctx = EvalContext::make(data, opt.grouping, opt.ties);
  const engine::Plan plan = engine::build_plan(data, opt.grouping, tmpl);
  const int n = ctx.n();

  const std::pair<const char*, SampleMode> modes[2] = {
      {"bootstrap", SampleMode::bootstrap}, {"subsample", SampleMode::subsample}};
  const char* strategies[2] = {"all_prompts", "uniform_pairs"};

  for (int si = 0; si < 2; ++si) {
    for (const auto& [mode_name, mode] : modes) {
      std::vector<std::vector<double>> mwr_samples(
          static_cast<std::size_t>(n),
          std::vector<double>(static_cast<std::size_t>(opt.B), 0.0));
      parallel_for(0, static_cast<std::size_t>(opt.B), opt.threads, [&](std::size_t i) {
        thread_local engine::Workspace ws;
        thread_local Selection sel;
        sel = tmpl;
        Rng rng(opt.seed, {detail::kStreamPromptCompare,
                           static_cast<std::uint64_t>(si),
                           static_cast<std::uint64_t>(mode), i});
        if (si == 0)
          detail::draw_all_prompts_selection(data, eligible, budget, mode, rng, sel);
        else
          detail::draw_uniform_pairs_selection(data, eligible, budget, mode, rng, sel);
        engine::evaluate(data, ctx.models, plan, sel, ctx.ties, ws);
        for (int k = 0; k < n; ++k)
          mwr_samples[static_cast<std::size_t>(k)][i] = ws.mwr[static_cast<std::size_t>(k)];
      });
      double mean_width = 0.0;
      for (int k = 0; k < n; ++k) {
        const double width =
            sample_quantile(mwr_samples[static_cast<std::size_t>(k)], 0.975) -
            sample_quantile(mwr_samples[static_cast<std::size_t>(k)], 0.025);
        result.rows.push_back(PromptCompareRow{
            strategies[si], mode_name,
            data.model(ctx.models[static_cast<std::size_t>(k)]), width});
        mean_width += width;
      }
      result.summary.emplace_back(strategies[si], mode_name,
                                  mean_width / static_cast<double>(n));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Cross-subscenario rank correlations

struct CorrelationResult {
  std::vector<std::string> subs;
  std::vector<std::vector<double>> tau;  // symmetric, unit diagonal
  double mean_within = std::numeric_limits<double>::quiet_NaN();
  double mean_across = std::numeric_limits<double>::quiet_NaN();
};

/// Kendall correlation matrix between the model rankings each standalone
/// subscenario induces, plus the mean correlation within versus across
/// taxonomy scenarios.
inline CorrelationResult subscenario_rank_correlations(const BenchmarkData& data,
                                                       TiePolicy /*ties*/) {
  if (data.n_models() < 2) fail(Errc::TooFewModels, "need at least 2 models");
  if (data.n_subs() < 2)
    fail(Errc::InvalidArgument, "need at least 2 subscenarios");
  const int n_subs = data.n_subs();
  const int n_models = data.n_models();

  // Per-subscenario order of the models that have it, best first, exact
  // score ties broken by ascending id (the standard tie-break).
  std::vector<std::vector<int>> orders(static_cast<std::size_t>(n_subs));
  for (int s = 0; s < n_subs; ++s) {
    const auto& sub = data.sub(s);
    std::vector<int> present;
    for (int m = 0; m < n_models; ++m)
      if (sub.model_present[static_cast<std::size_t>(m)]) present.push_back(m);
    std::sort(present.begin(), present.end(), [&](int a, int b) {
      const double va = sub.model_sum[static_cast<std::size_t>(a)] /
                        sub.model_count[static_cast<std::size_t>(a)];
      const double vb = sub.model_sum[static_cast<std::size_t>(b)] /
                        sub.model_count[static_cast<std::size_t>(b)];
      if (va != vb) return va > vb;
      return data.model(a) < data.model(b);
    });
    orders[static_cast<std::size_t>(s)] = std::move(present);
  }

  CorrelationResult result;
  for (int s = 0; s < n_subs; ++s) result.subs.push_back(data.sub(s).id);
  result.tau.assign(static_cast<std::size_t>(n_subs),
                    std::vector<double>(static_cast<std::size_t>(n_subs),
                                        std::numeric_limits<double>::quiet_NaN()));

  double within_sum = 0.0, across_sum = 0.0;
  int within_cnt = 0, across_cnt = 0;
  std::vector<int> pos_b(static_cast<std::size_t>(n_models));
  for (int a = 0; a < n_subs; ++a) {
    result.tau[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)] = 1.0;
    for (int b = a + 1; b < n_subs; ++b) {
      std::fill(pos_b.begin(), pos_b.end(), -1);
      for (std::size_t p = 0; p < orders[static_cast<std::size_t>(b)].size(); ++p)
        pos_b[static_cast<std::size_t>(orders[static_cast<std::size_t>(b)][p])] =
            static_cast<int>(p);
      std::vector<int> pos2;
      for (int m : orders[static_cast<std::size_t>(a)])
        if (pos_b[static_cast<std::size_t>(m)] >= 0)
          pos2.push_back(pos_b[static_cast<std::size_t>(m)]);
      if (pos2.size() < 2) continue;
      // Re-rank the common subset to keep the denominator exact.
      std::vector<int> compact(pos2.size());
      std::vector<int> order_idx(pos2.size());
      std::iota(order_idx.begin(), order_idx.end(), 0);
      std::sort(order_idx.begin(), order_idx.end(),
                [&pos2](int x, int y) { return pos2[static_cast<std::size_t>(x)] < pos2[static_cast<std::size_t>(y)]; });
      for (std::size_t r = 0; r < order_idx.size(); ++r)
        compact[static_cast<std::size_t>(order_idx[r])] = static_cast<int>(r);
      const double tau = detail::kendall_from_pos(compact);
      result.tau[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = tau;
      result.tau[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = tau;
      if (data.sub(a).scenario == data.sub(b).scenario) {
        within_sum += tau;
        ++within_cnt;
      } else {
        across_sum += tau;
        ++across_cnt;
      }
    }
  }
  if (within_cnt) result.mean_within = within_sum / within_cnt;
  if (across_cnt) result.mean_across = across_sum / across_cnt;
  return result;
}

}  // namespace benchrel
