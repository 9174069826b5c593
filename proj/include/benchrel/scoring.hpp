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
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "benchrel/data.hpp"
#include "benchrel/error.hpp"

namespace benchrel {

enum class Grouping { by_scenario, by_subscenario };
enum class TiePolicy { strict, half };

inline const char* to_string(Grouping g) {
  return g == Grouping::by_scenario ? "by_scenario" : "by_subscenario";
}
inline const char* to_string(TiePolicy t) {
  return t == TiePolicy::strict ? "strict" : "half";
}

/// Which (example, prompt) cells of each subscenario take part in a
/// computation. Multisets are allowed so one Selection can represent a
/// bootstrap draw. Subscenarios without an entry are excluded entirely.
struct Selection {
  enum class Kind { full, examples, pairs };

  struct SubSelection {
    int sub = -1;
    Kind kind = Kind::full;
    // Subscenario-level multiplicity: a bootstrap draw can pick the same
    // subscenario several times, which weights it in scenario means.
    std::uint32_t weight = 1;
    // kind == examples: chosen examples with multiplicities; every prompt of
    // a chosen example is included.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> example_counts;
    // kind == pairs: chosen (example, prompt) cells with multiplicities.
    std::vector<std::array<std::uint32_t, 3>> pair_counts;

    std::uint64_t total_multiplicity() const {
      std::uint64_t total = 0;
      if (kind == Kind::examples)
        for (const auto& [e, c] : example_counts) total += c;
      else
        for (const auto& pc : pair_counts) total += pc[2];
      return total;
    }
  };

  std::vector<SubSelection> subs;  // sorted by sub index, unique
  std::string description = "full";

  static Selection full(const BenchmarkData& data) {
    Selection sel;
    sel.subs.resize(static_cast<std::size_t>(data.n_subs()));
    for (int s = 0; s < data.n_subs(); ++s) sel.subs[static_cast<std::size_t>(s)].sub = s;
    return sel;
  }

  const SubSelection* find(int sub) const {
    auto it = std::lower_bound(
        subs.begin(), subs.end(), sub,
        [](const SubSelection& a, int b) { return a.sub < b; });
    return (it != subs.end() && it->sub == sub) ? &*it : nullptr;
  }

  /// Id-based construction for callers that do not hold index handles.
  static Selection from_pairs(
      const BenchmarkData& data,
      const std::map<std::string,
                     std::vector<std::pair<std::string, std::string>>>& picks) {
    Selection sel;
    sel.description = "explicit-pairs";
    for (const auto& [sub_id, pairs] : picks) {
      const int s = data.sub_index(sub_id);
      if (s < 0) fail(Errc::InvalidArgument, "unknown subscenario '" + sub_id + "'");
      const auto& sub = data.sub(s);
      SubSelection entry;
      entry.sub = s;
      entry.kind = Kind::pairs;
      std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> counts;
      for (const auto& [example_id, prompt_id] : pairs) {
        const auto eit = std::lower_bound(sub.examples.begin(), sub.examples.end(), example_id);
        const auto pit = std::lower_bound(sub.prompts.begin(), sub.prompts.end(), prompt_id);
        if (eit == sub.examples.end() || *eit != example_id ||
            pit == sub.prompts.end() || *pit != prompt_id)
          fail(Errc::InvalidArgument,
               "pair (" + example_id + ", " + prompt_id +
                   ") does not exist in subscenario '" + sub_id + "'");
        counts[{static_cast<std::uint32_t>(eit - sub.examples.begin()),
                static_cast<std::uint32_t>(pit - sub.prompts.begin())}] += 1;
      }
      for (const auto& [key, c] : counts)
        entry.pair_counts.push_back({key.first, key.second, c});
      sel.subs.push_back(std::move(entry));
    }
    std::sort(sel.subs.begin(), sel.subs.end(),
              [](const SubSelection& a, const SubSelection& b) { return a.sub < b.sub; });
    return sel;
  }
};

/// MWR per model plus the configuration that produced it.
struct ScoreTable {
  std::vector<std::string> models;  // evaluated set, sorted
  std::vector<double> values;       // MWR, aligned with models
  Grouping grouping = Grouping::by_scenario;
  TiePolicy ties = TiePolicy::strict;
  std::string selection_desc = "full";
  // Optional per-unit breakdown (units are the effective scenarios).
  std::vector<std::string> unit_labels;
  std::vector<std::vector<double>> unit_win_rates;  // [model][unit], NaN = n/a

  double at(const std::string& id) const {
    for (std::size_t i = 0; i < models.size(); ++i)
      if (models[i] == id) return values[i];
    fail(Errc::InvalidArgument, "model '" + id + "' not in score table");
  }
};

struct Ranking {
  std::vector<std::string> order;  // best first
  std::vector<double> scores;      // aligned with order
  bool tie_break_used = false;

  int position(const std::string& id) const {  // 1-based
    for (std::size_t i = 0; i < order.size(); ++i)
      if (order[i] == id) return static_cast<int>(i) + 1;
    fail(Errc::DomainMismatch, "model '" + id + "' not in ranking");
  }
};

// ---------------------------------------------------------------------------
// Evaluation engine. Units are the effective scenarios of one computation:
// the default plan groups selected subscenarios by taxonomy scenario (or one
// unit per subscenario), and the resampling module builds custom plans for
// scenario- and subscenario-axis draws. All hot-loop state lives in a
// caller-owned Workspace so bootstrap iterations do not allocate.

namespace engine {

struct Unit {
  std::vector<std::pair<int, std::uint32_t>> parts;  // (selection slot, weight)
  std::uint32_t multiplicity = 1;
  std::string label;
};
using Plan = std::vector<Unit>;

inline Plan build_plan(const BenchmarkData& data, Grouping grouping,
                       const Selection& sel) {
  Plan plan;
  if (grouping == Grouping::by_subscenario) {
    plan.reserve(sel.subs.size());
    for (std::size_t slot = 0; slot < sel.subs.size(); ++slot) {
      Unit unit;
      unit.parts.emplace_back(static_cast<int>(slot), 1u);
      unit.multiplicity = sel.subs[slot].weight;
      unit.label = data.sub(sel.subs[slot].sub).id;
      plan.push_back(std::move(unit));
    }
    return plan;
  }
  // Units in scenario order; a scenario's subscenarios need not be adjacent
  // in the globally sorted selection.
  std::vector<std::vector<std::pair<int, std::uint32_t>>> buckets(
      static_cast<std::size_t>(data.n_scenarios()));
  for (std::size_t slot = 0; slot < sel.subs.size(); ++slot)
    buckets[static_cast<std::size_t>(data.sub(sel.subs[slot].sub).scenario)]
        .emplace_back(static_cast<int>(slot), sel.subs[slot].weight);
  for (int sc = 0; sc < data.n_scenarios(); ++sc) {
    if (buckets[static_cast<std::size_t>(sc)].empty()) continue;
    Unit unit;
    unit.parts = std::move(buckets[static_cast<std::size_t>(sc)]);
    unit.label = data.scenario(sc);
    plan.push_back(std::move(unit));
  }
  return plan;
}

struct Workspace {
  std::vector<double> sub_scores;   // slot-major rows over models
  std::vector<double> unit_scores;  // unit-major rows over models
  std::vector<double> wr_sum;
  std::vector<double> wr_cnt;
  std::vector<double> mwr;
  std::vector<int> order;
};

/// Mean score of each model over one sub-selection; NaN when a model has no
/// available cell. Row layout: out[k] for models[k].
inline void score_one_sub(const BenchmarkData& data,
                          const Selection::SubSelection& entry,
                          std::span<const int> models, double* out) {
  const auto& sub = data.sub(entry.sub);
  const std::size_t all = static_cast<std::size_t>(data.n_models());
  const std::size_t n = models.size();

  if (entry.kind == Selection::Kind::full) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t m = static_cast<std::size_t>(models[k]);
      out[k] = sub.model_count[m] > 0.0 ? sub.model_sum[m] / sub.model_count[m]
                                        : detail::kAbsent;
    }
    return;
  }

  thread_local std::vector<double> acc;
  thread_local std::vector<double> cnt;
  acc.assign(n, 0.0);
  cnt.assign(n, 0.0);

  if (entry.kind == Selection::Kind::examples) {
    const std::size_t prompts = sub.n_prompts();
    if (sub.full_coverage) {
      // Dense case: every prompt of every chosen example is present, so the
      // denominator is just (draws * prompts).
      double draws = 0.0;
      if (n == all) {
        // Common case in the resampling loops: all models, contiguous rows.
        for (const auto& [e, c] : entry.example_counts) {
          const double w = static_cast<double>(c);
          const double* row = sub.example_sums.data() + static_cast<std::size_t>(e) * all;
          for (std::size_t k = 0; k < n; ++k) acc[k] += w * row[k];
          draws += w;
        }
      } else {
        for (const auto& [e, c] : entry.example_counts) {
          const double w = static_cast<double>(c);
          const double* row = sub.example_sums.data() + static_cast<std::size_t>(e) * all;
          for (std::size_t k = 0; k < n; ++k)
            acc[k] += w * row[static_cast<std::size_t>(models[k])];
          draws += w;
        }
      }
      const double denom = draws * static_cast<double>(prompts);
      for (std::size_t k = 0; k < n; ++k)
        out[k] = denom > 0.0 ? acc[k] / denom : detail::kAbsent;
      return;
    }
    for (const auto& [e, c] : entry.example_counts) {
      const double w = static_cast<double>(c);
      const double* srow = sub.example_sums.data() + static_cast<std::size_t>(e) * all;
      const float* crow = sub.example_counts.data() + static_cast<std::size_t>(e) * all;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t m = static_cast<std::size_t>(models[k]);
        acc[k] += w * srow[m];
        cnt[k] += w * static_cast<double>(crow[m]);
      }
    }
    for (std::size_t k = 0; k < n; ++k)
      out[k] = cnt[k] > 0.0 ? acc[k] / cnt[k] : detail::kAbsent;
    return;
  }

  // Pair multiset.
  for (const auto& pc : entry.pair_counts) {
    const double w = static_cast<double>(pc[2]);
    const double* row =
        sub.cells.data() +
        (static_cast<std::size_t>(pc[0]) * sub.n_prompts() + pc[1]) * all;
    for (std::size_t k = 0; k < n; ++k) {
      const double v = row[static_cast<std::size_t>(models[k])];
      if (detail::present(v)) {
        acc[k] += w * v;
        cnt[k] += w;
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    out[k] = cnt[k] > 0.0 ? acc[k] / cnt[k] : detail::kAbsent;
}

/// Evaluates MWR for `models` under the given plan and selection.
/// Fills ws.mwr (aligned with models) and ws.order (slots into models,
/// best first, ties broken by ascending model id).
inline void evaluate(const BenchmarkData& data, std::span<const int> models,
                     const Plan& plan, const Selection& sel, TiePolicy ties,
                     Workspace& ws,
                     std::vector<std::vector<double>>* unit_rates = nullptr,
                     std::vector<std::vector<double>>* unit_scores_out = nullptr) {
  const std::size_t n = models.size();
  if (n < 2) fail(Errc::TooFewModels, "need at least 2 models");

  ws.sub_scores.assign(sel.subs.size() * n, 0.0);
  for (std::size_t slot = 0; slot < sel.subs.size(); ++slot)
    score_one_sub(data, sel.subs[slot], models, ws.sub_scores.data() + slot * n);

  ws.unit_scores.assign(plan.size() * n, 0.0);
  for (std::size_t u = 0; u < plan.size(); ++u) {
    double* row = ws.unit_scores.data() + u * n;
    for (std::size_t k = 0; k < n; ++k) {
      double sum = 0.0, weight = 0.0;
      for (const auto& [slot, w] : plan[u].parts) {
        const double v = ws.sub_scores[static_cast<std::size_t>(slot) * n + k];
        if (detail::present(v)) {
          sum += static_cast<double>(w) * v;
          weight += static_cast<double>(w);
        }
      }
      row[k] = weight > 0.0 ? sum / weight : detail::kAbsent;
    }
  }

  if (unit_rates) unit_rates->assign(n, std::vector<double>(plan.size(), detail::kAbsent));
  if (unit_scores_out) {
    unit_scores_out->assign(n, std::vector<double>(plan.size()));
    for (std::size_t u = 0; u < plan.size(); ++u)
      for (std::size_t k = 0; k < n; ++k)
        (*unit_scores_out)[k][u] = ws.unit_scores[u * n + k];
  }

  ws.wr_sum.assign(n, 0.0);
  ws.wr_cnt.assign(n, 0.0);
  const double tie_credit = ties == TiePolicy::half ? 0.5 : 0.0;
  for (std::size_t u = 0; u < plan.size(); ++u) {
    const double* row = ws.unit_scores.data() + u * n;
    std::size_t avail = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (detail::present(row[k])) ++avail;
    if (avail < 2) continue;  // nobody to compare against on this unit
    const double weight = static_cast<double>(plan[u].multiplicity);
    const double opponents = static_cast<double>(avail - 1);
    for (std::size_t k = 0; k < n; ++k) {
      if (!detail::present(row[k])) continue;
      double wins = 0.0;
      for (std::size_t o = 0; o < n; ++o) {
        if (o == k || !detail::present(row[o])) continue;
        if (row[k] > row[o])
          wins += 1.0;
        else if (row[k] == row[o])
          wins += tie_credit;
      }
      const double rate = wins / opponents;
      ws.wr_sum[k] += weight * rate;
      ws.wr_cnt[k] += weight;
      if (unit_rates) (*unit_rates)[k][u] = rate;
    }
  }

  ws.mwr.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (ws.wr_cnt[k] == 0.0)
      fail(Errc::NoCommonScenario,
           "model '" + data.model(models[k]) +
               "' shares no scenario with any opponent");
    ws.mwr[k] = ws.wr_sum[k] / ws.wr_cnt[k];
  }

  ws.order.resize(n);
  std::iota(ws.order.begin(), ws.order.end(), 0);
  std::sort(ws.order.begin(), ws.order.end(), [&](int a, int b) {
    const double va = ws.mwr[static_cast<std::size_t>(a)];
    const double vb = ws.mwr[static_cast<std::size_t>(b)];
    if (va != vb) return va > vb;
    return data.model(models[static_cast<std::size_t>(a)]) <
           data.model(models[static_cast<std::size_t>(b)]);
  });
}

/// MWR of one column of a precomputed unit-score matrix with the opponent
/// field restricted to `subset` (removing models changes everyone's MWR, so
/// reduced-benchmark questions cannot reuse full-set values). NaN when the
/// target shares no unit with any subset opponent.
inline double mwr_within_subset(const double* unit_scores, std::size_t n_total,
                                const Plan& plan, std::span<const int> subset,
                                int target, TiePolicy ties) {
  const double tie_credit = ties == TiePolicy::half ? 0.5 : 0.0;
  double wr_sum = 0.0, wr_cnt = 0.0;
  for (std::size_t u = 0; u < plan.size(); ++u) {
    const double* row = unit_scores + u * n_total;
    const double mine = row[static_cast<std::size_t>(target)];
    if (!detail::present(mine)) continue;
    double wins = 0.0, opponents = 0.0;
    for (int o : subset) {
      if (o == target) continue;
      const double v = row[static_cast<std::size_t>(o)];
      if (!detail::present(v)) continue;
      opponents += 1.0;
      if (mine > v)
        wins += 1.0;
      else if (mine == v)
        wins += tie_credit;
    }
    if (opponents == 0.0) continue;
    const double w = static_cast<double>(plan[u].multiplicity);
    wr_sum += w * (wins / opponents);
    wr_cnt += w;
  }
  return wr_cnt > 0.0 ? wr_sum / wr_cnt : detail::kAbsent;
}

}  // namespace engine

// ---------------------------------------------------------------------------
// Public operations

namespace detail {

inline int require_model(const BenchmarkData& data, const std::string& id) {
  const int m = data.model_index(id);
  if (m < 0) fail(Errc::InvalidArgument, "unknown model '" + id + "'");
  return m;
}

/// Mean of the model's scores over one sub-selection, skipping cells the
/// model does not have. MissingSubmission when nothing remains.
inline double sub_score_for_model(const BenchmarkData& data, int m, int s,
                                  const Selection& sel) {
  const auto& sub = data.sub(s);
  if (!sub.model_present[static_cast<std::size_t>(m)])
    fail(Errc::MissingSubmission,
         "model '" + data.model(m) + "' has no records for '" + sub.id + "'");
  const Selection::SubSelection* entry = sel.find(s);
  if (!entry || (entry->kind != Selection::Kind::full &&
                 entry->total_multiplicity() == 0))
    fail(Errc::EmptySelection, "selection for '" + sub.id + "' is empty");
  const int models[1] = {m};
  double out = 0.0;
  engine::score_one_sub(data, *entry, std::span<const int>(models, 1), &out);
  if (!present(out))
    fail(Errc::MissingSubmission,
         "model '" + data.model(m) + "' has no available pairs in '" + sub.id +
             "' under this selection");
  return out;
}

}  // namespace detail

inline double subscenario_score(const BenchmarkData& data,
                                const std::string& model,
                                const std::string& subscenario,
                                const Selection& selection) {
  const int m = detail::require_model(data, model);
  const int s = data.sub_index(subscenario);
  if (s < 0) fail(Errc::InvalidArgument, "unknown subscenario '" + subscenario + "'");
  return detail::sub_score_for_model(data, m, s, selection);
}

inline double scenario_score(const BenchmarkData& data, const std::string& model,
                             const std::string& scenario,
                             const Selection& selection, Grouping grouping) {
  if (grouping == Grouping::by_subscenario)
    return subscenario_score(data, model, scenario, selection);
  const int m = detail::require_model(data, model);
  const int sc = data.scenario_index(scenario);
  if (sc < 0) fail(Errc::InvalidArgument, "unknown scenario '" + scenario + "'");
  double sum = 0.0, weight = 0.0;
  bool any_selected = false;
  for (int s : data.scenario_subs(sc)) {
    const Selection::SubSelection* entry = selection.find(s);
    if (!entry) continue;
    any_selected = true;
    if (!data.sub(s).model_present[static_cast<std::size_t>(m)]) continue;
    const int models[1] = {m};
    double v = 0.0;
    engine::score_one_sub(data, *entry, std::span<const int>(models, 1), &v);
    if (detail::present(v)) {
      sum += static_cast<double>(entry->weight) * v;
      weight += static_cast<double>(entry->weight);
    }
  }
  if (!any_selected)
    fail(Errc::EmptySelection, "no subscenario of '" + scenario + "' is selected");
  if (weight == 0.0)
    fail(Errc::MissingSubmission, "model '" + model +
                                      "' has no available subscenario in '" +
                                      scenario + "'");
  return sum / weight;
}

/// MWR over the given models (all models when empty). A model absent from a
/// unit is excluded both as a contestant and as an opponent there.
inline ScoreTable mean_win_rate(const BenchmarkData& data,
                                const std::vector<std::string>& models,
                                Grouping grouping, const Selection& selection,
                                TiePolicy ties, bool with_unit_rates = false) {
  std::vector<int> idx;
  if (models.empty()) {
    idx.resize(static_cast<std::size_t>(data.n_models()));
    std::iota(idx.begin(), idx.end(), 0);
  } else {
    for (const auto& id : models) idx.push_back(detail::require_model(data, id));
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  }
  if (idx.size() < 2) fail(Errc::TooFewModels, "need at least 2 models");

  const engine::Plan plan = engine::build_plan(data, grouping, selection);
  engine::Workspace ws;
  std::vector<std::vector<double>> unit_rates;
  engine::evaluate(data, idx, plan, selection, ties, ws,
                   with_unit_rates ? &unit_rates : nullptr);

  ScoreTable table;
  table.grouping = grouping;
  table.ties = ties;
  table.selection_desc = selection.description;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    table.models.push_back(data.model(idx[k]));
    table.values.push_back(ws.mwr[k]);
  }
  if (with_unit_rates) {
    for (const auto& unit : plan) table.unit_labels.push_back(unit.label);
    table.unit_win_rates = std::move(unit_rates);
  }
  return table;
}

/// Models sorted by MWR descending; exact ties broken by ascending id.
inline Ranking ranking(const ScoreTable& table) {
  if (table.models.empty()) fail(Errc::InvalidArgument, "empty score table");
  std::vector<int> order(table.models.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&table](int a, int b) {
    const double va = table.values[static_cast<std::size_t>(a)];
    const double vb = table.values[static_cast<std::size_t>(b)];
    if (va != vb) return va > vb;
    return table.models[static_cast<std::size_t>(a)] < table.models[static_cast<std::size_t>(b)];
  });
  Ranking r;
  for (std::size_t i = 0; i < order.size(); ++i) {
    r.order.push_back(table.models[static_cast<std::size_t>(order[i])]);
    r.scores.push_back(table.values[static_cast<std::size_t>(order[i])]);
    if (i > 0 && r.scores[i] == r.scores[i - 1]) r.tie_break_used = true;
  }
  return r;
}

}  // namespace benchrel
