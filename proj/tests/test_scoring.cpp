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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "benchrel/data.hpp"
#include "benchrel/scoring.hpp"
#include "benchrel/synth.hpp"
#include "oracles.hpp"

using namespace benchrel;
using Catch::Matchers::WithinAbs;

namespace {

BenchmarkData load_csv(const std::string& text) {
  std::istringstream in(text);
  return load_results(in, FileFormat::delimited);
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::InvalidArgument;
}

}  // namespace

TEST_CASE("subscenario score is the multiplicity-weighted mean") {
  const std::string text =
      "model,scenario,subscenario,prompt_id,example_id,score\n"
      "A,S,s1,p1,e1,0.2\n"
      "A,S,s1,p1,e2,0.4\n"
      "A,S,s1,p1,e3,0.9\n"
      "B,S,s1,p1,e1,1\n"
      "B,S,s1,p1,e2,1\n"
      "B,S,s1,p1,e3,1\n";
  const BenchmarkData data = load_csv(text);
  const Selection full = Selection::full(data);

  CHECK(subscenario_score(data, "B", "s1", full) == 1.0);
  CHECK_THAT(subscenario_score(data, "A", "s1", full), WithinAbs(0.5, 1e-12));

  // Multiplicity counts: e1 twice, e3 once -> (0.2 + 0.2 + 0.9) / 3.
  Selection weighted;
  weighted.subs.resize(1);
  weighted.subs[0].sub = 0;
  weighted.subs[0].kind = Selection::Kind::examples;
  weighted.subs[0].example_counts = {{0, 2}, {2, 1}};
  CHECK_THAT(subscenario_score(data, "A", "s1", weighted),
             WithinAbs((0.2 + 0.2 + 0.9) / 3.0, 1e-12));
}

TEST_CASE("selection pairs absent for a model are skipped") {
  const std::string text =
      "model,scenario,subscenario,prompt_id,example_id,score\n"
      "A,S,s1,p1,e1,0.4\n"
      "A,S,s1,p1,e2,0.8\n"
      "B,S,s1,p1,e2,0.6\n";
  const BenchmarkData data = load_csv(text);
  Selection sel;
  sel.subs.resize(1);
  sel.subs[0].sub = 0;
  sel.subs[0].kind = Selection::Kind::examples;
  sel.subs[0].example_counts = {{0, 1}, {1, 1}};  // e1 absent for B

  CHECK_THAT(subscenario_score(data, "A", "s1", sel), WithinAbs(0.6, 1e-12));
  CHECK_THAT(subscenario_score(data, "B", "s1", sel), WithinAbs(0.6, 1e-12));

  Selection only_e1;
  only_e1.subs.resize(1);
  only_e1.subs[0].sub = 0;
  only_e1.subs[0].kind = Selection::Kind::examples;
  only_e1.subs[0].example_counts = {{0, 1}};
  CHECK(code_of([&] { subscenario_score(data, "B", "s1", only_e1); }) ==
        Errc::MissingSubmission);

  Selection empty;
  empty.subs.resize(1);
  empty.subs[0].sub = 0;
  empty.subs[0].kind = Selection::Kind::examples;
  CHECK(code_of([&] { subscenario_score(data, "A", "s1", empty); }) ==
        Errc::EmptySelection);
}

TEST_CASE("scenario score averages subscenarios, honoring multiplicity") {
  const std::string text =
      "model,scenario,subscenario,prompt_id,example_id,score\n"
      "A,S,s1,p1,e1,1\n"
      "A,S,s2,p1,e1,0\n"
      "A,T,t1,p1,e1,0.4\n"
      "B,S,s1,p1,e1,0\n"
      "B,S,s2,p1,e1,0\n"
      "B,T,t1,p1,e1,0.2\n";
  const BenchmarkData data = load_csv(text);
  const Selection full = Selection::full(data);
  CHECK(scenario_score(data, "A", "S", full, Grouping::by_scenario) == 0.5);
  // Single-subscenario scenario reduces to the subscenario score.
  CHECK(scenario_score(data, "A", "T", full, Grouping::by_scenario) ==
        subscenario_score(data, "A", "t1", full));
  // Under by_subscenario the "scenario" is the subscenario itself.
  CHECK(scenario_score(data, "A", "s2", full, Grouping::by_subscenario) == 0.0);

  // Bootstrapped subscenario multiset {s1, s1, s2} with scores {0.9, 0.9, 0.3}.
  const std::string multi =
      "model,scenario,subscenario,prompt_id,example_id,score\n"
      "A,S,s1,p1,e1,0.9\n"
      "A,S,s2,p1,e1,0.3\n"
      "B,S,s1,p1,e1,0.1\n"
      "B,S,s2,p1,e1,0.1\n";
  const BenchmarkData data2 = load_csv(multi);
  Selection weighted = Selection::full(data2);
  weighted.subs[0].weight = 2;  // s1 picked twice
  CHECK_THAT(scenario_score(data2, "A", "S", weighted, Grouping::by_scenario),
             WithinAbs(0.7, 1e-12));
}

TEST_CASE("missing submissions raise the right errors") {
  const std::string text =
      "model,scenario,subscenario,prompt_id,example_id,score\n"
      "A,S,s1,p1,e1,1\n"
      "B,T,t1,p1,e1,1\n";
  const BenchmarkData data = load_csv(text);
  const Selection full = Selection::full(data);
  CHECK(code_of([&] { subscenario_score(data, "B", "s1", full); }) ==
        Errc::MissingSubmission);
  CHECK(code_of([&] { scenario_score(data, "B", "S", full, Grouping::by_scenario); }) ==
        Errc::MissingSubmission);
  // No unit shared with an opponent.
  CHECK(code_of([&] {
          mean_win_rate(data, {}, Grouping::by_scenario, full, TiePolicy::strict);
        }) == Errc::NoCommonScenario);
}

TEST_CASE("the add-model construction reproduces its exact win rates") {
  const AppendixCase c = appendix_case("add_model");
  const Selection full = Selection::full(c.data);

  const ScoreTable pair = mean_win_rate(c.data, {"A", "B"}, Grouping::by_scenario,
                                        full, TiePolicy::strict, true);
  CHECK(pair.at("A") == 1.0 / 3.0);
  CHECK(pair.at("B") == 2.0 / 3.0);

  const ScoreTable trio = mean_win_rate(c.data, {"A", "B", "C"},
                                        Grouping::by_scenario, full,
                                        TiePolicy::strict, true);
  CHECK(trio.at("A") == 2.0 / 3.0);
  CHECK(trio.at("B") == 2.0 / 3.0);
  CHECK(trio.at("C") == 0.5 / 3.0);
  // Per-scenario win rates of A and B become 0.5, 0.5, 1 and 1, 1, 0.
  CHECK(trio.unit_win_rates[0] == std::vector<double>{0.5, 0.5, 1.0});
  CHECK(trio.unit_win_rates[1] == std::vector<double>{1.0, 1.0, 0.0});
}

TEST_CASE("identical models split by tie policy") {
  const std::string text =
      "model,scenario,subscenario,prompt_id,example_id,score\n"
      "A,S,s1,p1,e1,0.5\n"
      "A,T,t1,p1,e1,0.7\n"
      "B,S,s1,p1,e1,0.5\n"
      "B,T,t1,p1,e1,0.7\n";
  const BenchmarkData data = load_csv(text);
  const Selection full = Selection::full(data);
  const ScoreTable strict =
      mean_win_rate(data, {}, Grouping::by_scenario, full, TiePolicy::strict);
  CHECK(strict.at("A") == 0.0);
  CHECK(strict.at("B") == 0.0);
  const ScoreTable half =
      mean_win_rate(data, {}, Grouping::by_scenario, full, TiePolicy::half);
  CHECK(half.at("A") == 0.5);
  CHECK(half.at("B") == 0.5);
}

TEST_CASE("too few models is an error") {
  const std::string text =
      "model,scenario,subscenario,prompt_id,example_id,score\n"
      "A,S,s1,p1,e1,1\n";
  const BenchmarkData data = load_csv(text);
  CHECK(code_of([&] {
          mean_win_rate(data, {}, Grouping::by_scenario, Selection::full(data),
                        TiePolicy::strict);
        }) == Errc::TooFewModels);
}

TEST_CASE("ranking sorts by value with lexicographic tie-break") {
  ScoreTable table;
  table.models = {"A", "B", "C"};
  table.values = {0.1, 0.5, 0.9};
  const Ranking r = ranking(table);
  CHECK(r.order == std::vector<std::string>{"C", "B", "A"});
  CHECK_FALSE(r.tie_break_used);

  ScoreTable tied;
  tied.models = {"A", "B"};
  tied.values = {0.5, 0.5};
  const Ranking rt = ranking(tied);
  CHECK(rt.order == std::vector<std::string>{"A", "B"});
  CHECK(rt.tie_break_used);
}

TEST_CASE("ranking agrees with an independent sort") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    ScoreTable table;
    for (int i = 0; i < 10; ++i) {
      table.models.push_back("m" + std::to_string(i));
      table.values.push_back(static_cast<double>(rng.below(8)) / 8.0);
    }
    const Ranking r = ranking(table);
    // Reference: stable pair sort.
    std::vector<std::pair<double, std::string>> ref;
    for (std::size_t i = 0; i < table.models.size(); ++i)
      ref.emplace_back(-table.values[i], table.models[i]);
    std::sort(ref.begin(), ref.end());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(r.order[i] == ref[i].second);
  }
}

TEST_CASE("mean win rate matches brute-force enumeration on random instances") {
  Rng rng(31);
  for (int trial = 0; trial < 150; ++trial) {
    const oracle::RandomInstance inst = oracle::random_instance(rng);
    const TiePolicy ties = trial % 2 ? TiePolicy::half : TiePolicy::strict;
    const Grouping grouping =
        trial % 3 ? Grouping::by_scenario : Grouping::by_subscenario;
    const ScoreTable table = mean_win_rate(inst.data, {}, grouping,
                                           Selection::full(inst.data), ties);
    const auto expected = oracle::mwr(inst.records, inst.models, grouping, ties);
    for (std::size_t i = 0; i < table.models.size(); ++i)
      CHECK(table.values[i] == expected.at(table.models[i]));
  }
}

TEST_CASE("mwr values stay in the unit interval and two-model tables are complementary") {
  Rng rng(41);
  for (int trial = 0; trial < 40; ++trial) {
    const oracle::RandomInstance inst = oracle::random_instance(rng);
    const ScoreTable table =
        mean_win_rate(inst.data, {}, Grouping::by_scenario,
                      Selection::full(inst.data), TiePolicy::strict);
    for (double v : table.values) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }

  // Continuous scores so exact ties cannot occur.
  SynthSpec spec;
  spec.n_models = 2;
  spec.subs_per_scenario = {1, 1, 1};
  spec.examples_per_sub = 5;
  spec.prompts_per_sub = 2;
  spec.noise_sd = 0.2;
  spec.seed = 5;
  const BenchmarkData data = generate(spec);
  const ScoreTable table = mean_win_rate(data, {}, Grouping::by_scenario,
                                         Selection::full(data), TiePolicy::strict);
  CHECK(table.values[0] + table.values[1] == 1.0);
}

TEST_CASE("adding a model never flips a pairwise comparison") {
  Rng rng(51);
  for (int trial = 0; trial < 30; ++trial) {
    const oracle::RandomInstance inst = oracle::random_instance(rng);
    if (inst.models.size() < 3) continue;
    const std::vector<std::string> pair{inst.models[0], inst.models[1]};
    const ScoreTable before = mean_win_rate(inst.data, pair, Grouping::by_scenario,
                                            Selection::full(inst.data),
                                            TiePolicy::strict, true);
    const ScoreTable after = mean_win_rate(inst.data, {}, Grouping::by_scenario,
                                           Selection::full(inst.data),
                                           TiePolicy::strict, true);
    // In the two-model table the win rate *is* the pairwise indicator. Check
    // it against the sign of the unit score difference in the full table.
    for (std::size_t u = 0; u < before.unit_labels.size(); ++u) {
      const double indicator = before.unit_win_rates[0][u];
      if (std::isnan(indicator)) continue;
      const double a = scenario_score(inst.data, inst.models[0], before.unit_labels[u],
                                      Selection::full(inst.data), Grouping::by_scenario);
      const double b = scenario_score(inst.data, inst.models[1], before.unit_labels[u],
                                      Selection::full(inst.data), Grouping::by_scenario);
      CHECK(indicator == (a > b ? 1.0 : 0.0));
    }
    (void)after;
  }
}

TEST_CASE("monotone per-subscenario transforms preserve standalone rankings") {
  // Single-cell subscenarios so the record value IS the subscenario score;
  // the invariance concerns the aggregated score a subscenario assigns.
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const int n_models = 3 + static_cast<int>(rng.below(3));
    const int n_subs = 4 + static_cast<int>(rng.below(5));
    std::vector<ScoreRecord> records;
    for (int s = 0; s < n_subs; ++s) {
      for (int m = 0; m < n_models; ++m) {
        ScoreRecord r;
        r.model = std::string("m") + static_cast<char>('A' + m);
        r.scenario = "d" + std::to_string(s + 1);
        r.subscenario = "d" + std::to_string(s + 1) + "x";
        r.prompt_id = "p1";
        r.example_id = "e1";
        r.score = static_cast<double>(rng.below(9)) / 8.0;
        records.push_back(r);
      }
    }
    auto build = [](const std::vector<ScoreRecord>& recs) {
      DatasetDraft draft;
      for (const auto& r : recs) {
        const int m = draft.intern_model(r.model);
        const int s = draft.intern_sub(r.scenario, r.subscenario);
        draft.add(m, s, draft.intern_example(s, r.example_id),
                  draft.intern_prompt(s, r.prompt_id), r.score);
      }
      return std::move(draft).finalize();
    };
    const BenchmarkData data1 = build(records);

    // Strictly increasing transform of one subscenario's scores.
    const std::string target = records[0].subscenario;
    std::vector<ScoreRecord> transformed = records;
    for (auto& r : transformed)
      if (r.subscenario == target)
        r.score = r.score * r.score * r.score + 2.0 * r.score;
    const BenchmarkData data2 = build(transformed);

    const Ranking r1 = ranking(mean_win_rate(data1, {}, Grouping::by_subscenario,
                                             Selection::full(data1),
                                             TiePolicy::strict));
    const Ranking r2 = ranking(mean_win_rate(data2, {}, Grouping::by_subscenario,
                                             Selection::full(data2),
                                             TiePolicy::strict));
    CHECK(r1.order == r2.order);
  }
}
