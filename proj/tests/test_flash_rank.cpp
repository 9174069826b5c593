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

#include "benchrel/flash_rank.hpp"
#include "benchrel/synth.hpp"

using namespace benchrel;

namespace {

/// Splits one model out of a generated dataset: (reference without it, the
/// model's own single-model dataset).
std::pair<BenchmarkData, BenchmarkData> split_off(const BenchmarkData& all,
                                                  const std::string& model) {
  DatasetDraft ref, solo;
  for_each_record(all, [&](const std::string& m, const std::string& sc,
                           const std::string& sub, const std::string& p,
                           const std::string& e, double score) {
    DatasetDraft& draft = (m == model) ? solo : ref;
    const int mi = draft.intern_model(m);
    const int si = draft.intern_sub(sc, sub);
    draft.add(mi, si, draft.intern_example(si, e), draft.intern_prompt(si, p),
              score);
  });
  return {std::move(ref).finalize(), std::move(solo).finalize()};
}

/// Latents descending in even steps; model `insert_at` (0-based, in latent
/// order) gets a latent nudged between its neighbors.
SynthSpec tournament_spec(int n_models, double noise, std::uint64_t seed) {
  SynthSpec spec;
  spec.n_models = n_models;
  spec.subs_per_scenario = {1, 2, 1, 2};
  spec.examples_per_sub = 60;
  spec.prompts_per_sub = 2;
  spec.noise_sd = noise;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("tier configuration validates and maps resolutions to thresholds") {
  const TierConfig tiers = TierConfig::defaults();
  tiers.validate();
  CHECK(tiers.stop_threshold(0) == 1);
  CHECK(tiers.stop_threshold(1) == 2);
  CHECK(tiers.stop_threshold(2) == 5);
  CHECK(tiers.stop_threshold(3) == 10);
  CHECK(tiers.stop_threshold(4) == 20);
  CHECK(tiers.stop_threshold(5) == 0);  // nothing tolerates +-5

  CHECK(tiers.label_for_rank(1) == "1");
  CHECK(tiers.label_for_rank(3) == "2-4");
  CHECK(tiers.label_for_rank(12) == "10-19");
  CHECK(tiers.label_for_rank(57) == "20+");

  TierConfig gap{{{1, 1, 0}, {3, 5, 1}, {6, -1, 2}}};
  CHECK_THROWS_AS(gap.validate(), Error);
  TierConfig closed{{{1, 4, 1}}};
  CHECK_THROWS_AS(closed.validate(), Error);
  TierConfig tightening{{{1, 1, 2}, {2, -1, 1}}};
  CHECK_THROWS_AS(tightening.validate(), Error);
}

TEST_CASE("a noiseless reference calibrates to perfect resolution") {
  SynthSpec spec = tournament_spec(8, 0.0, 41);
  spec.examples_per_sub = 20;
  const BenchmarkData data = generate(spec);
  const ResolutionTable table =
      calibrate_resolution(data, {5, 10, kOriginalSize}, TierConfig::defaults(),
                           150, 0.95, 7);
  REQUIRE(table.entries.size() == 3);
  for (const auto& e : table.entries) {
    CHECK(e.res == 0);
    CHECK(e.tier_rank == 1);
  }
  CHECK(table.entries.back().size == kOriginalSize);
}

TEST_CASE("calibrated resolution never worsens with more data") {
  const BenchmarkData data = generate(tournament_spec(12, 0.3, 42));
  const ResolutionTable table = calibrate_resolution(
      data, {4, 12, 40, kOriginalSize}, TierConfig::defaults(), 200, 0.95, 8);
  REQUIRE(table.entries.size() == 4);
  for (std::size_t i = 1; i < table.entries.size(); ++i)
    CHECK(table.entries[i].res <= table.entries[i - 1].res);
  // Subsampling everything reproduces the full ranking exactly.
  CHECK(table.entries.back().res == 0);
  // Thresholds stay consistent with the tier config.
  for (const auto& e : table.entries)
    CHECK(e.tier_rank == TierConfig::defaults().stop_threshold(e.res));
  // The per-tier pooling variant is at least as conservative.
  const ResolutionTable worst = calibrate_resolution(
      data, {4, 12, 40, kOriginalSize}, TierConfig::defaults(), 200, 0.95, 8,
      Grouping::by_scenario, TiePolicy::strict, 1, true);
  for (std::size_t i = 0; i < table.entries.size(); ++i)
    CHECK(worst.entries[i].res >= table.entries[i].res);
}

TEST_CASE("calibration needs enough models") {
  SynthSpec spec = tournament_spec(2, 0.1, 43);
  const BenchmarkData data = generate(spec);
  CHECK_THROWS_MATCHES(
      calibrate_resolution(data, {5, kOriginalSize}), Error,
      Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.code() == Errc::InsufficientModels;
      }));
}

TEST_CASE("a dominant new model runs the full schedule and saves nothing") {
  // Close latents keep Res(S) >= 1 below the full size.
  SynthSpec spec = tournament_spec(11, 0.12, 44);
  spec.latent.resize(11);
  for (int m = 0; m < 11; ++m) spec.latent[static_cast<std::size_t>(m)] = 0.60 - 0.015 * m;
  spec.latent[0] = 0.95;  // the future new model dominates every record
  const BenchmarkData all = generate(spec);
  const auto [reference, solo] = split_off(all, "m01");

  const ResolutionTable table = calibrate_resolution(
      reference, {10, 25, kOriginalSize}, TierConfig::defaults(), 150, 0.95, 9);
  REQUIRE(table.entries.front().res >= 1);

  StoredScoreProvider provider(solo);
  const FlashRankResult r =
      flash_rank(reference, provider, table, TierConfig::defaults(),
                 Grouping::by_scenario, TiePolicy::strict, 10);
  CHECK(r.final_rank == 1);
  CHECK(r.tier_label == "1");
  CHECK(r.stages.size() == table.entries.size());
  for (std::size_t i = 0; i + 1 < r.stages.size(); ++i)
    CHECK_FALSE(r.stages[i].stopped);
  CHECK(r.calls_used == r.full_calls);
  CHECK(r.savings_factor == 1.0);
}

TEST_CASE("a clearly worst model stops at the first stage with large savings") {
  SynthSpec spec = tournament_spec(26, 0.03, 45);
  spec.examples_per_sub = 200;
  spec.latent.resize(26);
  for (int m = 0; m < 26; ++m) spec.latent[static_cast<std::size_t>(m)] = 0.80 - 0.02 * m;
  spec.latent[25] = 0.05;  // hopeless newcomer
  const BenchmarkData all = generate(spec);
  const auto [reference, solo] = split_off(all, "m26");
  REQUIRE(reference.n_models() == 25);

  const ResolutionTable table = calibrate_resolution(
      reference, {20, 60, kOriginalSize}, TierConfig::defaults(), 150, 0.95, 11);
  REQUIRE(table.entries.front().res <= 4);

  StoredScoreProvider provider(solo);
  const FlashRankResult r =
      flash_rank(reference, provider, table, TierConfig::defaults(),
                 Grouping::by_scenario, TiePolicy::strict, 12);
  CHECK(r.stages.size() == 1);
  CHECK(r.stages[0].stopped);
  CHECK(r.final_rank == 26);
  CHECK(r.tier_label == "20+");

  // Cost accounting: exactly the first stage's cells, never a running sum.
  std::uint64_t expected_calls = 0;
  for (int sc = 0; sc < reference.n_scenarios(); ++sc) {
    const auto counts = allocate_scenario_examples(reference, sc, 20, true);
    const auto& subs = reference.scenario_subs(sc);
    for (std::size_t j = 0; j < subs.size(); ++j)
      expected_calls += counts[j] * reference.sub(subs[j]).n_prompts();
  }
  CHECK(r.calls_used == expected_calls);
  CHECK(r.savings_factor ==
        static_cast<double>(r.full_calls) / static_cast<double>(expected_calls));
  CHECK(r.savings_factor > 10.0);
}

TEST_CASE("tournament runs are deterministic in the seed") {
  SynthSpec spec = tournament_spec(9, 0.15, 46);
  const BenchmarkData all = generate(spec);
  const auto [reference, solo] = split_off(all, "m05");
  const ResolutionTable table = calibrate_resolution(
      reference, {10, kOriginalSize}, TierConfig::defaults(), 120, 0.95, 13);
  StoredScoreProvider p1(solo), p2(solo);
  const FlashRankResult a =
      flash_rank(reference, p1, table, TierConfig::defaults(),
                 Grouping::by_scenario, TiePolicy::strict, 14);
  const FlashRankResult b =
      flash_rank(reference, p2, table, TierConfig::defaults(),
                 Grouping::by_scenario, TiePolicy::strict, 14);
  CHECK(a.final_rank == b.final_rank);
  CHECK(a.calls_used == b.calls_used);
  REQUIRE(a.stages.size() == b.stages.size());
  for (std::size_t i = 0; i < a.stages.size(); ++i)
    CHECK(a.stages[i].rank == b.stages[i].rank);
}

TEST_CASE("mismatched schedules, groupings and providers are rejected") {
  SynthSpec spec = tournament_spec(6, 0.1, 47);
  const BenchmarkData all = generate(spec);
  const auto [reference, solo] = split_off(all, "m03");
  const ResolutionTable table = calibrate_resolution(
      reference, {10, kOriginalSize}, TierConfig::defaults(), 120, 0.95, 15);

  StoredScoreProvider provider(solo);
  const std::vector<std::int64_t> bad_schedule{7};
  CHECK_THROWS_MATCHES(
      flash_rank(reference, provider, table, TierConfig::defaults(),
                 Grouping::by_scenario, TiePolicy::strict, 16, &bad_schedule),
      Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.code() == Errc::UncalibratedSize;
      }));

  CHECK_THROWS_AS(flash_rank(reference, provider, table, TierConfig::defaults(),
                             Grouping::by_subscenario, TiePolicy::strict, 16),
                  Error);

  // Table from different data.
  SynthSpec other_spec = tournament_spec(6, 0.1, 48);
  other_spec.examples_per_sub = 30;
  const BenchmarkData other = generate(other_spec);
  const ResolutionTable other_table = calibrate_resolution(
      other, {10, kOriginalSize}, TierConfig::defaults(), 120, 0.95, 15);
  CHECK_THROWS_AS(flash_rank(reference, provider, other_table,
                             TierConfig::defaults(), Grouping::by_scenario,
                             TiePolicy::strict, 16),
                  Error);

  // A model already on the leaderboard cannot be "new".
  StoredScoreProvider dup(split_off(all, "m02").second);
  CHECK_THROWS_AS(flash_rank(all, dup, table, TierConfig::defaults(),
                             Grouping::by_scenario, TiePolicy::strict, 16),
                  Error);

  CHECK_THROWS_AS(StoredScoreProvider(all), Error);
}

TEST_CASE("provider gaps surface as errors") {
  SynthSpec spec = tournament_spec(6, 0.1, 49);
  const BenchmarkData all = generate(spec);
  auto [reference, solo] = split_off(all, "m03");

  // Drop one subscenario from the provider's data.
  DatasetDraft partial;
  const std::string drop = reference.sub(0).id;
  for_each_record(solo, [&](const std::string& m, const std::string& sc,
                            const std::string& sub, const std::string& p,
                            const std::string& e, double score) {
    if (sub == drop) return;
    const int mi = partial.intern_model(m);
    const int si = partial.intern_sub(sc, sub);
    partial.add(mi, si, partial.intern_example(si, e),
                partial.intern_prompt(si, p), score);
  });
  StoredScoreProvider provider(std::move(partial).finalize());
  const ResolutionTable table = calibrate_resolution(
      reference, {10, kOriginalSize}, TierConfig::defaults(), 120, 0.95, 17);
  CHECK_THROWS_MATCHES(
      flash_rank(reference, provider, table, TierConfig::defaults(),
                 Grouping::by_scenario, TiePolicy::strict, 18),
      Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.code() == Errc::ProviderGap;
      }));
}
