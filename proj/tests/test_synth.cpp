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

#include <sstream>

#include "benchrel/resampling.hpp"
#include "benchrel/synth.hpp"

using namespace benchrel;

TEST_CASE("noiseless generation ranks models by latent quality") {
  SynthSpec spec;
  spec.n_models = 6;
  spec.latent = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4};
  spec.subs_per_scenario = {2, 1, 3};
  spec.examples_per_sub = 4;
  spec.prompts_per_sub = 2;
  spec.difficulty = {0.1, -0.1, 0.0, 0.05, -0.05, 0.2};
  spec.seed = 3;
  const BenchmarkData data = generate(spec);
  CHECK(data.n_models() == 6);
  CHECK(data.n_scenarios() == 3);
  CHECK(data.n_subs() == 6);
  CHECK(data.record_count() == 6u * 6u * 4u * 2u);

  const Ranking r = ranking(mean_win_rate(data, {}, Grouping::by_scenario,
                                          Selection::full(data), TiePolicy::strict));
  CHECK(r.order == std::vector<std::string>{"m1", "m2", "m3", "m4", "m5", "m6"});
}

TEST_CASE("generation is a pure function of the spec") {
  SynthSpec spec;
  spec.n_models = 4;
  spec.subs_per_scenario = {2, 2};
  spec.examples_per_sub = 6;
  spec.prompts_per_sub = 3;
  spec.difficulty_sd = 0.05;
  spec.prompt_offset_sd = 0.03;
  spec.noise_sd = 0.1;
  spec.seed = 17;
  CHECK(generate(spec) == generate(spec));

  SynthSpec other = spec;
  other.seed = 18;
  CHECK_FALSE(generate(spec) == generate(other));
}

TEST_CASE("marginal mean score is monotone in latent quality") {
  SynthSpec spec;
  spec.n_models = 5;
  spec.latent = {0.75, 0.65, 0.55, 0.45, 0.35};
  spec.subs_per_scenario = {2, 2};
  spec.examples_per_sub = 300;
  spec.prompts_per_sub = 3;
  spec.noise_sd = 0.05;
  spec.seed = 9;
  const BenchmarkData data = generate(spec);
  double prev = 2.0;
  for (int m = 0; m < data.n_models(); ++m) {
    double sum = 0.0, cnt = 0.0;
    for (int s = 0; s < data.n_subs(); ++s) {
      sum += data.sub(s).model_sum[static_cast<std::size_t>(m)];
      cnt += data.sub(s).model_count[static_cast<std::size_t>(m)];
    }
    const double mean = sum / cnt;
    CHECK(mean < prev);
    prev = mean;
  }
}

TEST_CASE("invalid specs are rejected") {
  auto expect_invalid = [](SynthSpec spec) {
    try {
      generate(spec);
      FAIL("expected InvalidSpec");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::InvalidSpec);
    }
  };
  SynthSpec base;
  base.n_models = 3;
  base.subs_per_scenario = {1};
  base.examples_per_sub = 2;

  SynthSpec s = base;
  s.n_models = 0;
  expect_invalid(s);
  s = base;
  s.subs_per_scenario = {};
  expect_invalid(s);
  s = base;
  s.noise_sd = -1.0;
  expect_invalid(s);
  s = base;
  s.latent = {0.5};
  expect_invalid(s);
  s = base;
  s.squash_lo = 2.0;
  s.squash_hi = 1.0;
  expect_invalid(s);
}

TEST_CASE("every worked sensitivity case validates exactly") {
  for (const char* name : {"add_model", "combine_datasets", "partial_report"}) {
    const AppendixCase c = appendix_case(name);
    for (const auto& variant : c.variants) {
      const BenchmarkData& data = variant.use_alt_data ? *c.alt_data : c.data;
      const ScoreTable table =
          mean_win_rate(data, variant.models, variant.grouping,
                        Selection::full(data), TiePolicy::strict);
      for (const auto& [model, expected] : variant.expected_mwr)
        CHECK(table.at(model) == expected);  // equality, no tolerance
    }
  }
  CHECK_THROWS_AS(appendix_case("nope"), Error);
}

TEST_CASE("spec files parse with defaults and fail loudly") {
  std::istringstream good(
      "# layout\n"
      "models = 4\n"
      "scenarios = 3\n"
      "subs_per_scenario = 2\n"
      "examples_per_subscenario = 10\n"
      "prompts_per_subscenario = 3\n"
      "noise_sd = 0.1\n"
      "latents = 0.8, 0.7, 0.6, 0.5\n"
      "seed = 42\n");
  const SynthSpec spec = parse_synth_config(good);
  CHECK(spec.n_models == 4);
  CHECK(spec.subs_per_scenario == std::vector<int>{2, 2, 2});
  CHECK(spec.latent == std::vector<double>{0.8, 0.7, 0.6, 0.5});
  CHECK(spec.seed == 42);
  CHECK(generate(spec).n_subs() == 6);

  auto expect_invalid = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_synth_config(in);
      FAIL("expected InvalidSpec");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::InvalidSpec);
    }
  };
  expect_invalid("nonsense_key = 3\n");
  expect_invalid("models\n");
  expect_invalid("models = many\n");
  expect_invalid("subs_per_scenario = 2\n");  // needs 'scenarios'
}

TEST_CASE("doubling record noise lowers full-ranking stability") {
  auto dior_at = [](double noise) {
    SynthSpec spec;
    spec.n_models = 8;
    spec.subs_per_scenario = {1, 1, 1, 1};
    spec.examples_per_sub = 40;
    spec.prompts_per_sub = 2;
    spec.noise_sd = noise;
    spec.seed = 23;
    const BenchmarkData data = generate(spec);
    ResampleOptions opt;
    opt.axis = Axis::examples;
    opt.size = kOriginalSize;
    opt.B = 300;
    opt.seed = 99;
    return dior(data, ObjectiveKind::full_ranking_kendall, opt).lower_bound;
  };
  const double tight = dior_at(0.05);
  const double loose = dior_at(0.10);
  CHECK(loose <= tight + 0.02);  // CI tolerance
  CHECK(loose < tight);
}
