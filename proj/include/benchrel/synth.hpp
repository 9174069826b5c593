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
#include <istream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "benchrel/data.hpp"
#include "benchrel/error.hpp"
#include "benchrel/rng.hpp"
#include "benchrel/scoring.hpp"

namespace benchrel {

/// Additive generative family for synthetic benchmarks:
///
///   raw(m, s, e, p) = latent(m) + difficulty(s) + prompt_offset(m, s, p)
///                     + noise_sd * noise_scale(s) * N(0, 1)
///
/// squashed affinely into [0, 1]. Prompt offsets are drawn per (model,
/// subscenario, prompt): an offset shared by all models would cancel in
/// every pairwise comparison and could never affect a ranking. Model
/// separation, prompt variability and per-subscenario noise are therefore
/// independently controllable.
struct SynthSpec {
  int n_models = 0;
  std::vector<double> latent;          // per model; empty = even spacing
  std::vector<int> subs_per_scenario;  // layout, one entry per scenario
  int examples_per_sub = 0;
  int prompts_per_sub = 1;
  std::vector<double> difficulty;      // per sub; empty = drawn
  double difficulty_sd = 0.0;
  double prompt_offset_sd = 0.0;
  double noise_sd = 0.0;
  std::vector<double> noise_scale;     // per sub; empty = all 1
  double squash_lo = -0.5;
  double squash_hi = 1.5;
  std::uint64_t seed = 1;
};

namespace detail {

inline std::string padded(const char* prefix, int value, int width) {
  std::string digits = std::to_string(value);
  std::string out(prefix);
  for (int i = static_cast<int>(digits.size()); i < width; ++i) out += '0';
  return out + digits;
}

inline int digits_for(int count) {
  int width = 1;
  while (count >= 10) {
    count /= 10;
    ++width;
  }
  return width;
}

constexpr std::uint64_t kStreamDifficulty = 0xd1f1;
constexpr std::uint64_t kStreamPrompt = 0x9307;
constexpr std::uint64_t kStreamNoise = 0x4015;

}  // namespace detail

inline void validate_spec(const SynthSpec& spec) {
  auto bad = [](const std::string& msg) { fail(Errc::InvalidSpec, msg); };
  if (spec.n_models < 1) bad("need at least one model");
  if (!spec.latent.empty() &&
      spec.latent.size() != static_cast<std::size_t>(spec.n_models))
    bad("latent list must match the model count");
  if (spec.subs_per_scenario.empty()) bad("layout is empty");
  for (int k : spec.subs_per_scenario)
    if (k < 1) bad("every scenario needs at least one subscenario");
  if (spec.examples_per_sub < 1) bad("need at least one example");
  if (spec.prompts_per_sub < 1) bad("need at least one prompt");
  const std::size_t total_subs = static_cast<std::size_t>(std::accumulate(
      spec.subs_per_scenario.begin(), spec.subs_per_scenario.end(), 0));
  if (!spec.difficulty.empty() && spec.difficulty.size() != total_subs)
    bad("difficulty list must match the subscenario count");
  if (!spec.noise_scale.empty() && spec.noise_scale.size() != total_subs)
    bad("noise_scale list must match the subscenario count");
  if (spec.difficulty_sd < 0 || spec.prompt_offset_sd < 0 || spec.noise_sd < 0)
    bad("standard deviations must be non-negative");
  for (double s : spec.noise_scale)
    if (s < 0) bad("noise_scale entries must be non-negative");
  if (!(spec.squash_hi > spec.squash_lo)) bad("squash bounds must be ordered");
}

/// Deterministic in the spec (including the seed): every random component
/// draws from its own derived stream, so the result does not depend on
/// generation order.
inline BenchmarkData generate(const SynthSpec& spec) {
  validate_spec(spec);
  const int n_scenarios = static_cast<int>(spec.subs_per_scenario.size());
  const int total_subs = std::accumulate(spec.subs_per_scenario.begin(),
                                         spec.subs_per_scenario.end(), 0);

  std::vector<double> latent = spec.latent;
  if (latent.empty()) {
    latent.resize(static_cast<std::size_t>(spec.n_models));
    for (int m = 0; m < spec.n_models; ++m)
      latent[static_cast<std::size_t>(m)] =
          spec.n_models == 1
              ? 0.5
              : 0.75 - 0.5 * static_cast<double>(m) /
                           static_cast<double>(spec.n_models - 1);
  }

  std::vector<double> difficulty = spec.difficulty;
  if (difficulty.empty()) {
    difficulty.resize(static_cast<std::size_t>(total_subs));
    for (int s = 0; s < total_subs; ++s) {
      Rng rng(spec.seed, {detail::kStreamDifficulty, static_cast<std::uint64_t>(s)});
      difficulty[static_cast<std::size_t>(s)] = spec.difficulty_sd * rng.normal();
    }
  }

  const int model_width = detail::digits_for(spec.n_models);
  const int scen_width = detail::digits_for(n_scenarios);
  const int sub_width = detail::digits_for(
      *std::max_element(spec.subs_per_scenario.begin(), spec.subs_per_scenario.end()));
  const int ex_width = detail::digits_for(spec.examples_per_sub);

  DatasetDraft draft;
  std::vector<int> model_handle(static_cast<std::size_t>(spec.n_models));
  for (int m = 0; m < spec.n_models; ++m)
    model_handle[static_cast<std::size_t>(m)] =
        draft.intern_model(detail::padded("m", m + 1, model_width));

  const double span = spec.squash_hi - spec.squash_lo;
  int sub_serial = 0;
  for (int sc = 0; sc < n_scenarios; ++sc) {
    const std::string scenario_id = detail::padded("g", sc + 1, scen_width);
    for (int j = 0; j < spec.subs_per_scenario[static_cast<std::size_t>(sc)]; ++j, ++sub_serial) {
      const std::string sub_id =
          scenario_id + detail::padded("s", j + 1, sub_width);
      const int sub = draft.intern_sub(scenario_id, sub_id);
      std::vector<int> example_handle(static_cast<std::size_t>(spec.examples_per_sub));
      for (int e = 0; e < spec.examples_per_sub; ++e)
        example_handle[static_cast<std::size_t>(e)] =
            draft.intern_example(sub, detail::padded("e", e + 1, ex_width));
      std::vector<int> prompt_handle(static_cast<std::size_t>(spec.prompts_per_sub));
      for (int p = 0; p < spec.prompts_per_sub; ++p)
        prompt_handle[static_cast<std::size_t>(p)] =
            draft.intern_prompt(sub, detail::padded("p", p + 1, 1));

      const double noise_sd =
          spec.noise_sd * (spec.noise_scale.empty()
                               ? 1.0
                               : spec.noise_scale[static_cast<std::size_t>(sub_serial)]);
      for (int m = 0; m < spec.n_models; ++m) {
        Rng prompt_rng(spec.seed, {detail::kStreamPrompt,
                                   static_cast<std::uint64_t>(sub_serial),
                                   static_cast<std::uint64_t>(m)});
        std::vector<double> offset(static_cast<std::size_t>(spec.prompts_per_sub));
        for (int p = 0; p < spec.prompts_per_sub; ++p)
          offset[static_cast<std::size_t>(p)] =
              spec.prompt_offset_sd * prompt_rng.normal();

        Rng noise_rng(spec.seed, {detail::kStreamNoise,
                                  static_cast<std::uint64_t>(sub_serial),
                                  static_cast<std::uint64_t>(m)});
        const double base = latent[static_cast<std::size_t>(m)] +
                            difficulty[static_cast<std::size_t>(sub_serial)];
        for (int e = 0; e < spec.examples_per_sub; ++e) {
          for (int p = 0; p < spec.prompts_per_sub; ++p) {
            const double raw = base + offset[static_cast<std::size_t>(p)] +
                               noise_sd * noise_rng.normal();
            const double squashed =
                std::clamp((raw - spec.squash_lo) / span, 0.0, 1.0);
            draft.add(model_handle[static_cast<std::size_t>(m)], sub,
                      example_handle[static_cast<std::size_t>(e)],
                      prompt_handle[static_cast<std::size_t>(p)], squashed);
          }
        }
      }
    }
  }
  return std::move(draft).finalize();
}

// ---------------------------------------------------------------------------
// Worked sensitivity constructions. Each case carries the dataset(s) plus
// the exact MWR values it must produce; tests assert equality, no tolerance.

struct AppendixCase {
  struct Variant {
    std::string label;
    bool use_alt_data = false;
    std::vector<std::string> models;  // empty = all
    Grouping grouping = Grouping::by_scenario;
    std::vector<std::pair<std::string, double>> expected_mwr;
    // Optional pinned per-unit win rates (unit order = sorted unit labels).
    std::vector<std::pair<std::string, std::vector<double>>> expected_unit_rates;
  };

  std::string name;
  BenchmarkData data;
  std::optional<BenchmarkData> alt_data;
  std::vector<Variant> variants;
};

namespace detail {

inline void add_single_cell_sub(DatasetDraft& draft, const std::string& scenario,
                                const std::string& sub_id,
                                const std::vector<std::pair<std::string, double>>& scores) {
  const int sub = draft.intern_sub(scenario, sub_id);
  const int e = draft.intern_example(sub, "e1");
  const int p = draft.intern_prompt(sub, "p1");
  for (const auto& [model, score] : scores)
    draft.add(draft.intern_model(model), sub, e, p, score);
}

}  // namespace detail

/// Cases: add_model (a strictly worse newcomer ties the two leaders),
/// combine_datasets (grouping two of four datasets flips a 50/50 split),
/// partial_report (omitting a losing scenario turns 0.6 into 0.9).
inline AppendixCase appendix_case(const std::string& name) {
  AppendixCase out;
  out.name = name;

  if (name == "add_model") {
    DatasetDraft draft;
    detail::add_single_cell_sub(draft, "sc1", "sc1a",
                                {{"A", 10.0}, {"B", 12.0}, {"C", 9.0}});
    detail::add_single_cell_sub(draft, "sc2", "sc2a",
                                {{"A", 10.0}, {"B", 12.0}, {"C", 9.0}});
    detail::add_single_cell_sub(draft, "sc3", "sc3a",
                                {{"A", 10.0}, {"B", 8.0}, {"C", 9.0}});
    out.data = std::move(draft).finalize();
    out.variants.push_back(
        {"pair", false, {"A", "B"}, Grouping::by_scenario,
         {{"A", (0.0 + 0.0 + 1.0) / 3.0}, {"B", (1.0 + 1.0 + 0.0) / 3.0}},
         {{"A", {0.0, 0.0, 1.0}}, {"B", {1.0, 1.0, 0.0}}}});
    out.variants.push_back(
        {"with_added", false, {"A", "B", "C"}, Grouping::by_scenario,
         {{"A", (0.5 + 0.5 + 1.0) / 3.0},
          {"B", (1.0 + 1.0 + 0.0) / 3.0},
          {"C", (0.0 + 0.0 + 0.5) / 3.0}},
         {{"A", {0.5, 0.5, 1.0}}, {"B", {1.0, 1.0, 0.0}}}});
    return out;
  }

  if (name == "combine_datasets") {
    DatasetDraft draft;
    detail::add_single_cell_sub(draft, "g12", "d1", {{"A", 1.0}, {"B", 0.0}});
    detail::add_single_cell_sub(draft, "g12", "d2", {{"A", 1.0}, {"B", 0.0}});
    detail::add_single_cell_sub(draft, "g3", "d3", {{"A", 0.0}, {"B", 1.0}});
    detail::add_single_cell_sub(draft, "g4", "d4", {{"A", 0.0}, {"B", 1.0}});
    out.data = std::move(draft).finalize();
    out.variants.push_back(
        {"standalone", false, {}, Grouping::by_subscenario,
         {{"A", (1.0 + 1.0 + 0.0 + 0.0) / 4.0},
          {"B", (0.0 + 0.0 + 1.0 + 1.0) / 4.0}},
         {}});
    out.variants.push_back(
        {"grouped", false, {}, Grouping::by_scenario,
         {{"A", (1.0 + 0.0 + 0.0) / 3.0}, {"B", (0.0 + 1.0 + 1.0) / 3.0}},
         {}});
    return out;
  }

  if (name == "partial_report") {
    // Ten fillers spaced 0.1 .. 1.0; the target's scores put it above nine
    // of them on the first two scenarios and below all on the third.
    auto fill = [](double target_score) {
      std::vector<std::pair<std::string, double>> scores;
      scores.emplace_back("target", target_score);
      for (int i = 1; i <= 10; ++i)
        scores.emplace_back(detail::padded("m", i, 2),
                            static_cast<double>(i) / 10.0);
      return scores;
    };
    DatasetDraft full;
    detail::add_single_cell_sub(full, "sc1", "sc1a", fill(0.95));
    detail::add_single_cell_sub(full, "sc2", "sc2a", fill(0.95));
    detail::add_single_cell_sub(full, "sc3", "sc3a", fill(0.05));
    out.data = std::move(full).finalize();

    DatasetDraft omitted;
    detail::add_single_cell_sub(omitted, "sc1", "sc1a", fill(0.95));
    detail::add_single_cell_sub(omitted, "sc2", "sc2a", fill(0.95));
    auto fillers_only = fill(0.0);
    fillers_only.erase(fillers_only.begin());
    detail::add_single_cell_sub(omitted, "sc3", "sc3a", fillers_only);
    out.alt_data = std::move(omitted).finalize();

    out.variants.push_back(
        {"full", false, {}, Grouping::by_scenario,
         {{"target", (9.0 / 10.0 + 9.0 / 10.0 + 0.0) / 3.0}},
         {}});
    out.variants.push_back(
        {"omitted", true, {}, Grouping::by_scenario,
         {{"target", (9.0 / 10.0 + 9.0 / 10.0) / 2.0}},
         {}});
    return out;
  }

  fail(Errc::UnknownCase, "no appendix case named '" + name + "'");
}

// ---------------------------------------------------------------------------
// Key-value spec files for the CLI:  key = value, '#' comments, lists
// comma-separated. `scenarios` + integer `subs_per_scenario` expands to a
// uniform layout.

inline SynthSpec parse_synth_config(std::istream& in) {
  SynthSpec spec;
  int scenarios = 0;
  std::optional<int> uniform_subs;
  std::string line;
  std::size_t line_no = 0;

  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t");
    const auto b = s.find_last_not_of(" \t");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  auto parse_list = [&](const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      double v = 0.0;
      if (!parse_double(trim(item), v))
        fail(Errc::InvalidSpec, "bad number '" + trim(item) + "' (line " +
                                    std::to_string(line_no) + ")");
      out.push_back(v);
    }
    return out;
  };

  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(Errc::InvalidSpec,
           "expected 'key = value' (line " + std::to_string(line_no) + ")");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    try {
    if (key == "models") spec.n_models = std::stoi(value);
    else if (key == "scenarios") scenarios = std::stoi(value);
    else if (key == "subs_per_scenario") {
      if (value.find(',') == std::string::npos) uniform_subs = std::stoi(value);
      else {
        for (double v : parse_list(value))
          spec.subs_per_scenario.push_back(static_cast<int>(v));
      }
    }
    else if (key == "examples_per_subscenario") spec.examples_per_sub = std::stoi(value);
    else if (key == "prompts_per_subscenario") spec.prompts_per_sub = std::stoi(value);
    else if (key == "latents") spec.latent = parse_list(value);
    else if (key == "difficulty_offsets") spec.difficulty = parse_list(value);
    else if (key == "difficulty_sd") spec.difficulty_sd = std::stod(value);
    else if (key == "prompt_offset_sd") spec.prompt_offset_sd = std::stod(value);
    else if (key == "noise_sd") spec.noise_sd = std::stod(value);
    else if (key == "noise_scale") spec.noise_scale = parse_list(value);
    else if (key == "squash_lo") spec.squash_lo = std::stod(value);
    else if (key == "squash_hi") spec.squash_hi = std::stod(value);
    else if (key == "seed") spec.seed = std::stoull(value);
    else
      fail(Errc::InvalidSpec,
           "unknown key '" + key + "' (line " + std::to_string(line_no) + ")");
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      fail(Errc::InvalidSpec, "bad value '" + value + "' for '" + key +
                                  "' (line " + std::to_string(line_no) + ")");
    }
  }

  if (uniform_subs) {
    if (scenarios < 1)
      fail(Errc::InvalidSpec, "integer subs_per_scenario needs 'scenarios'");
    spec.subs_per_scenario.assign(static_cast<std::size_t>(scenarios), *uniform_subs);
  }
  return spec;
}

}  // namespace benchrel
