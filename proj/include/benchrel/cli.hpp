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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "benchrel/data.hpp"
#include "benchrel/error.hpp"
#include "benchrel/flash_rank.hpp"
#include "benchrel/rank_metrics.hpp"
#include "benchrel/report.hpp"
#include "benchrel/resampling.hpp"
#include "benchrel/scoring.hpp"
#include "benchrel/synth.hpp"
#include "benchrel/table.hpp"

namespace benchrel::cli {

// Exit codes: 0 success, 1 data error (module error names printed
// verbatim), 2 usage error.

namespace detail {

constexpr std::uint64_t kDefaultSeed = 1729;

inline std::int64_t parse_size(const std::string& text) {
  if (text == "original") return kOriginalSize;
  std::int64_t v = 0;
  try {
    std::size_t pos = 0;
    v = std::stoll(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw CLI::ValidationError("size", "expected a positive integer or 'original'");
  }
  if (v < 1)
    throw CLI::ValidationError("size", "expected a positive integer or 'original'");
  return v;
}

inline std::vector<std::int64_t> parse_sizes(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(item));
  if (out.empty())
    throw CLI::ValidationError("sizes", "expected a comma-separated list");
  return out;
}

inline std::vector<int> parse_int_list(const std::string& text, const char* flag) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "expected a comma-separated integer list");
    }
  }
  if (out.empty())
    throw CLI::ValidationError(flag, "expected a comma-separated integer list");
  return out;
}

inline std::vector<std::string> parse_id_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline Grouping parse_grouping(const std::string& text) {
  if (text == "by_scenario") return Grouping::by_scenario;
  if (text == "by_subscenario") return Grouping::by_subscenario;
  throw CLI::ValidationError("grouping", "expected by_scenario or by_subscenario");
}

inline TiePolicy parse_ties(const std::string& text) {
  if (text == "strict") return TiePolicy::strict;
  if (text == "half") return TiePolicy::half;
  throw CLI::ValidationError("ties", "expected strict or half");
}

inline Axis parse_axis(const std::string& text) {
  if (text == "scenarios") return Axis::scenarios;
  if (text == "subscenarios") return Axis::subscenarios;
  if (text == "examples") return Axis::examples;
  if (text == "prompt_pairing") return Axis::prompt_pairing;
  throw CLI::ValidationError("axis", "unknown axis '" + text + "'");
}

inline SampleMode parse_mode(const std::string& text) {
  if (text == "bootstrap") return SampleMode::bootstrap;
  if (text == "subsample") return SampleMode::subsample;
  throw CLI::ValidationError("mode", "expected bootstrap or subsample");
}

inline std::vector<ObjectiveKind> parse_objectives(const std::string& text) {
  if (text == "all")
    return {ObjectiveKind::full_ranking_kendall,
            ObjectiveKind::full_ranking_weighted, ObjectiveKind::best_model,
            ObjectiveKind::model_quality};
  if (text == "full_ranking_kendall") return {ObjectiveKind::full_ranking_kendall};
  if (text == "full_ranking_weighted") return {ObjectiveKind::full_ranking_weighted};
  if (text == "best_model") return {ObjectiveKind::best_model};
  if (text == "model_quality") return {ObjectiveKind::model_quality};
  throw CLI::ValidationError("objective", "unknown objective '" + text + "'");
}

/// "1:0,2-4:1,5-9:2,10-19:3,20+:4" -> TierConfig.
inline TierConfig parse_tiers(const std::string& text) {
  TierConfig config;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw CLI::ValidationError("tiers", "expected RANGE:PRECISION entries");
    const std::string range = item.substr(0, colon);
    Tier tier{};
    try {
      tier.required_precision = std::stoi(item.substr(colon + 1));
      if (!range.empty() && range.back() == '+') {
        tier.top_rank = std::stoi(range.substr(0, range.size() - 1));
        tier.bottom_rank = -1;
      } else if (const auto dash = range.find('-'); dash != std::string::npos) {
        tier.top_rank = std::stoi(range.substr(0, dash));
        tier.bottom_rank = std::stoi(range.substr(dash + 1));
      } else {
        tier.top_rank = std::stoi(range);
        tier.bottom_rank = tier.top_rank;
      }
    } catch (const std::exception&) {
      throw CLI::ValidationError("tiers", "bad tier entry '" + item + "'");
    }
    config.tiers.push_back(tier);
  }
  try {
    config.validate();
  } catch (const Error& e) {
    throw CLI::ValidationError("tiers", e.what());
  }
  return config;
}

inline FileFormat parse_format(const std::string& flag,
                               const std::filesystem::path& path) {
  if (flag == "auto") return guess_format(path);
  if (flag == "csv") return FileFormat::delimited;
  if (flag == "jsonl") return FileFormat::record_lines;
  throw CLI::ValidationError("format", "expected auto, csv or jsonl");
}

inline void announce(const std::filesystem::path& path) {
  std::cout << "wrote " << path.string() << "\n";
}

inline json nan_to_null(double v) {
  if (std::isnan(v)) return json(nullptr);
  return json(v);
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct CommandIo {
  std::filesystem::path outdir;
  json config;  // effective flags; the thread count is execution detail and
                // deliberately left out so reports are parallelism-invariant
};

inline int run(std::vector<std::string> args) {
  CLI::App app{"benchmark reliability toolkit"};
  app.require_subcommand(1);

  std::string outdir = ".";
  app.add_option("--out-dir", outdir, "output directory for reports")
      ->envname("BENCHREL_OUTDIR")
      ->capture_default_str();

  // Shared option storage; each subcommand registers the subset it uses.
  std::string input, format = "auto";
  std::string grouping = "by_scenario", ties = "strict";
  std::uint64_t seed = detail::kDefaultSeed;
  unsigned threads = 1;
  int B = 1000;

  auto add_input = [&](CLI::App* cmd) {
    cmd->add_option("--input", input, "score file")->required();
    cmd->add_option("--format", format, "input format: auto|csv|jsonl")
        ->capture_default_str();
  };
  auto add_eval = [&](CLI::App* cmd) {
    cmd->add_option("--grouping", grouping, "by_scenario|by_subscenario")
        ->capture_default_str();
    cmd->add_option("--ties", ties, "strict|half")->capture_default_str();
  };
  auto add_sampling = [&](CLI::App* cmd) {
    cmd->add_option("--B", B, "resampling iterations")->capture_default_str();
    cmd->add_option("--seed", seed, "master seed")->capture_default_str();
    cmd->add_option("--threads", threads, "worker threads (0 = hardware)")
        ->capture_default_str();
  };

  // validate
  auto* cmd_validate = app.add_subcommand("validate", "check a score file and report coverage");
  add_input(cmd_validate);

  // mwr / rank
  std::string models_flag;
  auto* cmd_mwr = app.add_subcommand("mwr", "mean win rate per model");
  add_input(cmd_mwr);
  add_eval(cmd_mwr);
  cmd_mwr->add_option("--models", models_flag, "comma-separated subset (default: all)");

  auto* cmd_rank = app.add_subcommand("rank", "model ranking by mean win rate");
  add_input(cmd_rank);
  add_eval(cmd_rank);
  cmd_rank->add_option("--models", models_flag, "comma-separated subset (default: all)");

  // dior
  std::string axis_flag = "examples", sizes_flag = "original", mode_flag = "bootstrap";
  std::string objective_flag = "all";
  bool one_sided = false, emit_samples = false;
  auto* cmd_dior = app.add_subcommand("dior", "decision-impact-on-reliability bounds");
  add_input(cmd_dior);
  add_eval(cmd_dior);
  add_sampling(cmd_dior);
  cmd_dior->add_option("--axis", axis_flag, "scenarios|subscenarios|examples|prompt_pairing")
      ->capture_default_str();
  cmd_dior->add_option("--size", sizes_flag,
                       "comma-separated sizes; integers or 'original'")
      ->capture_default_str();
  cmd_dior->add_option("--mode", mode_flag, "bootstrap|subsample")->capture_default_str();
  cmd_dior->add_option("--objective", objective_flag,
                       "full_ranking_kendall|full_ranking_weighted|best_model|model_quality|all")
      ->capture_default_str();
  cmd_dior->add_flag("--one-sided", one_sided, "use the 5th percentile lower bound");
  cmd_dior->add_flag("--emit-samples", emit_samples, "embed raw similarity samples");

  // best-model
  int top_removals = 5;
  bool exact_ci = false;
  auto* cmd_best = app.add_subcommand("best-model", "top-pair switch error rates");
  add_input(cmd_best);
  add_eval(cmd_best);
  add_sampling(cmd_best);
  cmd_best->add_option("--axis", axis_flag, "resampling axis")->capture_default_str();
  cmd_best->add_option("--size", sizes_flag, "size; integer or 'original'")
      ->capture_default_str();
  cmd_best->add_option("--mode", mode_flag, "bootstrap|subsample")->capture_default_str();
  cmd_best->add_option("--top-removals", top_removals, "leader removals")
      ->capture_default_str();
  cmd_best->add_flag("--exact-ci", exact_ci, "exact binomial intervals");

  // cluster-curve
  std::string cluster_sizes_flag = "2,3,5,10,20";
  auto* cmd_cluster = app.add_subcommand("cluster-curve",
                                         "rank-cluster switch probability curves");
  add_input(cmd_cluster);
  add_eval(cmd_cluster);
  add_sampling(cmd_cluster);
  cmd_cluster->add_option("--sizes", sizes_flag, "examples-axis sizes (comma list)")
      ->required();
  cmd_cluster->add_option("--cluster-sizes", cluster_sizes_flag, "cluster sizes")
      ->capture_default_str();
  cmd_cluster->add_option("--mode", mode_flag, "bootstrap|subsample")
      ->capture_default_str();

  // prompt-compare
  std::int64_t budget = 0;
  auto* cmd_prompt = app.add_subcommand("prompt-compare",
                                        "pairing strategies at equal call budget");
  add_input(cmd_prompt);
  add_eval(cmd_prompt);
  add_sampling(cmd_prompt);
  cmd_prompt->add_option("--budget", budget, "calls per subscenario")->required();

  // correlations
  auto* cmd_corr = app.add_subcommand("correlations",
                                      "rank correlations between subscenarios");
  add_input(cmd_corr);
  add_eval(cmd_corr);

  // calibrate
  std::string calib_sizes_flag = "20,50,200,1000,original";
  std::string tiers_flag = "1:0,2-4:1,5-9:2,10-19:3,20+:4";
  double confidence = 0.95;
  bool per_tier = false;
  auto* cmd_calibrate = app.add_subcommand("calibrate", "rank-resolution table");
  add_input(cmd_calibrate);
  add_eval(cmd_calibrate);
  add_sampling(cmd_calibrate);
  cmd_calibrate->add_option("--sizes", calib_sizes_flag, "sample sizes per scenario")
      ->capture_default_str();
  cmd_calibrate->add_option("--tiers", tiers_flag, "tier spec RANGE:PRECISION,...")
      ->capture_default_str();
  cmd_calibrate->add_option("--confidence", confidence, "coverage level")
      ->capture_default_str();
  cmd_calibrate->add_flag("--per-tier", per_tier, "worst per-tier quantile pooling");

  // flash-rank
  std::string new_scores, table_path, schedule_flag;
  auto* cmd_flash = app.add_subcommand("flash-rank", "coarse-to-fine tournament");
  add_input(cmd_flash);
  add_eval(cmd_flash);
  cmd_flash->add_option("--new-scores", new_scores,
                        "single-model score file for the evaluated model")
      ->required();
  cmd_flash->add_option("--table", table_path, "calibrate report (JSON)")->required();
  cmd_flash->add_option("--tiers", tiers_flag, "tier spec")->capture_default_str();
  cmd_flash->add_option("--schedule", schedule_flag,
                        "stage sizes (default: every calibrated size)");
  cmd_flash->add_option("--seed", seed, "master seed")->capture_default_str();

  // synth
  std::string spec_path, case_name, out_data, data_format = "csv";
  auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic benchmark");
  cmd_synth->add_option("--spec", spec_path, "key=value spec file");
  cmd_synth->add_option("--case", case_name,
                        "add_model|combine_datasets|partial_report");
  cmd_synth->add_option("--out-data", out_data, "where to write the dataset");
  cmd_synth->add_option("--data-format", data_format, "csv|jsonl")
      ->capture_default_str();
  cmd_synth->add_option("--seed", seed, "master seed")->capture_default_str();

  // Parent options (--out-dir) stay visible after a subcommand name.
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    const std::filesystem::path out(outdir);

    auto base_config = [&](const char* command) {
      json config;
      config["command"] = command;
      return config;
    };
    auto load_input = [&]() {
      return load_results(std::filesystem::path(input),
                          detail::parse_format(format, input));
    };

    if (*cmd_validate) {
      json report = base_config("validate");
      report["config"] = {{"input", input}, {"format", format}, {"seed", seed}};
      const BenchmarkData data = load_input();
      const ValidationReport v = validate(data);
      json results;
      results["records"] = v.record_count;
      results["models"] = v.model_count;
      results["scenarios"] = v.scenario_count;
      results["subscenarios"] = v.subscenario_count;
      results["examples"] = v.example_count;
      results["prompts"] = v.prompt_count;
      json missing = json::array();
      for (const auto& [m, s] : v.missing_pairs)
        missing.push_back({{"model", m}, {"subscenario", s}});
      results["missing_pairs"] = missing;
      results["warnings"] = v.warnings;
      report["results"] = results;
      detail::announce(write_report(out, "validate", report));

      Table plot;
      plot.header = {"subscenario", "scenario", "examples", "prompts", "records"};
      for (int s = 0; s < data.n_subs(); ++s) {
        const auto& sub = data.sub(s);
        double records = 0;
        for (double c : sub.model_count) records += c;
        plot.rows.push_back({sub.id, data.scenario(sub.scenario),
                             std::to_string(sub.n_examples()),
                             std::to_string(sub.n_prompts()),
                             format_double(records)});
      }
      detail::announce(write_plot(out, "validate_plot", plot));
      return 0;
    }

    if (*cmd_mwr || *cmd_rank) {
      const bool want_rank = static_cast<bool>(*cmd_rank);
      const char* name = want_rank ? "rank" : "mwr";
      json report = base_config(name);
      report["config"] = {{"input", input},          {"format", format},
                          {"grouping", grouping},    {"ties", ties},
                          {"models", models_flag},   {"seed", seed}};
      const BenchmarkData data = load_input();
      const ScoreTable table = mean_win_rate(
          data, detail::parse_id_list(models_flag), detail::parse_grouping(grouping),
          Selection::full(data), detail::parse_ties(ties), true);
      json results;
      json mwr_obj;
      for (std::size_t i = 0; i < table.models.size(); ++i)
        mwr_obj[table.models[i]] = table.values[i];
      results["mwr"] = mwr_obj;
      results["units"] = table.unit_labels;
      json rates;
      for (std::size_t i = 0; i < table.models.size(); ++i) {
        json row = json::array();
        for (double r : table.unit_win_rates[i]) row.push_back(detail::nan_to_null(r));
        rates[table.models[i]] = row;
      }
      results["unit_win_rates"] = rates;

      Table plot;
      if (want_rank) {
        const Ranking r = ranking(table);
        results["order"] = r.order;
        results["tie_break_used"] = r.tie_break_used;
        plot.header = {"rank", "model", "mwr"};
        for (std::size_t i = 0; i < r.order.size(); ++i)
          plot.rows.push_back({std::to_string(i + 1), r.order[i],
                               format_double(r.scores[i])});
      } else {
        plot.header = {"model", "mwr"};
        for (std::size_t i = 0; i < table.models.size(); ++i)
          plot.rows.push_back({table.models[i], format_double(table.values[i])});
      }
      report["results"] = results;
      detail::announce(write_report(out, name, report));
      detail::announce(write_plot(out, std::string(name) + "_plot", plot));
      return 0;
    }

    if (*cmd_dior) {
      json report = base_config("dior");
      report["config"] = {{"input", input},         {"format", format},
                          {"axis", axis_flag},      {"sizes", sizes_flag},
                          {"mode", mode_flag},      {"objective", objective_flag},
                          {"grouping", grouping},   {"ties", ties},
                          {"B", B},                 {"seed", seed},
                          {"one_sided", one_sided}};
      const BenchmarkData data = load_input();
      ResampleOptions opt;
      opt.axis = detail::parse_axis(axis_flag);
      opt.mode = detail::parse_mode(mode_flag);
      opt.grouping = detail::parse_grouping(grouping);
      opt.ties = detail::parse_ties(ties);
      opt.B = B;
      opt.seed = seed;
      opt.threads = threads;
      opt.one_sided = one_sided;

      json rows = json::array();
      Table plot;
      plot.header = {"axis", "size", "objective", "dior", "median"};
      for (std::int64_t size : detail::parse_sizes(sizes_flag)) {
        opt.size = size;
        for (ObjectiveKind objective : detail::parse_objectives(objective_flag)) {
          const DiorResult r = dior(data, objective, opt);
          json row = {{"axis", to_string(r.axis)},
                      {"size", size_json(r.size)},
                      {"objective", to_string(r.objective)},
                      {"meta_metric", to_string(meta_metric_of(r.objective))},
                      {"dior", r.lower_bound},
                      {"median", r.point_estimate},
                      {"B", r.B}};
          if (emit_samples) row["samples"] = r.samples;
          rows.push_back(row);
          plot.rows.push_back({to_string(r.axis), size_label(r.size),
                               to_string(r.objective),
                               format_double(r.lower_bound),
                               format_double(r.point_estimate)});
        }
      }
      report["results"] = {{"rows", rows}};
      detail::announce(write_report(out, "dior", report));
      detail::announce(write_plot(out, "dior_plot", plot));
      return 0;
    }

    if (*cmd_best) {
      json report = base_config("best-model");
      report["config"] = {{"input", input},       {"format", format},
                          {"axis", axis_flag},    {"size", sizes_flag},
                          {"mode", mode_flag},    {"grouping", grouping},
                          {"ties", ties},         {"B", B},
                          {"seed", seed},         {"top_removals", top_removals},
                          {"exact_ci", exact_ci}};
      const BenchmarkData data = load_input();
      ResampleOptions opt;
      opt.axis = detail::parse_axis(axis_flag);
      opt.size = detail::parse_size(sizes_flag);
      opt.mode = detail::parse_mode(mode_flag);
      opt.grouping = detail::parse_grouping(grouping);
      opt.ties = detail::parse_ties(ties);
      opt.B = B;
      opt.seed = seed;
      opt.threads = threads;
      const BestModelResult r = best_model_error_rate(data, opt, top_removals, exact_ci);

      json rows = json::array();
      Table plot;
      plot.header = {"repetition", "top", "runner_up", "error_rate", "ci_lo", "ci_hi"};
      for (std::size_t i = 0; i < r.rows.size(); ++i) {
        const auto& row = r.rows[i];
        rows.push_back({{"repetition", i},
                        {"removed", row.removed},
                        {"top", row.top},
                        {"runner_up", row.runner_up},
                        {"error_rate", row.error_rate},
                        {"ci_lo", row.ci_lo},
                        {"ci_hi", row.ci_hi}});
        plot.rows.push_back({std::to_string(i), row.top, row.runner_up,
                             format_double(row.error_rate),
                             format_double(row.ci_lo), format_double(row.ci_hi)});
      }
      report["results"] = {{"rows", rows}, {"average_error", r.average_error}};
      detail::announce(write_report(out, "best-model", report));
      detail::announce(write_plot(out, "best-model_plot", plot));
      return 0;
    }

    if (*cmd_cluster) {
      json report = base_config("cluster-curve");
      report["config"] = {{"input", input},
                          {"format", format},
                          {"sizes", sizes_flag},
                          {"cluster_sizes", cluster_sizes_flag},
                          {"mode", mode_flag},
                          {"grouping", grouping},
                          {"ties", ties},
                          {"B", B},
                          {"seed", seed}};
      const BenchmarkData data = load_input();
      ResampleOptions opt;
      opt.axis = Axis::examples;
      opt.mode = detail::parse_mode(mode_flag);
      opt.grouping = detail::parse_grouping(grouping);
      opt.ties = detail::parse_ties(ties);
      opt.B = B;
      opt.seed = seed;
      opt.threads = threads;
      const ClusterCurveResult r = cluster_error_curve(
          data, detail::parse_sizes(sizes_flag),
          detail::parse_int_list(cluster_sizes_flag, "cluster-sizes"), opt);

      json rows = json::array();
      Table plot;
      plot.header = {"size", "cluster_size", "error_rate", "band_lo", "band_hi"};
      for (const auto& row : r.rows) {
        rows.push_back({{"size", size_json(row.size)},
                        {"cluster_size", row.cluster_size},
                        {"error_rate", row.error_rate},
                        {"band_lo", row.band_lo},
                        {"band_hi", row.band_hi}});
        plot.rows.push_back({size_label(row.size), std::to_string(row.cluster_size),
                             format_double(row.error_rate),
                             format_double(row.band_lo), format_double(row.band_hi)});
      }
      report["results"] = {{"rows", rows}};
      detail::announce(write_report(out, "cluster-curve", report));
      detail::announce(write_plot(out, "cluster-curve_plot", plot));

      Table ranks;
      ranks.header = {"size", "model", "median_rank", "rank_lo", "rank_hi"};
      for (const auto& t : r.trajectories)
        ranks.rows.push_back({size_label(t.size), t.model,
                              format_double(t.median_rank),
                              format_double(t.rank_lo), format_double(t.rank_hi)});
      detail::announce(write_plot(out, "cluster-curve_ranks", ranks));
      return 0;
    }

    if (*cmd_prompt) {
      json report = base_config("prompt-compare");
      report["config"] = {{"input", input},     {"format", format},
                          {"budget", budget},   {"grouping", grouping},
                          {"ties", ties},       {"B", B},
                          {"seed", seed}};
      const BenchmarkData data = load_input();
      ResampleOptions opt;
      opt.grouping = detail::parse_grouping(grouping);
      opt.ties = detail::parse_ties(ties);
      opt.B = B;
      opt.seed = seed;
      opt.threads = threads;
      const PromptCompareResult r = prompt_strategy_compare(data, budget, opt);

      json summary = json::array();
      for (const auto& [strategy, mode, width] : r.summary)
        summary.push_back(
            {{"strategy", strategy}, {"mode", mode}, {"mean_ci_width", width}});
      report["results"] = {{"excluded_subscenarios", r.excluded_subs},
                           {"summary", summary}};
      detail::announce(write_report(out, "prompt-compare", report));

      Table plot;
      plot.header = {"strategy", "mode", "model", "ci_width"};
      for (const auto& row : r.rows)
        plot.rows.push_back(
            {row.strategy, row.mode, row.model, format_double(row.ci_width)});
      detail::announce(write_plot(out, "prompt-compare_plot", plot));
      return 0;
    }

    if (*cmd_corr) {
      json report = base_config("correlations");
      report["config"] = {{"input", input},
                          {"format", format},
                          {"grouping", grouping},
                          {"ties", ties},
                          {"seed", seed}};
      const BenchmarkData data = load_input();
      const CorrelationResult r =
          subscenario_rank_correlations(data, detail::parse_ties(ties));
      report["results"] = {{"mean_within_scenario", detail::nan_to_null(r.mean_within)},
                           {"mean_across_scenario", detail::nan_to_null(r.mean_across)},
                           {"subscenarios", r.subs}};
      detail::announce(write_report(out, "correlations", report));

      Table plot;
      plot.header = {"sub_a", "sub_b", "tau"};
      for (std::size_t a = 0; a < r.subs.size(); ++a)
        for (std::size_t b = 0; b < r.subs.size(); ++b)
          plot.rows.push_back({r.subs[a], r.subs[b],
                               std::isnan(r.tau[a][b]) ? "" : format_double(r.tau[a][b])});
      detail::announce(write_plot(out, "correlations_plot", plot));
      return 0;
    }

    if (*cmd_calibrate) {
      json report = base_config("calibrate");
      report["config"] = {{"input", input},
                          {"format", format},
                          {"sizes", calib_sizes_flag},
                          {"tiers", tiers_flag},
                          {"confidence", confidence},
                          {"grouping", grouping},
                          {"ties", ties},
                          {"B", B},
                          {"seed", seed},
                          {"per_tier", per_tier}};
      const BenchmarkData data = load_input();
      const ResolutionTable table = calibrate_resolution(
          data, detail::parse_sizes(calib_sizes_flag),
          detail::parse_tiers(tiers_flag), B, confidence, seed,
          detail::parse_grouping(grouping), detail::parse_ties(ties), threads,
          per_tier);
      json entries = json::array();
      Table plot;
      plot.header = {"size", "res", "tier_rank"};
      for (const auto& e : table.entries) {
        entries.push_back({{"size", size_json(e.size)},
                           {"res", e.res},
                           {"tier_rank", e.tier_rank}});
        plot.rows.push_back({size_label(e.size), std::to_string(e.res),
                             std::to_string(e.tier_rank)});
      }
      report["results"] = {{"entries", entries},
                           {"grouping", grouping},
                           {"ties", ties},
                           {"B", table.B},
                           {"confidence", table.confidence},
                           {"seed", table.seed},
                           {"fingerprint", table.data_fingerprint}};
      detail::announce(write_report(out, "calibrate", report));
      detail::announce(write_plot(out, "calibrate_plot", plot));
      return 0;
    }

    if (*cmd_flash) {
      json report = base_config("flash-rank");
      report["config"] = {{"input", input},           {"format", format},
                          {"new_scores", new_scores}, {"table", table_path},
                          {"tiers", tiers_flag},      {"schedule", schedule_flag},
                          {"grouping", grouping},     {"ties", ties},
                          {"seed", seed}};
      const BenchmarkData data = load_input();

      std::ifstream table_in(table_path);
      if (!table_in)
        fail(Errc::InvalidArgument, "cannot open '" + table_path + "'");
      json table_json = json::parse(table_in, nullptr, false);
      if (table_json.is_discarded() || !table_json.contains("results"))
        fail(Errc::InvalidArgument, "'" + table_path + "' is not a calibrate report");
      const json& tr = table_json["results"];
      ResolutionTable table;
      table.grouping = detail::parse_grouping(tr["grouping"].get<std::string>());
      table.ties = detail::parse_ties(tr["ties"].get<std::string>());
      table.B = tr["B"].get<int>();
      table.confidence = tr["confidence"].get<double>();
      table.seed = tr["seed"].get<std::uint64_t>();
      table.data_fingerprint = tr["fingerprint"].get<std::uint64_t>();
      for (const auto& e : tr["entries"])
        table.entries.push_back(ResolutionEntry{size_from_json(e["size"]),
                                                e["res"].get<int>(),
                                                e["tier_rank"].get<int>()});

      StoredScoreProvider provider(load_results(
          std::filesystem::path(new_scores), detail::parse_format(format, new_scores)));
      const TierConfig tiers_config = detail::parse_tiers(tiers_flag);
      std::vector<std::int64_t> schedule;
      if (!schedule_flag.empty()) schedule = detail::parse_sizes(schedule_flag);
      const FlashRankResult r =
          flash_rank(data, provider, table, tiers_config,
                     detail::parse_grouping(grouping), detail::parse_ties(ties),
                     seed, schedule_flag.empty() ? nullptr : &schedule);

      json stages = json::array();
      Table plot;
      plot.header = {"size", "rank", "res", "tier_rank", "stopped", "calls_used",
                     "savings_so_far"};
      for (const auto& s : r.stages) {
        stages.push_back({{"size", size_json(s.size)},
                          {"rank", s.rank},
                          {"res", s.res},
                          {"tier_rank", s.tier_rank},
                          {"stopped", s.stopped},
                          {"calls_used", s.calls_used}});
        plot.rows.push_back(
            {size_label(s.size), std::to_string(s.rank), std::to_string(s.res),
             std::to_string(s.tier_rank), s.stopped ? "1" : "0",
             std::to_string(s.calls_used),
             format_double(static_cast<double>(r.full_calls) /
                           static_cast<double>(s.calls_used))});
      }
      report["results"] = {{"model", r.model},
                           {"final_rank", r.final_rank},
                           {"tier", r.tier_label},
                           {"calls_used", r.calls_used},
                           {"full_calls", r.full_calls},
                           {"savings_factor", r.savings_factor},
                           {"stages", stages}};
      detail::announce(write_report(out, "flash-rank", report));
      detail::announce(write_plot(out, "flash-rank_plot", plot));
      return 0;
    }

    if (*cmd_synth) {
      if (spec_path.empty() == case_name.empty()) {
        std::cerr << "usage error: synth needs exactly one of --spec or --case\n";
        return 2;
      }
      json report = base_config("synth");
      report["config"] = {{"spec", spec_path},
                          {"case", case_name},
                          {"out_data", out_data},
                          {"data_format", data_format},
                          {"seed", seed}};
      BenchmarkData data;
      json results;
      if (!case_name.empty()) {
        const AppendixCase c = appendix_case(case_name);
        data = c.data;
        json variants = json::array();
        for (const auto& v : c.variants) {
          json expected;
          for (const auto& [model, value] : v.expected_mwr) expected[model] = value;
          variants.push_back({{"label", v.label},
                              {"grouping", to_string(v.grouping)},
                              {"models", v.models},
                              {"expected_mwr", expected}});
        }
        results["case"] = c.name;
        results["variants"] = variants;
        if (c.alt_data) {
          const std::filesystem::path alt_path =
              out / ("synth_" + case_name + "_alt.csv");
          std::ofstream alt_out(alt_path, std::ios::binary);
          write_delimited(*c.alt_data, alt_out);
          detail::announce(alt_path);
          results["alt_data"] = alt_path.string();
        }
      } else {
        std::ifstream spec_in(spec_path);
        if (!spec_in)
          fail(Errc::InvalidArgument, "cannot open '" + spec_path + "'");
        SynthSpec spec = parse_synth_config(spec_in);
        data = generate(spec);
        results["models"] = spec.n_models;
        results["scenarios"] = spec.subs_per_scenario.size();
        results["records"] = data.record_count();
        results["seed"] = spec.seed;
      }

      const std::filesystem::path data_path =
          out_data.empty() ? out / (data_format == "jsonl" ? "synth_data.jsonl"
                                                           : "synth_data.csv")
                           : std::filesystem::path(out_data);
      if (data_path.has_parent_path())
        std::filesystem::create_directories(data_path.parent_path());
      std::ofstream data_out(data_path, std::ios::binary);
      if (!data_out)
        fail(Errc::InvalidArgument, "cannot write '" + data_path.string() + "'");
      if (data_format == "jsonl")
        write_record_lines(data, data_out);
      else
        write_delimited(data, data_out);
      detail::announce(data_path);
      results["data"] = data_path.string();
      report["results"] = results;
      detail::announce(write_report(out, "synth", report));

      Table plot;
      plot.header = {"model", "mean_score"};
      for (int m = 0; m < data.n_models(); ++m) {
        double sum = 0.0, cnt = 0.0;
        for (int s = 0; s < data.n_subs(); ++s) {
          sum += data.sub(s).model_sum[static_cast<std::size_t>(m)];
          cnt += data.sub(s).model_count[static_cast<std::size_t>(m)];
        }
        plot.rows.push_back(
            {data.model(m), cnt > 0 ? format_double(sum / cnt) : ""});
      }
      detail::announce(write_plot(out, "synth_plot", plot));
      return 0;
    }

    std::cerr << "usage error: no subcommand\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    // Flag-value validation that only happens at execution time.
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

inline int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace benchrel::cli
