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
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "benchrel/error.hpp"
#include "benchrel/table.hpp"

namespace benchrel {

/// One score: model m evaluated on one example of one subscenario under one
/// prompt. The (model, subscenario, prompt_id, example_id) quadruple is
/// unique within a dataset and the score is always finite.
struct ScoreRecord {
  std::string model;
  std::string scenario;
  std::string subscenario;
  std::string prompt_id;
  std::string example_id;
  double score = 0.0;

  bool operator==(const ScoreRecord&) const = default;
};

struct Taxonomy {
  std::vector<std::string> scenarios;
  std::map<std::string, std::vector<std::string>> subscenarios_of;
};

namespace detail {
constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();
inline bool present(double cell) { return !std::isnan(cell); }
}  // namespace detail

/// Immutable, fully indexed benchmark results. Identifiers are interned and
/// every axis is sorted lexicographically, so two files with the same rows
/// in any order produce equal datasets. Scores live in one dense tensor per
/// subscenario (cell layout (example * P + prompt) * M + model, NaN =
/// absent) plus per-example prompt aggregates that the resampling hot loops
/// read model-contiguously.
class BenchmarkData {
 public:
  struct Subscenario {
    std::string id;
    int scenario = -1;
    std::vector<std::string> examples;  // sorted
    std::vector<std::string> prompts;   // sorted
    std::vector<double> cells;          // (e * P + p) * M + m
    std::vector<double> example_sums;   // e * M + m, sum over present prompts
    std::vector<float> example_counts;  // e * M + m, only when !full_coverage
    bool full_coverage = true;
    std::vector<char> model_present;    // any record for (m, sub)
    std::vector<double> model_sum;      // full totals per model
    std::vector<double> model_count;

    std::size_t n_examples() const { return examples.size(); }
    std::size_t n_prompts() const { return prompts.size(); }
  };

  BenchmarkData() = default;

  int n_models() const { return static_cast<int>(models_.size()); }
  const std::vector<std::string>& models() const { return models_; }
  const std::string& model(int i) const { return models_[static_cast<std::size_t>(i)]; }
  int model_index(const std::string& id) const { return lookup(model_idx_, id); }

  int n_scenarios() const { return static_cast<int>(scenarios_.size()); }
  const std::vector<std::string>& scenarios() const { return scenarios_; }
  const std::string& scenario(int i) const { return scenarios_[static_cast<std::size_t>(i)]; }
  int scenario_index(const std::string& id) const { return lookup(scenario_idx_, id); }
  const std::vector<int>& scenario_subs(int i) const {
    return scenario_subs_[static_cast<std::size_t>(i)];
  }

  int n_subs() const { return static_cast<int>(subs_.size()); }
  const Subscenario& sub(int i) const { return subs_[static_cast<std::size_t>(i)]; }
  int sub_index(const std::string& id) const { return lookup(sub_idx_, id); }

  std::size_t record_count() const { return record_count_; }

  /// NaN when the cell is absent.
  double score(int m, int s, int e, int p) const {
    const Subscenario& sub = subs_[static_cast<std::size_t>(s)];
    return sub.cells[(static_cast<std::size_t>(e) * sub.n_prompts() +
                      static_cast<std::size_t>(p)) *
                         models_.size() +
                     static_cast<std::size_t>(m)];
  }

  Taxonomy taxonomy() const {
    Taxonomy t;
    t.scenarios = scenarios_;
    for (int si = 0; si < n_scenarios(); ++si) {
      auto& list = t.subscenarios_of[scenarios_[static_cast<std::size_t>(si)]];
      for (int sub : scenario_subs_[static_cast<std::size_t>(si)])
        list.push_back(subs_[static_cast<std::size_t>(sub)].id);
    }
    return t;
  }

  /// Structural digest used to tie calibration artifacts to the dataset
  /// they were computed on.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::string_view s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
      }
      h ^= 0xff;
      h *= 1099511628211ULL;
    };
    for (const auto& m : models_) mix(m);
    for (const auto& sub : subs_) {
      mix(sub.id);
      mix(scenarios_[static_cast<std::size_t>(sub.scenario)]);
      h ^= sub.examples.size() * 0x9e3779b97f4a7c15ULL;
      h ^= sub.prompts.size() * 0xc2b2ae3d27d4eb4fULL;
    }
    return h;
  }

  bool operator==(const BenchmarkData& other) const {
    if (models_ != other.models_ || scenarios_ != other.scenarios_ ||
        subs_.size() != other.subs_.size())
      return false;
    for (std::size_t i = 0; i < subs_.size(); ++i) {
      const auto& a = subs_[i];
      const auto& b = other.subs_[i];
      if (a.id != b.id || a.scenario != b.scenario ||
          a.examples != b.examples || a.prompts != b.prompts)
        return false;
      for (std::size_t c = 0; c < a.cells.size(); ++c) {
        const bool pa = detail::present(a.cells[c]);
        const bool pb = detail::present(b.cells[c]);
        if (pa != pb) return false;
        if (pa && a.cells[c] != b.cells[c]) return false;
      }
    }
    return true;
  }

  friend class DatasetDraft;

 private:
  static int lookup(const std::unordered_map<std::string, int>& map,
                    const std::string& id) {
    auto it = map.find(id);
    return it == map.end() ? -1 : it->second;
  }

  std::vector<std::string> models_;
  std::vector<std::string> scenarios_;
  std::vector<Subscenario> subs_;
  std::vector<std::vector<int>> scenario_subs_;
  std::unordered_map<std::string, int> model_idx_;
  std::unordered_map<std::string, int> scenario_idx_;
  std::unordered_map<std::string, int> sub_idx_;
  std::size_t record_count_ = 0;
};

/// Mutable staging area for building a dataset. Both file loaders and the
/// synthetic generator fill a draft (in whatever id order they encounter)
/// and finalize() produces the canonical sorted BenchmarkData.
class DatasetDraft {
 public:
  int intern_model(const std::string& id) {
    return intern(model_ids_, model_idx_, id);
  }

  /// Declares (or retrieves) a subscenario under the given scenario.
  int intern_sub(const std::string& scenario, const std::string& sub,
                 std::size_t source_line = 0) {
    const int sc = intern(scenario_ids_, scenario_idx_, scenario);
    auto it = sub_idx_.find(sub);
    if (it != sub_idx_.end()) {
      if (subs_[static_cast<std::size_t>(it->second)].scenario != sc)
        fail(Errc::TaxonomyConflict,
             "subscenario '" + sub + "' appears under two scenarios ('" +
                 scenario_ids_[static_cast<std::size_t>(
                     subs_[static_cast<std::size_t>(it->second)].scenario)] +
                 "' and '" + scenario + "')" + at(source_line));
      return it->second;
    }
    const int idx = static_cast<int>(subs_.size());
    sub_idx_.emplace(sub, idx);
    subs_.push_back(DraftSub{sub, sc, {}, {}, {}, {}});
    return idx;
  }

  int intern_example(int sub, const std::string& id) {
    auto& s = subs_[static_cast<std::size_t>(sub)];
    return intern(s.examples, s.example_idx, id);
  }

  int intern_prompt(int sub, const std::string& id) {
    auto& s = subs_[static_cast<std::size_t>(sub)];
    return intern(s.prompts, s.prompt_idx, id);
  }

  /// Records one score. Duplicate (model, sub, prompt, example) cells are
  /// rejected, naming the offending source line when the caller has one.
  void add(int model, int sub, int example, int prompt, double score,
           std::size_t source_line = 0) {
    auto& s = subs_[static_cast<std::size_t>(sub)];
    s.entries.push_back(DraftEntry{model, example, prompt, score, source_line});
  }

  bool empty() const {
    for (const auto& s : subs_)
      if (!s.entries.empty()) return false;
    return true;
  }

  /// Sorts every id axis, lays out the dense tensors, and checks the
  /// dataset invariants. The draft is consumed.
  BenchmarkData finalize() &&;

 private:
  struct DraftEntry {
    int model, example, prompt;
    double score;
    std::size_t line;
  };
  struct DraftSub {
    std::string id;
    int scenario;
    std::vector<std::string> examples;
    std::vector<std::string> prompts;
    std::unordered_map<std::string, int> example_idx;
    std::unordered_map<std::string, int> prompt_idx;
    std::vector<DraftEntry> entries;
  };

  static int intern(std::vector<std::string>& ids,
                    std::unordered_map<std::string, int>& index,
                    const std::string& id) {
    auto it = index.find(id);
    if (it != index.end()) return it->second;
    const int idx = static_cast<int>(ids.size());
    ids.push_back(id);
    index.emplace(id, idx);
    return idx;
  }

  static std::string at(std::size_t line) {
    return line ? " (line " + std::to_string(line) + ")" : "";
  }

  /// Permutation that sorts `ids`; old index -> new index.
  static std::vector<int> sort_remap(std::vector<std::string>& ids) {
    std::vector<int> order(ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&ids](int a, int b) {
      return ids[static_cast<std::size_t>(a)] < ids[static_cast<std::size_t>(b)];
    });
    std::vector<std::string> sorted(ids.size());
    std::vector<int> remap(ids.size());
    for (std::size_t n = 0; n < order.size(); ++n) {
      sorted[n] = std::move(ids[static_cast<std::size_t>(order[n])]);
      remap[static_cast<std::size_t>(order[n])] = static_cast<int>(n);
    }
    ids = std::move(sorted);
    return remap;
  }

  std::vector<std::string> model_ids_;
  std::vector<std::string> scenario_ids_;
  std::vector<DraftSub> subs_;
  std::unordered_map<std::string, int> model_idx_;
  std::unordered_map<std::string, int> scenario_idx_;
  std::unordered_map<std::string, int> sub_idx_;
};

inline BenchmarkData DatasetDraft::finalize() && {
  if (empty()) fail(Errc::EmptyDataset, "no score records");

  BenchmarkData data;
  const std::vector<int> model_remap = sort_remap(model_ids_);
  const std::vector<int> scenario_remap = sort_remap(scenario_ids_);
  data.models_ = std::move(model_ids_);
  data.scenarios_ = std::move(scenario_ids_);
  for (int i = 0; i < static_cast<int>(data.models_.size()); ++i)
    data.model_idx_.emplace(data.models_[static_cast<std::size_t>(i)], i);
  for (int i = 0; i < static_cast<int>(data.scenarios_.size()); ++i)
    data.scenario_idx_.emplace(data.scenarios_[static_cast<std::size_t>(i)], i);

  std::vector<int> sub_order(subs_.size());
  std::iota(sub_order.begin(), sub_order.end(), 0);
  std::sort(sub_order.begin(), sub_order.end(), [this](int a, int b) {
    return subs_[static_cast<std::size_t>(a)].id < subs_[static_cast<std::size_t>(b)].id;
  });

  const std::size_t n_models = data.models_.size();
  data.scenario_subs_.assign(data.scenarios_.size(), {});
  for (int new_idx = 0; new_idx < static_cast<int>(sub_order.size()); ++new_idx) {
    DraftSub& draft = subs_[static_cast<std::size_t>(sub_order[static_cast<std::size_t>(new_idx)])];
    BenchmarkData::Subscenario sub;
    sub.id = draft.id;
    sub.scenario = scenario_remap[static_cast<std::size_t>(draft.scenario)];
    const std::vector<int> example_remap = sort_remap(draft.examples);
    const std::vector<int> prompt_remap = sort_remap(draft.prompts);
    sub.examples = std::move(draft.examples);
    sub.prompts = std::move(draft.prompts);

    const std::size_t n_ex = sub.examples.size();
    const std::size_t n_pr = sub.prompts.size();
    sub.cells.assign(n_ex * n_pr * n_models, detail::kAbsent);
    for (const DraftEntry& entry : draft.entries) {
      const std::size_t m = static_cast<std::size_t>(model_remap[static_cast<std::size_t>(entry.model)]);
      const std::size_t e = static_cast<std::size_t>(example_remap[static_cast<std::size_t>(entry.example)]);
      const std::size_t p = static_cast<std::size_t>(prompt_remap[static_cast<std::size_t>(entry.prompt)]);
      double& cell = sub.cells[(e * n_pr + p) * n_models + m];
      if (detail::present(cell))
        fail(Errc::DuplicateRecord,
             "duplicate record for (" + data.models_[m] + ", " + sub.id +
                 ", " + sub.prompts[p] + ", " + sub.examples[e] + ")" +
                 at(entry.line));
      cell = entry.score;
      data.record_count_ += 1;
    }
    draft.entries.clear();
    draft.entries.shrink_to_fit();

    // Derived aggregates for the resampling hot paths.
    sub.example_sums.assign(n_ex * n_models, 0.0);
    sub.example_counts.assign(n_ex * n_models, 0.0f);
    sub.model_present.assign(n_models, 0);
    sub.model_sum.assign(n_models, 0.0);
    sub.model_count.assign(n_models, 0.0);
    sub.full_coverage = true;
    for (std::size_t e = 0; e < n_ex; ++e) {
      for (std::size_t p = 0; p < n_pr; ++p) {
        const double* row = sub.cells.data() + (e * n_pr + p) * n_models;
        for (std::size_t m = 0; m < n_models; ++m) {
          if (detail::present(row[m])) {
            sub.example_sums[e * n_models + m] += row[m];
            sub.example_counts[e * n_models + m] += 1.0f;
            sub.model_present[m] = 1;
            sub.model_sum[m] += row[m];
            sub.model_count[m] += 1.0;
          } else {
            sub.full_coverage = false;
          }
        }
      }
    }
    data.scenario_subs_[static_cast<std::size_t>(sub.scenario)].push_back(new_idx);
    data.sub_idx_.emplace(sub.id, new_idx);
    data.subs_.push_back(std::move(sub));
  }
  return data;
}

// ---------------------------------------------------------------------------
// File I/O

enum class FileFormat { delimited, record_lines };

inline const char* const kSchemaColumns[6] = {
    "model", "scenario", "subscenario", "prompt_id", "example_id", "score"};

namespace detail {

inline double parse_score(const std::string& text, std::size_t line) {
  double value = 0.0;
  if (!parse_double(text, value))
    fail(Errc::MalformedRow,
         "unparseable score '" + text + "' (line " + std::to_string(line) + ")");
  if (!std::isfinite(value))
    fail(Errc::MalformedRow,
         "non-finite score '" + text + "' (line " + std::to_string(line) + ")");
  return value;
}

inline void add_row(DatasetDraft& draft, const std::string& model,
                    const std::string& scenario, const std::string& sub,
                    const std::string& prompt, const std::string& example,
                    double score, std::size_t line) {
  for (const std::string* id : {&model, &scenario, &sub, &prompt, &example})
    if (id->empty())
      fail(Errc::MalformedRow,
           "empty identifier (line " + std::to_string(line) + ")");
  const int m = draft.intern_model(model);
  const int s = draft.intern_sub(scenario, sub, line);
  const int e = draft.intern_example(s, example);
  const int p = draft.intern_prompt(s, prompt);
  draft.add(m, s, e, p, score, line);
}

inline void load_delimited(std::istream& in, DatasetDraft& draft) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      const auto cells = split_csv_line(line);
      if (cells.size() != 6 ||
          !std::equal(cells.begin(), cells.end(), kSchemaColumns))
        fail(Errc::MalformedRow,
             "header must be 'model,scenario,subscenario,prompt_id,example_id,score'");
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 6)
      fail(Errc::MalformedRow, "expected 6 columns, got " +
                                   std::to_string(cells.size()) + " (line " +
                                   std::to_string(line_no) + ")");
    add_row(draft, cells[0], cells[1], cells[2], cells[3], cells[4],
            parse_score(cells[5], line_no), line_no);
  }
  if (!have_header) fail(Errc::EmptyDataset, "empty file");
}

inline void load_record_lines(std::istream& in, DatasetDraft& draft) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object())
      fail(Errc::MalformedRow,
           "invalid record (line " + std::to_string(line_no) + ")");
    for (const char* key : kSchemaColumns)
      if (!obj.contains(key))
        fail(Errc::MalformedRow, "missing key '" + std::string(key) +
                                     "' (line " + std::to_string(line_no) + ")");
    if (!obj["score"].is_number())
      fail(Errc::MalformedRow,
           "non-numeric score (line " + std::to_string(line_no) + ")");
    const double score = obj["score"].get<double>();
    if (!std::isfinite(score))
      fail(Errc::MalformedRow,
           "non-finite score (line " + std::to_string(line_no) + ")");
    auto str = [&obj, line_no](const char* key) -> std::string {
      if (!obj[key].is_string())
        fail(Errc::MalformedRow, "key '" + std::string(key) +
                                     "' must be a string (line " +
                                     std::to_string(line_no) + ")");
      return obj[key].get<std::string>();
    };
    add_row(draft, str("model"), str("scenario"), str("subscenario"),
            str("prompt_id"), str("example_id"), score, line_no);
  }
}

}  // namespace detail

inline BenchmarkData load_results(std::istream& in, FileFormat format) {
  DatasetDraft draft;
  if (format == FileFormat::delimited)
    detail::load_delimited(in, draft);
  else
    detail::load_record_lines(in, draft);
  return std::move(draft).finalize();
}

inline BenchmarkData load_results(const std::filesystem::path& path,
                                  FileFormat format) {
  std::ifstream in(path);
  if (!in) fail(Errc::InvalidArgument, "cannot open '" + path.string() + "'");
  return load_results(in, format);
}

/// Infers record_lines from a .jsonl/.ndjson extension, delimited otherwise.
inline FileFormat guess_format(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".ndjson") ? FileFormat::record_lines
                                               : FileFormat::delimited;
}

/// Canonical row order: model, then subscenario, then example, then prompt.
template <typename Fn>
void for_each_record(const BenchmarkData& data, Fn&& fn) {
  for (int m = 0; m < data.n_models(); ++m) {
    for (int s = 0; s < data.n_subs(); ++s) {
      const auto& sub = data.sub(s);
      for (std::size_t e = 0; e < sub.n_examples(); ++e) {
        for (std::size_t p = 0; p < sub.n_prompts(); ++p) {
          const double v = data.score(m, s, static_cast<int>(e), static_cast<int>(p));
          if (!detail::present(v)) continue;
          fn(data.model(m), data.scenario(sub.scenario), sub.id,
             sub.prompts[p], sub.examples[e], v);
        }
      }
    }
  }
}

inline void write_delimited(const BenchmarkData& data, std::ostream& out) {
  out << "model,scenario,subscenario,prompt_id,example_id,score\n";
  for_each_record(data, [&out](const std::string& m, const std::string& sc,
                               const std::string& sub, const std::string& p,
                               const std::string& e, double score) {
    out << m << ',' << sc << ',' << sub << ',' << p << ',' << e << ','
        << format_double(score) << '\n';
  });
}

inline void write_record_lines(const BenchmarkData& data, std::ostream& out) {
  for_each_record(data, [&out](const std::string& m, const std::string& sc,
                               const std::string& sub, const std::string& p,
                               const std::string& e, double score) {
    nlohmann::ordered_json obj;
    obj["model"] = m;
    obj["scenario"] = sc;
    obj["subscenario"] = sub;
    obj["prompt_id"] = p;
    obj["example_id"] = e;
    obj["score"] = score;
    out << obj.dump() << '\n';
  });
}

inline std::vector<ScoreRecord> records(const BenchmarkData& data) {
  std::vector<ScoreRecord> out;
  out.reserve(data.record_count());
  for_each_record(data, [&out](const std::string& m, const std::string& sc,
                               const std::string& sub, const std::string& p,
                               const std::string& e, double score) {
    out.push_back(ScoreRecord{m, sc, sub, p, e, score});
  });
  return out;
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
  std::size_t record_count = 0;
  std::size_t model_count = 0;
  std::size_t scenario_count = 0;
  std::size_t subscenario_count = 0;
  std::size_t example_count = 0;  // distinct (subscenario, example) pairs
  std::size_t prompt_count = 0;   // distinct (subscenario, prompt) pairs
  std::vector<std::pair<std::string, std::string>> missing_pairs;
  std::vector<std::string> warnings;
};

/// Reports, never throws: whole-(model, subscenario) omissions, partial
/// example coverage, and subscenarios that mix scores inside and outside
/// [0, 1] (a common sign of percent/fraction unit mix-ups).
inline ValidationReport validate(const BenchmarkData& data) {
  ValidationReport report;
  report.record_count = data.record_count();
  report.model_count = static_cast<std::size_t>(data.n_models());
  report.scenario_count = static_cast<std::size_t>(data.n_scenarios());
  report.subscenario_count = static_cast<std::size_t>(data.n_subs());

  for (int s = 0; s < data.n_subs(); ++s) {
    const auto& sub = data.sub(s);
    report.example_count += sub.n_examples();
    report.prompt_count += sub.n_prompts();

    bool saw_inside = false, saw_outside = false;
    for (double cell : sub.cells) {
      if (!detail::present(cell)) continue;
      if (cell >= 0.0 && cell <= 1.0)
        saw_inside = true;
      else
        saw_outside = true;
    }
    const std::size_t full = sub.n_examples() * sub.n_prompts();
    for (int m = 0; m < data.n_models(); ++m) {
      if (!sub.model_present[static_cast<std::size_t>(m)]) {
        report.missing_pairs.emplace_back(data.model(m), sub.id);
        continue;
      }
      // Count distinct examples covered by this model.
      std::size_t covered = 0;
      for (std::size_t e = 0; e < sub.n_examples(); ++e)
        if (sub.example_counts[e * static_cast<std::size_t>(data.n_models()) +
                               static_cast<std::size_t>(m)] > 0.0f)
          ++covered;
      if (covered < sub.n_examples())
        report.warnings.push_back(
            "partial coverage: (" + data.model(m) + ", " + sub.id + ") has " +
            std::to_string(covered) + "/" + std::to_string(sub.n_examples()) +
            " examples");
      else if (sub.model_count[static_cast<std::size_t>(m)] <
               static_cast<double>(full))
        report.warnings.push_back("partial coverage: (" + data.model(m) +
                                  ", " + sub.id +
                                  ") is missing prompt/example cells");
    }
    if (saw_inside && saw_outside)
      report.warnings.push_back("mixed score scale: subscenario '" + sub.id +
                                "' has scores both inside and outside [0,1]");
  }
  return report;
}

}  // namespace benchrel
