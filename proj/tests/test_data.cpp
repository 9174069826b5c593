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

#include <algorithm>
#include <sstream>

#include "benchrel/data.hpp"
#include "benchrel/rng.hpp"
#include "oracles.hpp"

using namespace benchrel;

namespace {

BenchmarkData load_csv(const std::string& text) {
  std::istringstream in(text);
  return load_results(in, FileFormat::delimited);
}

const char* kFixture =
    "model,scenario,subscenario,prompt_id,example_id,score\n"
    "A,S,s1,p1,e1,0.25\n"
    "A,S,s1,p1,e2,0.5\n"
    "B,S,s1,p1,e1,0.75\n"
    "B,S,s1,p1,e2,1\n";

}  // namespace

TEST_CASE("loading a complete small file indexes everything") {
  const BenchmarkData data = load_csv(kFixture);
  CHECK(data.n_models() == 2);
  CHECK(data.n_scenarios() == 1);
  CHECK(data.n_subs() == 1);
  CHECK(data.sub(0).n_examples() == 2);
  CHECK(data.sub(0).n_prompts() == 1);
  CHECK(data.record_count() == 4);
  CHECK(data.model(0) == "A");
  CHECK(data.score(0, 0, 0, 0) == 0.25);
  CHECK(data.score(1, 0, 1, 0) == 1.0);

  const Taxonomy tax = data.taxonomy();
  REQUIRE(tax.scenarios == std::vector<std::string>{"S"});
  CHECK(tax.subscenarios_of.at("S") == std::vector<std::string>{"s1"});
}

TEST_CASE("header-only file is an empty dataset") {
  CHECK_THROWS_MATCHES(
      load_csv("model,scenario,subscenario,prompt_id,example_id,score\n"),
      Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
        return e.code() == Errc::EmptyDataset;
      }));
}

TEST_CASE("duplicate quadruple is rejected with its line") {
  const std::string text = std::string(kFixture) + "A,S,s1,p1,e1,0.9\n";
  try {
    load_csv(text);
    FAIL("expected DuplicateRecord");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DuplicateRecord);
    CHECK(std::string(e.what()).find("line 6") != std::string::npos);
  }
}

TEST_CASE("malformed rows are rejected") {
  auto code_of = [](const std::string& text) {
    try {
      load_csv(text);
      return Errc::InvalidArgument;
    } catch (const Error& e) {
      return e.code();
    }
  };
  const std::string header = "model,scenario,subscenario,prompt_id,example_id,score\n";
  CHECK(code_of(header + "A,S,s1,p1,e1\n") == Errc::MalformedRow);          // arity
  CHECK(code_of(header + "A,S,s1,p1,e1,zebra\n") == Errc::MalformedRow);    // parse
  CHECK(code_of(header + "A,S,s1,p1,e1,inf\n") == Errc::MalformedRow);      // finite
  CHECK(code_of(header + "A,S,s1,p1,e1,nan\n") == Errc::MalformedRow);      // finite
  CHECK(code_of(header + ",S,s1,p1,e1,1\n") == Errc::MalformedRow);         // empty id
  CHECK(code_of("model,scenario,oops\nA,S,s1,p1,e1,1\n") == Errc::MalformedRow);
}

TEST_CASE("one subscenario under two scenarios is a taxonomy conflict") {
  const std::string text =
      "model,scenario,subscenario,prompt_id,example_id,score\n"
      "A,S1,shared,p1,e1,0.5\n"
      "A,S2,shared,p1,e2,0.5\n";
  CHECK_THROWS_MATCHES(load_csv(text), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == Errc::TaxonomyConflict;
                       }));
}

TEST_CASE("row order does not affect the loaded dataset") {
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    oracle::RandomInstance inst = oracle::random_instance(rng);
    std::ostringstream forward;
    write_delimited(inst.data, forward);

    // Reload from a shuffled row order.
    std::istringstream lines_in(forward.str());
    std::string header, line;
    std::getline(lines_in, header);
    std::vector<std::string> rows;
    while (std::getline(lines_in, line)) rows.push_back(line);
    for (std::size_t i = rows.size(); i > 1; --i)
      std::swap(rows[i - 1], rows[rng.below(i)]);
    std::string shuffled = header + "\n";
    for (const auto& r : rows) shuffled += r + "\n";

    CHECK(load_csv(shuffled) == inst.data);
  }
}

TEST_CASE("delimited and record-lines round trips reproduce the dataset") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    oracle::RandomInstance inst = oracle::random_instance(rng);

    std::ostringstream csv;
    write_delimited(inst.data, csv);
    std::istringstream csv_in(csv.str());
    CHECK(load_results(csv_in, FileFormat::delimited) == inst.data);

    std::ostringstream jsonl;
    write_record_lines(inst.data, jsonl);
    std::istringstream jsonl_in(jsonl.str());
    CHECK(load_results(jsonl_in, FileFormat::record_lines) == inst.data);
  }
}

TEST_CASE("record-lines rejects broken rows") {
  auto code_of = [](const std::string& text) {
    try {
      std::istringstream in(text);
      load_results(in, FileFormat::record_lines);
      return Errc::InvalidArgument;
    } catch (const Error& e) {
      return e.code();
    }
  };
  CHECK(code_of("not json\n") == Errc::MalformedRow);
  CHECK(code_of(R"({"model":"A"})" "\n") == Errc::MalformedRow);
  CHECK(code_of(R"({"model":"A","scenario":"S","subscenario":"s1",)"
                R"("prompt_id":"p1","example_id":"e1","score":"high"})" "\n") ==
        Errc::MalformedRow);
}

TEST_CASE("indexed example sets equal the union over models") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    oracle::RandomInstance inst = oracle::random_instance(rng);
    for (int s = 0; s < inst.data.n_subs(); ++s) {
      std::set<std::string> from_records;
      for (const auto& r : inst.records)
        if (r.subscenario == inst.data.sub(s).id) from_records.insert(r.example_id);
      const auto& indexed = inst.data.sub(s).examples;
      CHECK(std::set<std::string>(indexed.begin(), indexed.end()) == from_records);
    }
  }
}

TEST_CASE("validation of a complete dataset is clean") {
  const ValidationReport report = validate(load_csv(kFixture));
  CHECK(report.record_count == 4);
  CHECK(report.model_count == 2);
  CHECK(report.missing_pairs.empty());
  CHECK(report.warnings.empty());
}

TEST_CASE("validation reports whole-pair omissions and partial coverage") {
  const std::string text =
      "model,scenario,subscenario,prompt_id,example_id,score\n"
      "A,S,s1,p1,e1,0.25\n"
      "A,S,s1,p1,e2,0.5\n"
      "A,S,s2,p1,e1,0.5\n"
      "B,S,s2,p1,e1,0.75\n";
  const ValidationReport report = validate(load_csv(text));
  REQUIRE(report.missing_pairs.size() == 1);
  CHECK(report.missing_pairs[0] == std::make_pair(std::string("B"), std::string("s1")));
  CHECK(report.warnings.empty());

  // Model B present for e1 only in s1.
  const std::string partial = text + "B,S,s1,p1,e1,0.9\n";
  const ValidationReport report2 = validate(load_csv(partial));
  CHECK(report2.missing_pairs.empty());
  REQUIRE(report2.warnings.size() == 1);
  CHECK(report2.warnings[0].find("partial coverage") != std::string::npos);
  CHECK(report2.warnings[0].find("B") != std::string::npos);
  CHECK(report2.warnings[0].find("s1") != std::string::npos);
}

TEST_CASE("mixing scores inside and outside the unit interval warns") {
  const std::string text =
      "model,scenario,subscenario,prompt_id,example_id,score\n"
      "A,S,s1,p1,e1,0.88\n"
      "B,S,s1,p1,e1,88\n";
  const ValidationReport report = validate(load_csv(text));
  REQUIRE(report.warnings.size() == 1);
  CHECK(report.warnings[0].find("mixed score scale") != std::string::npos);

  // Consistently out-of-unit scores are fine.
  const std::string consistent =
      "model,scenario,subscenario,prompt_id,example_id,score\n"
      "A,S,s1,p1,e1,12\n"
      "B,S,s1,p1,e1,8\n";
  CHECK(validate(load_csv(consistent)).warnings.empty());
}

TEST_CASE("crlf line endings are accepted") {
  const std::string text =
      "model,scenario,subscenario,prompt_id,example_id,score\r\n"
      "A,S,s1,p1,e1,0.5\r\n"
      "B,S,s1,p1,e1,0.25\r\n";
  const BenchmarkData data = load_csv(text);
  CHECK(data.record_count() == 2);
  CHECK(data.score(0, 0, 0, 0) == 0.5);
}
