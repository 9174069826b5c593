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

#include "benchrel/rank_metrics.hpp"
#include "oracles.hpp"

using namespace benchrel;
using Catch::Matchers::WithinAbs;

namespace {

Ranking make_ranking(std::vector<std::string> order) {
  Ranking r;
  r.scores.assign(order.size(), 0.0);
  r.order = std::move(order);
  return r;
}

Ranking reversed(const Ranking& r) {
  Ranking out = r;
  std::reverse(out.order.begin(), out.order.end());
  return out;
}

}  // namespace

TEST_CASE("kendall tau anchors") {
  const Ranking r = make_ranking({"a", "b", "c", "d", "e"});
  CHECK(kendall_tau(r, r) == 1.0);
  CHECK(kendall_tau(r, reversed(r)) == -1.0);

  // n = 4, one adjacent transposition: 5 concordant, 1 discordant of 6.
  const Ranking r4 = make_ranking({"a", "b", "c", "d"});
  const Ranking r4_swap = make_ranking({"a", "c", "b", "d"});
  CHECK(kendall_tau(r4, r4_swap) == (5.0 - 1.0) / 6.0);
}

TEST_CASE("kendall tau rejects mismatched domains") {
  const Ranking a = make_ranking({"a", "b"});
  const Ranking b = make_ranking({"a", "c"});
  CHECK_THROWS_AS(kendall_tau(a, b), Error);
  const Ranking c = make_ranking({"a", "b", "c"});
  CHECK_THROWS_AS(kendall_tau(a, c), Error);
}

TEST_CASE("weighted kendall anchors and top emphasis") {
  const Ranking r = make_ranking({"a", "b", "c", "d", "e"});
  CHECK(weighted_kendall_tau(r, r) == 1.0);
  CHECK(weighted_kendall_tau(r, reversed(r)) == -1.0);

  const Ranking top_swap = make_ranking({"b", "a", "c", "d", "e"});
  const Ranking bottom_swap = make_ranking({"a", "b", "c", "e", "d"});
  CHECK(weighted_kendall_tau(r, top_swap) < weighted_kendall_tau(r, bottom_swap));
  // The unweighted correlation cannot tell them apart.
  CHECK(kendall_tau(r, top_swap) == kendall_tau(r, bottom_swap));
}

TEST_CASE("rank correlations are symmetric and match enumeration oracles") {
  Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(19));
    const Ranking a = oracle::random_ranking(rng, n);
    Ranking b = a;
    for (int i = n - 1; i > 0; --i)
      std::swap(b.order[static_cast<std::size_t>(i)],
                b.order[rng.below(static_cast<std::uint64_t>(i + 1))]);

    const double tau = kendall_tau(a, b);
    CHECK(tau == kendall_tau(b, a));
    CHECK(tau == oracle::kendall(a, b));

    const double wtau = weighted_kendall_tau(a, b);
    CHECK(wtau == weighted_kendall_tau(b, a));
    CHECK_THAT(wtau, WithinAbs(oracle::weighted_kendall(a, b), 1e-14));
    CHECK(wtau >= -1.0);
    CHECK(wtau <= 1.0);
  }
}

TEST_CASE("cluster switch detects inversions of cluster endpoints") {
  const Ranking abc = make_ranking({"A", "B", "C"});
  for (int anchor = 1; anchor <= 2; ++anchor)
    for (int size = 2; anchor + size <= 4; ++size)
      CHECK(cluster_switch(abc, abc, anchor, size) == 0);

  CHECK(cluster_switch(abc, make_ranking({"B", "A", "C"}), 1, 2) == 1);

  const Ranking abcd = make_ranking({"A", "B", "C", "D"});
  CHECK(cluster_switch(abcd, make_ranking({"C", "B", "A", "D"}), 1, 3) == 1);
  CHECK(cluster_switch(abcd, make_ranking({"C", "B", "A", "D"}), 2, 3) == 0);

  CHECK_THROWS_AS(cluster_switch(abc, abc, 3, 2), Error);
  CHECK_THROWS_AS(cluster_switch(abc, abc, 1, 1), Error);
  CHECK_THROWS_AS(cluster_switch(abc, abc, 0, 2), Error);
}

TEST_CASE("mwr similarity is one minus the mean absolute difference") {
  ScoreTable s1, s2;
  s1.models = s2.models = {"A", "B"};
  s1.values = {0.6, 0.4};
  s2.values = {0.5, 0.5};
  const MwrSimilarity sim = mwr_similarity(s1, s2);
  CHECK_THAT(sim.similarity, WithinAbs(0.9, 1e-12));
  REQUIRE(sim.per_model.size() == 2);
  CHECK(sim.per_model[0].first == "A");
  CHECK_THAT(sim.per_model[0].second, WithinAbs(0.1, 1e-12));

  CHECK(mwr_similarity(s1, s1).similarity == 1.0);

  ScoreTable other;
  other.models = {"A", "C"};
  other.values = {0.5, 0.5};
  CHECK_THROWS_AS(mwr_similarity(s1, other), Error);
}

TEST_CASE("mwr similarity stays in the unit interval") {
  Rng rng(81);
  for (int trial = 0; trial < 100; ++trial) {
    ScoreTable s1, s2;
    for (int i = 0; i < 5; ++i) {
      s1.models.push_back("m" + std::to_string(i));
      s2.models.push_back("m" + std::to_string(i));
      s1.values.push_back(rng.uniform01());
      s2.values.push_back(rng.uniform01());
    }
    const double v = mwr_similarity(s1, s2).similarity;
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}
