#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "flicker/dropout/dropout.hpp"

using namespace flicker;

namespace {

// Observation with counts[l] entities of type l (type 0 = agents), ids in row order.
Observation synthetic(const std::vector<int>& counts) {
  Observation o;
  std::size_t n = 0;
  for (int c : counts) n += static_cast<std::size_t>(c);
  o.features = Tensor::matrix(n, counts.size() + 4);
  std::size_t r = 0;
  for (std::size_t l = 0; l < counts.size(); ++l) {
    for (int i = 0; i < counts[l]; ++i, ++r) {
      o.features(r, l) = 1.0;
      o.features(r, counts.size()) = static_cast<double>(r);
      o.ids.push_back(static_cast<std::int64_t>(r));
      o.kinds.push_back(static_cast<int>(l));
      if (l == 0) {
        o.agent_rows.push_back(r);
        o.last_actions.push_back({});
      }
    }
  }
  return o;
}

}  // namespace

TEST_CASE("zero delta leaves the view unchanged") {
  Observation o = synthetic({3, 4});
  TokenMatrix x = agent_view(o, 1, 2);
  Rng rng(1);
  TokenMatrix y = ed(x, std::vector<int>{0, 0}, rng);
  CHECK(y.ids == x.ids);
  CHECK(y.rows == x.rows);
  CHECK(y.self == x.self);
  CHECK(y.type_counts == x.type_counts);
}

TEST_CASE("each adversary is dropped at the hypergeometric rate") {
  Observation o = synthetic({1, 5});
  TokenMatrix x = agent_view(o, 0, 2);
  Rng rng(2);
  std::map<std::int64_t, int> dropped;
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    TokenMatrix y = ed(x, std::vector<int>{0, 2}, rng);
    REQUIRE(y.type_counts[1] == 3);
    std::set<std::int64_t> kept(y.ids.begin(), y.ids.end());
    for (std::int64_t id = 1; id <= 5; ++id) dropped[id] += kept.count(id) ? 0 : 1;
    // kept rows stay in input order
    for (std::size_t i = 1; i < y.ids.size(); ++i) REQUIRE(y.ids[i - 1] < y.ids[i]);
  }
  double chi2 = 0.0;
  for (const auto& [id, n] : dropped) {
    CHECK(std::fabs(n / double(trials) - 0.4) < 0.01);
    const double expect = 0.4 * trials;
    chi2 += (n - expect) * (n - expect) / expect;
  }
  CHECK(chi2 < 13.277);  // 4 dof, alpha 0.01
}

TEST_CASE("dropping all other agents keeps only the viewer") {
  Observation o = synthetic({4, 2});
  TokenMatrix x = agent_view(o, 2, 2);
  Rng rng(3);
  TokenMatrix y = ed(x, std::vector<int>{3, 0}, rng);
  CHECK(y.type_counts[0] == 1);
  CHECK(y.ids[y.self] == o.ids[o.agent_rows[2]]);
  CHECK_THROWS_AS(ed(x, std::vector<int>{4, 0}, rng), std::invalid_argument);
  CHECK_THROWS_AS(ed(x, std::vector<int>{0, 3}, rng), std::invalid_argument);
  CHECK_THROWS_AS(ed(x, std::vector<int>{0}, rng), std::invalid_argument);
}

TEST_CASE("daed_delta clamps per type") {
  CHECK(daed_delta(std::vector<int>{5, 5}, std::vector<int>{3, 3}) == std::vector<int>{2, 2});
  CHECK(daed_delta(std::vector<int>{2, 3}, std::vector<int>{3, 3}) == std::vector<int>{0, 0});
  CHECK(daed_delta(std::vector<int>{7, 2}, std::vector<int>{3, 3}) == std::vector<int>{4, 0});
}

TEST_CASE("train schedule draws episode counts uniformly") {
  const std::vector<int> n_train{3, 3};
  Rng rng(4);
  std::map<std::vector<int>, int> freq;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++freq[FlickerSchedule(n_train, rng).episode_counts()];
  REQUIRE(freq.size() == 9);
  double chi2 = 0.0;
  for (const auto& [k, n] : freq) chi2 += std::pow(n - draws / 9.0, 2) / (draws / 9.0);
  CHECK(chi2 < 20.090);
  CHECK_THROWS_AS(FlickerSchedule(std::vector<int>{0, 2}, rng), std::invalid_argument);
}

TEST_CASE("train deltas are uniform on 0..N^ and serially uncorrelated") {
  Rng rng(5);
  const std::vector<int> ones{1, 1};
  FlickerSchedule s(ones, rng);
  REQUIRE(s.episode_counts() == ones);
  std::vector<double> series;
  for (int i = 0; i < 20000; ++i) {
    auto d = s.sample_delta(rng);
    CHECK((d[1] == 0 || d[1] == 1));
    series.push_back(d[1]);
  }
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= series.size();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    den += (series[i] - mean) * (series[i] - mean);
    if (i + 1 < series.size()) num += (series[i] - mean) * (series[i + 1] - mean);
  }
  CHECK(std::fabs(num / den) < 0.03);
  CHECK(std::fabs(mean - 0.5) < 0.02);
}

TEST_CASE("cap_delta keeps the viewer") {
  CHECK(cap_delta(std::vector<int>{3, 3}, std::vector<int>{3, 2}, 0) == std::vector<int>{2, 2});
  CHECK(cap_delta(std::vector<int>{1, 0}, std::vector<int>{1, 2}, 0) == std::vector<int>{0, 0});
}

TEST_CASE("inference step") {
  const std::vector<int> n_train{3, 3};
  SUBCASE("in-domain composition is never dropped") {
    Observation o = synthetic({3, 2});
    Rng rng(6);
    for (int i = 0; i < 100; ++i) {
      TokenMatrix y = flicker_infer_step(o, static_cast<std::size_t>(i % 3), n_train, true, 2, 0, rng);
      CHECK(y.ids == o.ids);
    }
  }
  SUBCASE("five agents against a trained maximum of three") {
    Observation o = synthetic({5, 5});
    Rng rng(7);
    bool disagree = false;
    for (int t = 0; t < 50; ++t) {
      std::vector<std::vector<std::int64_t>> views;
      for (std::size_t a = 0; a < 5; ++a) {
        TokenMatrix y = flicker_infer_step(o, a, n_train, true, 2, 0, rng);
        CHECK(y.type_counts == std::vector<int>{3, 3});
        CHECK(y.ids[y.self] == o.ids[o.agent_rows[a]]);
        views.push_back(y.ids);
      }
      for (std::size_t a = 1; a < 5; ++a) disagree = disagree || views[a] != views[0];
    }
    CHECK(disagree);
  }
  SUBCASE("without domain awareness the drop count varies") {
    Observation o = synthetic({2, 4});
    Rng rng(8);
    std::set<int> sizes;
    for (int t = 0; t < 200; ++t) {
      TokenMatrix y = flicker_infer_step(o, 0, n_train, false, 2, 0, rng);
      CHECK(y.ids[y.self] == o.ids[o.agent_rows[0]]);
      sizes.insert(y.type_counts[1]);
    }
    CHECK(sizes == std::set<int>{0, 1, 2, 3, 4});
  }
}

TEST_CASE("DAED restores in-domain counts and keeps the viewer") {
  Rng rng(9);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::vector<int> n_train{static_cast<int>(rng.uniform_int(1, 4)), static_cast<int>(rng.uniform_int(1, 4)),
                                   static_cast<int>(rng.uniform_int(1, 4))};
    std::vector<int> counts;
    for (int n : n_train) counts.push_back(static_cast<int>(rng.uniform_int(0, 3 * n)));
    counts[0] = std::max(counts[0], 1);
    Observation o = synthetic(counts);
    const auto agent = static_cast<std::size_t>(rng.uniform_int(0, counts[0] - 1));
    TokenMatrix y = flicker_infer_step(o, agent, n_train, true, 3, 0, rng);
    for (std::size_t l = 0; l < 3; ++l) REQUIRE(y.type_counts[l] == std::min(counts[l], n_train[l]));
    REQUIRE(y.ids[y.self] == o.ids[o.agent_rows[agent]]);
  }
}

TEST_CASE("proposition bound fixtures") {
  Rng rng(10);
  auto zero = prop1_verify(4, 5, 0, 1000, rng);
  CHECK(zero.mean == 0.0);
  CHECK(zero.bound == 0.0);
  auto all = prop1_verify(4, 5, 5, 1000, rng);
  CHECK(all.mean == 0.0);
  CHECK(all.bound == 0.0);
  auto one = prop1_verify(4, 5, 1, 100000, rng);
  CHECK(one.bound == 1.0);
  CHECK(one.mean <= one.bound + 3.0 * one.standard_error);
  CHECK_THROWS_AS(prop1_verify(0, 5, 1, 10, rng), std::invalid_argument);
  CHECK_THROWS_AS(prop1_verify(2, 5, 6, 10, rng), std::invalid_argument);
}

TEST_CASE("proposition estimate matches an exact small-case enumeration") {
  // N_A = 2, N = 3, Delta = 1: each agent drops one of three entities.
  // Same entity (prob 1/3): d = (2,0,0) -> |1-1/3| + 2|0-1/3| = 4/3.
  // Different (prob 2/3): d = (1,1,0) -> 2|1/2-1/3| + |0-1/3| = 2/3.
  const double exact = (1.0 / 3.0) * (4.0 / 3.0) + (2.0 / 3.0) * (2.0 / 3.0);
  Rng rng(11);
  auto est = prop1_verify(2, 3, 1, 200000, rng);
  CHECK(std::fabs(est.mean - exact) < 4.0 * est.standard_error);
}
