#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "rankgauntlet/error.hpp"
#include "rankgauntlet/vulnid.hpp"

using namespace rankgauntlet;

namespace {

Ranking random_ranking(int n, std::mt19937_64& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 1);
  std::shuffle(order.begin(), order.end(), rng);
  return Ranking(0, order);
}

BenignEstimate estimate_of(std::span<const Ranking> benign) {
  const auto a = default_scale(benign.front().size());
  const auto w = aggregated_reputation(aggregate(benign), a);
  BenignEstimate est;
  est.values.assign(w.values.begin(), w.values.end());
  return est;
}

bool includes(const std::vector<int>& big, const std::vector<int>& small) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

}  // namespace

TEST_CASE("bounds on a hand-built instance") {
  // Three benign clients, n = 6, k = 50.
  const std::vector<Ranking> benign{Ranking(0, {1, 2, 3, 4, 5, 6}), Ranking(0, {2, 1, 3, 5, 4, 6}),
                                    Ranking(0, {1, 3, 2, 4, 6, 5})};
  const auto est = estimate_of(benign);
  CHECK(est.values == std::vector<double>{4, 6, 8, 13, 15, 17});
  const auto range = vulnerable_bounds(est, 1.0, default_scale(6), 50.0);
  // Outside the top-3: max 8; inside: min 13; budget m (a_n - a_1) = 5.
  CHECK(range.lower == doctest::Approx(3.0));
  CHECK(range.upper == doctest::Approx(18.0));
  CHECK(range.edge_ids == std::vector<int>{1, 2, 3, 4, 5, 6});
  const auto narrow = apply_zeta(range, 0.2);
  CHECK(narrow.lower == doctest::Approx(9.0));
  CHECK(narrow.upper == doctest::Approx(12.0));
  CHECK(narrow.empty());
}

TEST_CASE("zeta arithmetic and validation") {
  VulnerableRange r;
  r.lower = 10.0;
  r.upper = 30.0;
  r.reputations = {5, 12, 16, 20, 24, 29, 31};
  const auto half = apply_zeta(r, 0.5);
  CHECK(half.lower == doctest::Approx(15.0));
  CHECK(half.upper == doctest::Approx(25.0));
  CHECK(half.edge_ids == std::vector<int>{3, 4, 5});
  CHECK(apply_zeta(r, 1.0).edge_ids == std::vector<int>{2, 3, 4, 5, 6});
  CHECK_THROWS_AS(apply_zeta(r, 0.0), Error);
  CHECK_THROWS_AS(apply_zeta(r, 1.5), Error);
}

TEST_CASE("theorem-1 bounds hold under enumeration") {
  const auto res = oracle::theorem1_enumeration(30, 101);
  CHECK(res.passed());
}

TEST_CASE("edge set grows with m and with zeta") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 8);
    std::vector<Ranking> benign;
    for (int u = 0; u < 5; ++u) benign.push_back(random_ranking(n, rng));
    const auto est = estimate_of(benign);
    const auto a = default_scale(n);
    std::vector<int> prev;
    for (double m : {0.0, 0.5, 1.0, 2.0, 3.5}) {
      const auto edges = vulnerable_bounds(est, m, a, 50.0).edge_ids;
      CHECK(includes(edges, prev));
      prev = edges;
    }
    const auto range = vulnerable_bounds(est, 1.0, a, 50.0);
    prev.clear();
    for (double z : {0.1, 0.3, 0.6, 1.0}) {
      const auto edges = apply_zeta(range, z).edge_ids;
      CHECK(includes(edges, prev));
      prev = edges;
    }
  }
}

TEST_CASE("alternative estimate scales the adversary's tally") {
  const std::vector<Ranking> mal{Ranking(0, {2, 1, 3})};
  const auto est = estimate_alternative(mal, 4, default_scale(3));
  CHECK(est.values == std::vector<double>{6, 3, 9});
  CHECK_THROWS_AS(estimate_alternative(std::vector<Ranking>{}, 4, default_scale(3)), Error);
  CHECK_THROWS_AS(estimate_alternative(mal, 1, default_scale(3)), Error);
}

TEST_CASE("historical estimate is exact when everyone resubmits one ranking") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const Ranking r = random_ranking(7, rng);
    const int u_total = 6;
    const std::vector<Ranking> mal{r, r};
    const std::vector<Ranking> benign(4, r);
    const auto est = estimate_historical(r, mal, u_total, default_scale(7), 2);
    CHECK(est.values == estimate_of(benign).values);
  }
  CHECK_THROWS_AS(estimate_historical(Ranking(0, {1, 2}), std::vector<Ranking>{}, 3, default_scale(2), 1), Error);
}

TEST_CASE("vulnerable matrix extraction") {
  const Ranking r(0, {3, 4, 5, 1, 6, 2});
  const std::vector<int> edges{1, 2, 5};
  const auto v = extract_vulnerable(r, edges);
  // Edge 5 at position 3, edge 1 at 4, edge 2 at 6.
  CHECK(v.positions == std::vector<int>{3, 4, 6});
  CHECK(v.column_of_row == std::vector<int>{2, 0, 1});
  const Eigen::MatrixXd d = v.dense();
  CHECK(d(0, 2) == 1.0);
  CHECK(d.sum() == 3.0);
  const IntMatrix full = v.full();
  CHECK(full.sum() == 3);
  CHECK(full(2, 4) == 1);
  CHECK(full(0, 2) == 0);
}

TEST_CASE("estimation accuracy") {
  CHECK(estimation_accuracy(std::vector<int>{1, 2, 3}, std::vector<int>{2, 3, 4, 5}) == doctest::Approx(0.5));
  CHECK(estimation_accuracy(std::vector<int>{}, std::vector<int>{1}) == 0.0);
  CHECK_THROWS_AS(estimation_accuracy(std::vector<int>{1}, std::vector<int>{}), Error);
}
