#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "rankgauntlet/error.hpp"
#include "rankgauntlet/ranking.hpp"

using namespace rankgauntlet;

namespace {

Ranking random_ranking(int n, std::mt19937_64& rng, int layer = 0) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 1);
  std::shuffle(order.begin(), order.end(), rng);
  return Ranking(layer, order);
}

}  // namespace

TEST_CASE("worked example: reputations of [3,4,5,1,6,2]") {
  const Ranking r(0, {3, 4, 5, 1, 6, 2});
  const auto rep = reputation_of(r);
  CHECK(rep.values == std::vector<std::int64_t>{4, 6, 1, 2, 3, 5});
}

TEST_CASE("to_matrix places edge R[i] in row i") {
  const Ranking r(0, {3, 4, 5, 1, 6, 2});
  const auto p = to_matrix(r);
  CHECK(p.columns() == std::vector<int>{3, 4, 5, 1, 6, 2});
  const IntMatrix d = p.dense();
  CHECK(d(0, 2) == 1);
  CHECK(d.sum() == 6);
}

TEST_CASE("invalid rankings and matrices are rejected") {
  CHECK_THROWS_AS(Ranking(0, {1, 1, 2}), Error);
  CHECK_THROWS_AS(Ranking(0, {}), Error);
  CHECK_THROWS_AS(Ranking(0, {0, 1}), Error);
  IntMatrix bad = IntMatrix::Zero(2, 2);
  bad(0, 0) = 1;
  bad(1, 0) = 1;
  CHECK_THROWS_AS(PermutationMatrix::from_dense(bad), Error);
}

TEST_CASE("round trip through the permutation matrix") {
  for (int n = 1; n <= 5; ++n) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 1);
    do {
      const Ranking r(0, order);
      CHECK(from_matrix(to_matrix(r)) == r);
      CHECK(from_matrix(to_matrix(r).dense()) == r);
    } while (std::next_permutation(order.begin(), order.end()));
  }
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const Ranking r = random_ranking(6 + i % 3, rng);
    CHECK(from_matrix(to_matrix(r)) == r);
  }
}

TEST_CASE("aggregate counts agree with the per-position tally") {
  // Two of three clients put edge 3 at the bottom.
  const std::vector<Ranking> fig{Ranking(0, {3, 1, 2, 4}), Ranking(0, {3, 2, 4, 1}), Ranking(0, {1, 3, 2, 4})};
  CHECK(aggregate(fig).counts(0, 2) == 2);

  std::mt19937_64 rng(3);
  for (int u = 1; u <= 5; ++u) {
    std::vector<Ranking> rs;
    for (int i = 0; i < u; ++i) rs.push_back(random_ranking(5, rng));
    const auto s = aggregate(rs);
    for (int i = 0; i < 5; ++i) {
      CHECK(s.counts.row(i).sum() == u);
      CHECK(s.counts.col(i).sum() == u);
    }
  }
}

TEST_CASE("aggregated reputation") {
  const Ranking r(0, {2, 3, 1});
  const std::vector<Ranking> pair{r, r.reversed()};
  const auto w = aggregated_reputation(aggregate(pair), default_scale(3));
  CHECK(w.values == std::vector<std::int64_t>{4, 4, 4});

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Ranking> rs;
    for (int i = 0; i < 3; ++i) rs.push_back(random_ranking(4, rng));
    std::vector<std::int64_t> expect(4, 0);
    for (const auto& x : rs)
      for (int j = 0; j < 4; ++j) expect[static_cast<std::size_t>(j)] += reputation_of(x).values[static_cast<std::size_t>(j)];
    const auto got = aggregated_reputation(aggregate(rs), default_scale(4));
    CHECK(got.values == expect);
    CHECK(std::accumulate(got.values.begin(), got.values.end(), std::int64_t{0}) == 3 * 4 * 5 / 2);
  }
}

TEST_CASE("reversed minority cannot change a unanimous top-3") {
  const Ranking benign(0, {3, 4, 5, 1, 6, 2});
  const std::vector<Ranking> rs{benign, benign, benign.reversed()};
  const auto top = majority_vote(rs).selected_edges(50.0);
  CHECK(top == std::vector<int>{1, 2, 6});
}

TEST_CASE("majority vote matches the argsort-sum oracle") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    const int u = 1 + static_cast<int>(rng() % 5);
    std::vector<Ranking> rs;
    std::vector<std::vector<int>> raw;
    for (int i = 0; i < u; ++i) {
      rs.push_back(random_ranking(n, rng));
      raw.push_back(rs.back().order());
    }
    CHECK(majority_vote(rs).order() == oracle::vote(raw));
  }
}

TEST_CASE("vote properties: single voter, client order") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const Ranking r = random_ranking(7, rng);
    CHECK(majority_vote(std::vector<Ranking>{r}) == r);
    std::vector<Ranking> rs;
    for (int i = 0; i < 5; ++i) rs.push_back(random_ranking(7, rng));
    const Ranking before = majority_vote(rs);
    std::shuffle(rs.begin(), rs.end(), rng);
    CHECK(majority_vote(rs) == before);
  }
}

TEST_CASE("ties go to the smaller edge ID") {
  const Ranking r(0, {1, 2, 3});
  const std::vector<Ranking> rs{r, r.reversed()};
  CHECK(majority_vote(rs).order() == std::vector<int>{1, 2, 3});
}

TEST_CASE("integer trust equals repeating clients") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    std::vector<Ranking> rs;
    std::vector<double> trust;
    std::vector<Ranking> repeated;
    for (int i = 0; i < 3; ++i) {
      rs.push_back(random_ranking(n, rng));
      const int w = static_cast<int>(rng() % 4);
      trust.push_back(w);
      for (int k = 0; k < w; ++k) repeated.push_back(rs.back());
    }
    if (repeated.empty()) {
      CHECK_THROWS_AS(weighted_majority_vote(rs, trust, default_scale(n)), Error);
      continue;
    }
    CHECK(weighted_majority_vote(rs, trust, default_scale(n)) == majority_vote(repeated));
  }
}

TEST_CASE("weighted vote preconditions") {
  const std::vector<Ranking> rs{Ranking(0, {1, 2}), Ranking(0, {2, 1})};
  CHECK_THROWS_AS(weighted_majority_vote(rs, std::vector<double>{1.0}, default_scale(2)), Error);
  CHECK_THROWS_AS(weighted_majority_vote(rs, std::vector<double>{1.0, -1.0}, default_scale(2)), Error);
}

TEST_CASE("selection boundary and supermask") {
  CHECK(selection_boundary(6, 50.0) == 3);
  CHECK(selection_boundary(7, 50.0) == 3);
  CHECK(selection_boundary(10, 100.0) == 0);
  CHECK_THROWS_AS(selection_boundary(6, 0.0), Error);
  CHECK_THROWS_AS(selection_boundary(6, 101.0), Error);
  const Ranking r(0, {3, 4, 5, 1, 6, 2});
  const auto mask = supermask_of(r, 50.0);
  CHECK(mask.popcount() == 3);
  CHECK(mask.bits == std::vector<std::uint8_t>{1, 1, 0, 0, 0, 1});
}

TEST_CASE("text form round trip") {
  const Ranking r(2, {3, 1, 2});
  CHECK(serialize(r) == "2: 3,1,2");
  CHECK(parse_ranking(serialize(r)) == r);
  CHECK_THROWS_AS(parse_ranking("x: 1,2"), Error);
}
