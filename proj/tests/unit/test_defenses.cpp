#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "rankgauntlet/defenses.hpp"
#include "rankgauntlet/error.hpp"

using namespace rankgauntlet;

namespace {

LayerRankings random_client(std::mt19937_64& rng, std::vector<int> sizes = {8, 6}) {
  LayerRankings out;
  for (std::size_t l = 0; l < sizes.size(); ++l) {
    std::vector<int> order(static_cast<std::size_t>(sizes[l]));
    std::iota(order.begin(), order.end(), 1);
    std::shuffle(order.begin(), order.end(), rng);
    out.emplace_back(static_cast<int>(l), order);
  }
  return out;
}

LayerRankings reversed(const LayerRankings& c) {
  LayerRankings out;
  for (const auto& r : c) out.push_back(r.reversed());
  return out;
}

// Benign clients are small perturbations of one ranking; attackers reverse it.
std::vector<LayerRankings> population(int benign, int attackers, std::mt19937_64& rng) {
  const auto base = random_client(rng);
  std::vector<LayerRankings> out;
  for (int i = 0; i < benign; ++i) {
    auto c = base;
    for (auto& r : c) {
      auto order = r.order();
      const auto j = static_cast<std::size_t>(rng() % (order.size() - 1));
      std::swap(order[j], order[j + 1]);
      r = Ranking(r.layer_id(), order);
    }
    out.push_back(c);
  }
  for (int i = 0; i < attackers; ++i) out.push_back(reversed(base));
  return out;
}

}  // namespace

TEST_CASE("defense names round trip") {
  for (auto k : {DefenseKind::kNone, DefenseKind::kMultiKrum, DefenseKind::kAfa, DefenseKind::kFaba, DefenseKind::kDnc,
                 DefenseKind::kFltrust, DefenseKind::kFoolsgold, DefenseKind::kFang, DefenseKind::kIbd})
    CHECK(parse_defense(to_string(k)) == k);
  CHECK_THROWS_AS(parse_defense("median"), Error);
}

TEST_CASE("embedding is centered so reversal negates it") {
  std::mt19937_64 rng(71);
  const auto c = random_client(rng);
  const std::vector<LayerRankings> pair{c, reversed(c)};
  const auto e = embed(pair);
  CHECK(e.cols() == 14);
  CHECK((e.row(0) + e.row(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(cosine(e.row(0).transpose(), e.row(1).transpose()) == doctest::Approx(-1.0));
  CHECK(cosine(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3)) == 0.0);
}

TEST_CASE("filters remove reversed attackers") {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 10; ++trial) {
    const auto clients = population(8, 2, rng);
    const auto e = embed(clients);
    const std::vector<int> benign_ids{0, 1, 2, 3, 4, 5, 6, 7};
    auto mk = multi_krum(e, 2);
    CHECK(mk.kept.size() == 3);
    for (int k : mk.kept) CHECK(k < 8);
    auto fb = faba(e, 2);
    CHECK(fb.kept == benign_ids);
    auto dn = dnc(e, 2, DncParams{});
    CHECK(dn.kept == benign_ids);
    auto ib = ibd(clients, 50.0);
    CHECK(ib.kept == benign_ids);
    auto af = afa(e);
    for (int k : af.kept) CHECK(k < 8);
  }
}

TEST_CASE("unanimous clients: mandated counts and equal weights") {
  std::mt19937_64 rng(79);
  const auto c = random_client(rng);
  const std::vector<LayerRankings> same(10, c);
  const auto e = embed(same);
  CHECK(multi_krum(e, 2).kept.size() == 3);
  CHECK(faba(e, 2).kept.size() == 8);
  CHECK(dnc(e, 2, DncParams{}).kept.size() == 8);
  CHECK(afa(e).kept.size() == 10);
  CHECK(ibd(same, 50.0).kept.size() == 10);
  const auto ft = fltrust(e, e.row(0).transpose());
  for (double t : ft.trust) CHECK(t == doctest::Approx(ft.trust.front()));
  const auto fg = foolsgold(e);
  for (double t : fg.trust) CHECK(t == doctest::Approx(fg.trust.front()));
}

TEST_CASE("relabeling clients permutes the verdict") {
  std::mt19937_64 rng(83);
  auto clients = population(7, 2, rng);
  const auto before = faba(embed(clients), 2).kept;
  std::vector<int> perm(clients.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<LayerRankings> shuffled;
  for (int p : perm) shuffled.push_back(clients[static_cast<std::size_t>(p)]);
  const auto after = faba(embed(shuffled), 2).kept;
  std::vector<int> mapped;
  for (int k : after) mapped.push_back(perm[static_cast<std::size_t>(k)]);
  std::sort(mapped.begin(), mapped.end());
  CHECK(mapped == before);
}

TEST_CASE("FLTrust zeroes clients opposed to the server") {
  std::mt19937_64 rng(89);
  const auto clients = population(4, 1, rng);
  const auto e = embed(clients);
  const auto v = fltrust(e, e.row(0).transpose());
  CHECK(v.trust[4] == 0.0);
  for (int i = 0; i < 4; ++i) CHECK(v.trust[static_cast<std::size_t>(i)] > 0.0);
}

TEST_CASE("FoolsGold down-weights identical sybils") {
  std::mt19937_64 rng(97);
  std::vector<LayerRankings> clients;
  for (int i = 0; i < 5; ++i) clients.push_back(random_client(rng));
  const auto sybil = random_client(rng);
  clients.push_back(sybil);
  clients.push_back(sybil);
  const auto v = foolsgold(embed(clients));
  CHECK(v.trust[5] < *std::min_element(v.trust.begin(), v.trust.begin() + 5));
}

TEST_CASE("IBD depends only on the multiset of overlaps") {
  std::mt19937_64 rng(101);
  auto clients = population(6, 2, rng);
  const auto v1 = ibd(clients, 50.0);
  std::reverse(clients.begin(), clients.end());
  const auto v2 = ibd(clients, 50.0);
  CHECK(v1.kept.size() == v2.kept.size());
  CHECK_THROWS_AS(ibd(std::vector<LayerRankings>(2, clients.front()), 50.0), Error);
}

TEST_CASE("preconditions") {
  std::mt19937_64 rng(103);
  const auto clients = population(4, 1, rng);
  const auto e = embed(clients);
  CHECK_THROWS_AS(multi_krum(e, 1), Error);
  CHECK_THROWS_AS(faba(e, 5), Error);
  DefenseInputs in;
  in.clients = clients;
  in.m = 1;
  CHECK_THROWS_AS(defend(DefenseKind::kFang, in, DefenseParams{}), Error);
  CHECK_THROWS_AS(defend(DefenseKind::kFltrust, in, DefenseParams{}), Error);
}

TEST_CASE("rates against ground truth") {
  DefenseVerdict v;
  v.kept = {0, 1, 3};
  score_verdict(v, std::vector<bool>{false, false, true, true});
  CHECK(v.has_rates);
  // Benign 2 kept of 2: fpr 0. Malicious 1 of 2 removed: tpr 0.5.
  CHECK(v.fpr == doctest::Approx(0.0));
  CHECK(v.tpr == doctest::Approx(0.5));
}

TEST_CASE("defend feeds survivors to the vote") {
  std::mt19937_64 rng(107);
  const auto clients = population(8, 2, rng);
  DefenseInputs in;
  in.clients = clients;
  in.m = 2;
  const auto out = defend(DefenseKind::kFaba, in, DefenseParams{});
  REQUIRE(out.global.has_value());
  const std::vector<LayerRankings> kept(clients.begin(), clients.begin() + 8);
  CHECK(*out.global == majority_vote_layers(kept));
  const auto none = defend(DefenseKind::kNone, in, DefenseParams{});
  CHECK(*none.global == majority_vote_layers(clients));
}
