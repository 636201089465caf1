#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

#include "rankgauntlet/error.hpp"
#include "rankgauntlet/sim.hpp"

using namespace rankgauntlet;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.seed = 5;
  cfg.total_clients = 10;
  cfg.per_round = 5;
  cfg.rounds = 4;
  cfg.malicious = 1;
  cfg.blobs.samples = 600;
  cfg.blobs.features = 4;
  cfg.hidden = {6};
  return cfg;
}

}  // namespace

TEST_CASE("phi arithmetic") {
  CHECK(attack_impact(98.63, 43.59) == doctest::Approx(55.80).epsilon(1e-4));
  CHECK(attack_impact(50.0, 50.0) == 0.0);
  CHECK(attack_impact(50.0, 60.0) < 0.0);
}

TEST_CASE("edge cross rate") {
  const Ranking r(0, {3, 4, 5, 1, 6, 2});
  CHECK(edge_cross_rate(r, r, 50.0) == 0.0);
  CHECK(edge_cross_rate(r, r.reversed(), 50.0) == 1.0);
  const Ranking one_swap(0, {3, 4, 1, 5, 6, 2});
  CHECK(edge_cross_rate(r, one_swap, 50.0) == doctest::Approx(1.0 / 3.0));
  const std::vector<Ranking> before{r, Ranking(1, {1, 2, 3, 4})};
  const std::vector<Ranking> after{one_swap, Ranking(1, {1, 2, 3, 4})};
  CHECK(edge_cross_rate(before, after, 50.0) == doctest::Approx(1.0 / 5.0));
}

TEST_CASE("iid partition deals every row once") {
  BlobSpec spec;
  spec.samples = 301;
  const auto data = make_blobs(spec, 1);
  const auto shards = partition_iid(data, 7, 3);
  REQUIRE(shards.size() == 7);
  std::vector<int> global(3, 0);
  for (int y : data.labels) ++global[static_cast<std::size_t>(y)];
  int total = 0;
  for (const auto& s : shards) {
    total += s.size();
    CHECK(s.size() >= 301 / 7);
    CHECK(s.size() <= 301 / 7 + 1);
    std::vector<int> counts(3, 0);
    for (int y : s.labels) ++counts[static_cast<std::size_t>(y)];
    for (int c = 0; c < 3; ++c) CHECK(std::abs(counts[c] * 7 - global[c]) <= 7);
  }
  CHECK(total == 301);
  CHECK(partition_iid(data, 1, 3).front().size() == 301);
  CHECK_THROWS_AS(partition_iid(data, 400, 3), Error);
}

TEST_CASE("dirichlet partition has no empty shard and skews with small beta") {
  BlobSpec spec;
  spec.samples = 900;
  const auto data = make_blobs(spec, 2);
  const auto shards = partition_dirichlet(data, 6, 0.1, 4);
  int total = 0;
  double max_share = 0.0;
  for (const auto& s : shards) {
    CHECK(!s.empty());
    total += s.size();
    std::vector<int> counts(3, 0);
    for (int y : s.labels) ++counts[static_cast<std::size_t>(y)];
    max_share = std::max(max_share, *std::max_element(counts.begin(), counts.end()) / double(s.size()));
  }
  CHECK(total == 900);
  CHECK(max_share > 0.6);
}

TEST_CASE("config validation") {
  auto cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.per_round = 11;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = small_config();
  cfg.malicious = 6;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.malicious = 5;
  CHECK_NOTHROW(cfg.validate());
  cfg = small_config();
  CHECK(cfg.malicious_population() == 2);
}

TEST_CASE("paired trajectories share selections and are reproducible") {
  auto cfg = small_config();
  cfg.attack = AttackKind::kReverseRank;
  const auto r1 = run_experiment(cfg);
  const auto r2 = run_experiment(cfg);
  REQUIRE(r1.benign.rounds.size() == 4);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(r1.benign.rounds[t].selected == r1.attacked.rounds[t].selected);
    CHECK(r1.attacked.rounds[t].global == r2.attacked.rounds[t].global);
    CHECK(r1.attacked.rounds[t].rho >= 0.0);
    CHECK(r1.attacked.rounds[t].rho <= 1.0);
    CHECK(r1.benign.rounds[t].n_malicious == 0);
  }
  std::ostringstream a, b;
  write_rounds_csv(a, r1.attacked);
  write_rounds_csv(b, r2.attacked);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("t,selected_ids,n_malicious,acc,phi_running,rho,est_acc,defense_kept,fpr,tpr\n", 0) == 0);
}

TEST_CASE("no attack means no crossings") {
  auto cfg = small_config();
  const auto r = run_experiment(cfg);
  for (const auto& rec : r.attacked.rounds) CHECK(rec.rho == 0.0);
  CHECK(r.phi == doctest::Approx(0.0));
  CHECK(!r.mean_est_acc.has_value());
}

TEST_CASE("m = 0 with an attack configured matches no attack") {
  auto cfg = small_config();
  cfg.malicious = 0;
  const auto plain = run_experiment(cfg);
  cfg.attack = AttackKind::kVem;
  const auto attacked = run_experiment(cfg);
  for (std::size_t t = 0; t < plain.attacked.rounds.size(); ++t)
    CHECK(plain.attacked.rounds[t].global == attacked.attacked.rounds[t].global);
}

TEST_CASE("VEM records estimation accuracy and diagnostics") {
  auto cfg = small_config();
  cfg.attack = AttackKind::kVem;
  cfg.malicious = 2;
  cfg.total_clients = 10;
  const auto r = run_experiment(cfg);
  bool any = false;
  for (const auto& rec : r.attacked.rounds) {
    if (rec.n_malicious == 0) continue;
    any = true;
    CHECK(rec.diagnostics.size() == 2);
    if (rec.est_acc) {
      CHECK(*rec.est_acc >= 0.0);
      CHECK(*rec.est_acc <= 1.0);
    }
  }
  CHECK(any);
}

TEST_CASE("defended runs record rates") {
  auto cfg = small_config();
  cfg.per_round = 8;
  cfg.attack = AttackKind::kReverseRank;
  cfg.malicious = 1;
  for (auto d : {DefenseKind::kFaba, DefenseKind::kFltrust, DefenseKind::kFang, DefenseKind::kFoolsgold}) {
    CAPTURE(to_string(d));
    cfg.defense = d;
    const auto r = run_experiment(cfg);
    for (const auto& rec : r.attacked.rounds) {
      CHECK(rec.fpr.has_value());
      CHECK(!rec.defense_kept.empty());
    }
  }
}

TEST_CASE("observer sees honest submissions") {
  auto cfg = small_config();
  const auto setup = make_setup(cfg);
  int calls = 0;
  run_trajectory(cfg, setup, false, [&](const RoundView& v) {
    ++calls;
    CHECK(v.honest.size() == v.selected.size());
    CHECK(v.is_malicious.size() == v.selected.size());
    CHECK(v.broadcast != nullptr);
  });
  CHECK(calls == cfg.rounds);
}
