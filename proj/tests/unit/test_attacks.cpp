#include <doctest.h>

#include <algorithm>
#include <set>

#include "rankgauntlet/attacks.hpp"
#include "rankgauntlet/error.hpp"
#include "rankgauntlet/rng.hpp"

using namespace rankgauntlet;

namespace {

AttackContext make_context(int m, int round = 1) {
  BlobSpec spec;
  spec.samples = 300;
  spec.features = 4;
  const auto data = make_blobs(spec, 5);
  AttackContext ctx;
  ctx.round = round;
  ctx.net = Supernetwork::init(3, {4, 6, 3}, 50.0);
  ctx.global = ctx.net.rankings();
  ctx.num_clients = 10;
  ctx.seed = 77;
  for (int u = 0; u < m; ++u) {
    std::vector<int> rows;
    for (int i = u; i < data.size(); i += m) rows.push_back(i);
    ctx.malicious_ids.push_back(u);
    ctx.malicious_data.push_back(data.subset(rows));
    ctx.shuffle_seeds.push_back(derive_seed(9, {static_cast<std::uint64_t>(u)}));
  }
  return ctx;
}

ScoreSet benign_scores(const AttackContext& ctx, int clients) {
  ScoreSet out;
  for (int c = 0; c < clients; ++c)
    out.push_back(ep_train_scores(ctx.net, ctx.malicious_data.front(), ctx.train, derive_seed(1, {100u + c})));
  return out;
}

}  // namespace

TEST_CASE("attack names round trip") {
  for (auto k : {AttackKind::kNone, AttackKind::kVem, AttackKind::kReverseRank, AttackKind::kLabelFlip,
                 AttackKind::kNoise, AttackKind::kGradAscent, AttackKind::kMinMax, AttackKind::kMinSum,
                 AttackKind::kOptimizeAll, AttackKind::kReverseVulnerable})
    CHECK(parse_attack(to_string(k)) == k);
  CHECK_THROWS_AS(parse_attack("bogus"), Error);
}

TEST_CASE("every attack yields a full submission per client") {
  const auto ctx = make_context(2);
  const auto scores = benign_scores(ctx, 3);
  for (auto k : {AttackKind::kNone, AttackKind::kVem, AttackKind::kReverseRank, AttackKind::kLabelFlip,
                 AttackKind::kNoise, AttackKind::kGradAscent, AttackKind::kMinMax, AttackKind::kMinSum,
                 AttackKind::kOptimizeAll, AttackKind::kReverseVulnerable}) {
    CAPTURE(to_string(k));
    const auto res = run_attack(k, ctx, &scores);
    REQUIRE(res.rankings.size() == 2);
    for (const auto& client : res.rankings) {
      REQUIRE(client.size() == 2);
      for (int l = 0; l < 2; ++l) {
        CHECK(client[static_cast<std::size_t>(l)].layer_id() == l);
        CHECK(client[static_cast<std::size_t>(l)].size() == ctx.net.edge_count(l));
      }
    }
    // Same context, same output.
    CHECK(run_attack(k, ctx, &scores).rankings == res.rankings);
  }
}

TEST_CASE("VEM only touches the vulnerable range") {
  for (double zeta : {1.0, 0.5}) {
    auto ctx = make_context(2);
    ctx.params.zeta = zeta;
    const auto own = malicious_benign_rankings(ctx);
    const auto res = vem(ctx);
    for (const auto& diag : res.diagnostics) {
      const std::set<int> moved(diag.used.edge_ids.begin(), diag.used.edge_ids.end());
      for (std::size_t u = 0; u < own.size(); ++u) {
        const auto& before = own[u][static_cast<std::size_t>(diag.layer_id)];
        const auto& after = res.rankings[u][static_cast<std::size_t>(diag.layer_id)];
        for (int pos = 1; pos <= before.size(); ++pos)
          if (!moved.count(before.at(pos))) CHECK(after.at(pos) == before.at(pos));
      }
      CHECK(diag.estimated.edge_ids.size() >= diag.used.edge_ids.size());
    }
  }
}

TEST_CASE("empty range falls back to the configured policy") {
  auto ctx = make_context(1);
  // With one adversary among many and the narrowest zeta nothing is left.
  ctx.num_clients = 50;
  ctx.params.zeta = 1e-9;
  const auto own = malicious_benign_rankings(ctx);
  const auto kept = vem(ctx);
  for (const auto& d : kept.diagnostics) CHECK(d.fell_back);
  CHECK(kept.rankings == own);
  ctx.params.empty_range = EmptyRangePolicy::kReverseRank;
  CHECK(vem(ctx).rankings == reverse_rank(ctx).rankings);
}

TEST_CASE("reverse_rank reverses the adversary's own vote") {
  const auto ctx = make_context(3);
  const auto own = malicious_benign_rankings(ctx);
  const auto vote = majority_vote_layers(own);
  const auto res = reverse_rank(ctx);
  for (const auto& client : res.rankings)
    for (std::size_t l = 0; l < vote.size(); ++l) CHECK(client[l] == vote[l].reversed());
}

TEST_CASE("reverse_vulnerable flips the vulnerable slots") {
  const auto ctx = make_context(2);
  const auto own = malicious_benign_rankings(ctx);
  const auto res = reverse_vulnerable(ctx);
  for (const auto& diag : res.diagnostics) {
    if (diag.used.empty()) continue;
    const auto l = static_cast<std::size_t>(diag.layer_id);
    const auto rv = extract_vulnerable(own[0][l], diag.used.edge_ids);
    const std::size_t d = rv.positions.size();
    for (std::size_t r = 0; r < d; ++r)
      CHECK(res.rankings[0][l].at(rv.positions[r]) == own[0][l].at(rv.positions[d - 1 - r]));
  }
}

TEST_CASE("optimize_all uses every edge") {
  const auto ctx = make_context(2);
  const auto res = optimize_all(ctx);
  for (const auto& d : res.diagnostics)
    CHECK(d.used.size() == ctx.net.edge_count(d.layer_id));
}

TEST_CASE("historical estimation from round 2 on") {
  auto ctx = make_context(2, 1);
  const auto own = malicious_benign_rankings(ctx);
  const std::vector<Ranking> layer0{own[0][0], own[1][0]};
  CHECK(estimate_benign(ctx, layer0, 0).method == EstimationMethod::kAlternative);
  ctx.round = 3;
  ctx.last_malicious = own;
  const auto hist = estimate_benign(ctx, layer0, 0);
  CHECK(hist.method == EstimationMethod::kHistorical);
  // Last round's adversary sent nothing: the global ranking is rescaled to U - m clients.
  ctx.last_malicious.clear();
  const auto bare = estimate_benign(ctx, layer0, 0);
  const auto full = estimate_historical(ctx.global[0], std::vector<Ranking>{}, 10, default_scale(own[0][0].size()), 3);
  for (std::size_t j = 0; j < full.values.size(); ++j) CHECK(bare.values[j] == doctest::Approx(full.values[j] * 0.8));
  ctx.params.estimation = EstimationMethod::kAlternative;
  CHECK(estimate_benign(ctx, layer0, 0).method == EstimationMethod::kAlternative);
}

TEST_CASE("min-max and min-sum stay within the benign spread") {
  const auto ctx = make_context(2);
  const auto scores = benign_scores(ctx, 5);
  std::vector<Eigen::VectorXd> flat;
  for (const auto& c : scores) flat.push_back(c[0]);
  const auto mm = min_max_gamma(flat, 10.0, 20);
  CHECK(min_max_satisfied(flat, mm.malicious));
  const auto ms = min_sum_gamma(flat, 10.0, 20);
  CHECK(min_sum_satisfied(flat, ms.malicious));
  CHECK(mm.gamma >= 0.0);
  CHECK_THROWS_AS(min_max(ctx, ScoreSet{}), Error);
  CHECK_THROWS_AS(run_attack(AttackKind::kMinSum, ctx, nullptr), Error);
}

TEST_CASE("context validation") {
  auto ctx = make_context(2);
  ctx.num_clients = 2;
  CHECK_THROWS_AS(vem(ctx), Error);
  auto empty = make_context(0);
  CHECK_THROWS_AS(vem(empty), Error);
}
