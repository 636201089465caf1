#include "rankgauntlet/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rankgauntlet/error.hpp"
#include "rankgauntlet/rng.hpp"

namespace rankgauntlet {

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kNone: return "none";
    case AttackKind::kVem: return "vem";
    case AttackKind::kReverseRank: return "reverse_rank";
    case AttackKind::kLabelFlip: return "label_flip";
    case AttackKind::kNoise: return "noise";
    case AttackKind::kGradAscent: return "grad_ascent";
    case AttackKind::kMinMax: return "min_max";
    case AttackKind::kMinSum: return "min_sum";
    case AttackKind::kOptimizeAll: return "optimize_all";
    case AttackKind::kReverseVulnerable: return "reverse_vulnerable";
  }
  return "none";
}

AttackKind parse_attack(std::string_view name) {
  for (auto k : {AttackKind::kNone, AttackKind::kVem, AttackKind::kReverseRank, AttackKind::kLabelFlip,
                 AttackKind::kNoise, AttackKind::kGradAscent, AttackKind::kMinMax, AttackKind::kMinSum,
                 AttackKind::kOptimizeAll, AttackKind::kReverseVulnerable}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown attack '" + std::string(name) + "'");
}

void AttackContext::validate() const {
  if (malicious_ids.empty()) throw Error(ErrorCode::kNoMaliciousClients, "attack needs m >= 1");
  if (m() > num_clients) throw Error(ErrorCode::kInvalidConfig, "m exceeds U");
  if (malicious_data.size() != malicious_ids.size() || shuffle_seeds.size() != malicious_ids.size())
    throw Error(ErrorCode::kDimensionMismatch, "per-client attack inputs are misaligned");
  if (static_cast<int>(global.size()) != net.num_layers())
    throw Error(ErrorCode::kDimensionMismatch, "global ranking layers vs network");
}

namespace {

std::vector<Ranking> layer_of(const std::vector<LayerRankings>& clients, int layer) {
  std::vector<Ranking> out;
  out.reserve(clients.size());
  for (const auto& c : clients) out.push_back(c[static_cast<std::size_t>(layer)]);
  return out;
}

std::vector<LayerRankings> replicate(const LayerRankings& r, int m) {
  return std::vector<LayerRankings>(static_cast<std::size_t>(m), r);
}

AttackResult from_scores(const std::vector<std::vector<Eigen::VectorXd>>& per_client) {
  AttackResult res;
  for (const auto& scores : per_client) {
    LayerRankings layers;
    for (std::size_t l = 0; l < scores.size(); ++l) layers.push_back(ranking_of_scores(static_cast<int>(l), scores[l]));
    res.rankings.push_back(std::move(layers));
  }
  return res;
}

enum class Manipulation { kOptimize, kReverse };

// Shared pipeline of the vulnerable-edge attacks: estimate, bound, extract,
// manipulate, splice back.
AttackResult vulnerable_pipeline(const AttackContext& ctx, Manipulation how, bool force_all_edges) {
  ctx.validate();
  const auto own = malicious_benign_rankings(ctx);
  const int m = ctx.m();
  AttackResult res;
  res.rankings = own;

  for (int l = 0; l < ctx.net.num_layers(); ++l) {
    const auto own_layer = layer_of(own, l);
    const int n = own_layer.front().size();
    const auto a = default_scale(n);

    LayerDiagnostics diag;
    diag.layer_id = l;
    diag.estimated = vulnerable_bounds(estimate_benign(ctx, own_layer, l), m, a, ctx.k_percent);
    if (force_all_edges) {
      diag.used = diag.estimated;
      diag.used.edge_ids.resize(static_cast<std::size_t>(n));
      std::iota(diag.used.edge_ids.begin(), diag.used.edge_ids.end(), 1);
    } else {
      diag.used = apply_zeta(diag.estimated, ctx.params.zeta);
    }

    if (diag.used.empty()) {
      diag.fell_back = true;
      if (ctx.params.empty_range == EmptyRangePolicy::kReverseRank) {
        const auto rev = majority_vote(own_layer).reversed();
        for (auto& client : res.rankings) client[static_cast<std::size_t>(l)] = rev;
      }
      res.diagnostics.push_back(std::move(diag));
      continue;
    }

    const auto r_v = extract_vulnerable(own_layer, diag.used);
    std::vector<Eigen::MatrixXd> chosen;
    if (how == Manipulation::kOptimize) {
      SinkhornConfig cfg = ctx.params.sinkhorn;
      cfg.seed = derive_seed(ctx.seed, {stream::kAttack, static_cast<std::uint64_t>(ctx.round),
                                        static_cast<std::uint64_t>(l)});
      const auto opt = optimize(r_v, a, cfg);
      diag.objective_trace = opt.objective_trace;
      for (int u = 0; u < m; ++u) {
        const auto perm = hungarian_round(opt.doubly_stochastic[static_cast<std::size_t>(u)]);
        res.rankings[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)] =
            apply_vulnerable_permutation(own_layer[static_cast<std::size_t>(u)], r_v[static_cast<std::size_t>(u)], perm);
        chosen.push_back(to_dense(perm));
      }
    } else {
      for (int u = 0; u < m; ++u) {
        const auto& rv = r_v[static_cast<std::size_t>(u)];
        std::vector<int> order = own_layer[static_cast<std::size_t>(u)].order();
        const std::size_t d = rv.positions.size();
        for (std::size_t r = 0; r < d; ++r) {
          order[static_cast<std::size_t>(rv.positions[r] - 1)] =
              own_layer[static_cast<std::size_t>(u)].at(rv.positions[d - 1 - r]);
        }
        Ranking reversed(l, std::move(order));
        // Express the reversal as R^v P for the diagnostics objective.
        const auto rv_after = extract_vulnerable(reversed, rv.edges);
        std::vector<int> sigma(d);
        for (std::size_t r = 0; r < d; ++r)
          sigma[static_cast<std::size_t>(rv.column_of_row[r])] = rv_after.column_of_row[r] + 1;
        chosen.push_back(to_dense(PermutationMatrix(std::move(sigma))));
        res.rankings[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)] = std::move(reversed);
      }
    }
    diag.rounded_objective = displacement_objective(r_v, chosen, a);
    res.diagnostics.push_back(std::move(diag));
  }
  return res;
}

}  // namespace

std::vector<LayerRankings> malicious_benign_rankings(const AttackContext& ctx) {
  std::vector<LayerRankings> out;
  for (std::size_t i = 0; i < ctx.malicious_ids.size(); ++i)
    out.push_back(ep_train(ctx.net, ctx.malicious_data[i], ctx.train, ctx.shuffle_seeds[i]));
  return out;
}

BenignEstimate estimate_benign(const AttackContext& ctx, std::span<const Ranking> own_layer, int layer) {
  const auto a = default_scale(own_layer.front().size());
  const int u_total = ctx.num_clients;
  const int m = ctx.m();
  if (ctx.params.estimation == EstimationMethod::kHistorical && ctx.round >= 2) {
    const auto last = layer_of(ctx.last_malicious, layer);
    const int m_prev = static_cast<int>(last.size());
    auto est = estimate_historical(ctx.global[static_cast<std::size_t>(layer)], last, u_total, a, ctx.round);
    if (m_prev != m && u_total > m_prev) {
      const double factor = static_cast<double>(u_total - m) / static_cast<double>(u_total - m_prev);
      for (auto& v : est.values) v *= factor;
    }
    return est;
  }
  auto est = estimate_alternative(own_layer, u_total, a);
  est.round = ctx.round;
  return est;
}

AttackResult vem(const AttackContext& ctx) { return vulnerable_pipeline(ctx, Manipulation::kOptimize, false); }

AttackResult optimize_all(const AttackContext& ctx) { return vulnerable_pipeline(ctx, Manipulation::kOptimize, true); }

AttackResult reverse_vulnerable(const AttackContext& ctx) {
  return vulnerable_pipeline(ctx, Manipulation::kReverse, false);
}

AttackResult reverse_rank(const AttackContext& ctx) {
  ctx.validate();
  const auto own = malicious_benign_rankings(ctx);
  const auto vote = majority_vote_layers(own);
  LayerRankings rev;
  for (const auto& r : vote) rev.push_back(r.reversed());
  return {replicate(rev, ctx.m()), {}};
}

AttackResult label_flip(const AttackContext& ctx) {
  ctx.validate();
  AttackResult res;
  for (std::size_t i = 0; i < ctx.malicious_ids.size(); ++i)
    res.rankings.push_back(ep_train(ctx.net, flip_labels(ctx.malicious_data[i]), ctx.train, ctx.shuffle_seeds[i]));
  return res;
}

AttackResult noise_attack(const AttackContext& ctx) {
  ctx.validate();
  std::vector<std::vector<Eigen::VectorXd>> per_client;
  for (std::size_t i = 0; i < ctx.malicious_ids.size(); ++i) {
    auto scores = ep_train_scores(ctx.net, ctx.malicious_data[i], ctx.train, ctx.shuffle_seeds[i]);
    Rng rng(derive_seed(ctx.seed, {stream::kAttack, static_cast<std::uint64_t>(ctx.round),
                                   static_cast<std::uint64_t>(ctx.malicious_ids[i]), 0xA015E}));
    for (auto& s : scores) {
      const double mean = s.mean();
      const double sd = std::sqrt((s.array() - mean).square().mean());
      const double sigma = ctx.params.noise_scale * sd;
      if (sigma <= 0.0) continue;
      std::normal_distribution<double> noise(0.0, sigma);
      for (Eigen::Index j = 0; j < s.size(); ++j) s(j) += noise(rng);
    }
    per_client.push_back(std::move(scores));
  }
  return from_scores(per_client);
}

AttackResult grad_ascent(const AttackContext& ctx) {
  ctx.validate();
  AttackResult res;
  for (std::size_t i = 0; i < ctx.malicious_ids.size(); ++i)
    res.rankings.push_back(ep_train(ctx.net, ctx.malicious_data[i], ctx.train, ctx.shuffle_seeds[i], {.ascend = true}));
  return res;
}

namespace {

Eigen::VectorXd mean_of(std::span<const Eigen::VectorXd> vs) {
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(vs.front().size());
  for (const auto& v : vs) avg += v;
  return avg / static_cast<double>(vs.size());
}

template <typename Pred>
GammaSearch search_gamma(std::span<const Eigen::VectorXd> benign, double gamma_max, int iterations, Pred ok) {
  if (benign.empty()) throw Error(ErrorCode::kMissingKnowledge, "no benign vectors");
  const Eigen::VectorXd avg = mean_of(benign);
  const double norm = avg.norm();
  const Eigen::VectorXd dir = norm > 0.0 ? Eigen::VectorXd(-avg / norm) : Eigen::VectorXd::Zero(avg.size());
  auto at = [&](double g) { return Eigen::VectorXd(avg + g * dir); };
  if (ok(at(gamma_max))) return {gamma_max, at(gamma_max)};
  double lo = 0.0;
  double hi = gamma_max;
  for (int it = 0; it < iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ok(at(mid))) lo = mid;
    else hi = mid;
  }
  return {lo, at(lo)};
}

AttackResult score_space_attack(const AttackContext& ctx, const ScoreSet& benign_scores, bool use_min_max) {
  ctx.validate();
  if (benign_scores.empty()) throw Error(ErrorCode::kMissingKnowledge, "min-max/min-sum need benign scores");
  LayerRankings out;
  for (int l = 0; l < ctx.net.num_layers(); ++l) {
    std::vector<Eigen::VectorXd> layer;
    for (const auto& client : benign_scores) layer.push_back(client.at(static_cast<std::size_t>(l)));
    const auto found = use_min_max ? min_max_gamma(layer, ctx.params.gamma_max, ctx.params.gamma_iterations)
                                   : min_sum_gamma(layer, ctx.params.gamma_max, ctx.params.gamma_iterations);
    out.push_back(ranking_of_scores(l, found.malicious));
  }
  return {replicate(out, ctx.m()), {}};
}

}  // namespace

bool min_max_satisfied(std::span<const Eigen::VectorXd> benign, const Eigen::VectorXd& candidate) {
  double bound = 0.0;
  for (std::size_t i = 0; i < benign.size(); ++i)
    for (std::size_t j = i + 1; j < benign.size(); ++j) bound = std::max(bound, (benign[i] - benign[j]).norm());
  double worst = 0.0;
  for (const auto& b : benign) worst = std::max(worst, (candidate - b).norm());
  return worst <= bound;
}

bool min_sum_satisfied(std::span<const Eigen::VectorXd> benign, const Eigen::VectorXd& candidate) {
  double bound = 0.0;
  for (const auto& bi : benign) {
    double s = 0.0;
    for (const auto& bj : benign) s += (bi - bj).squaredNorm();
    bound = std::max(bound, s);
  }
  double total = 0.0;
  for (const auto& b : benign) total += (candidate - b).squaredNorm();
  return total <= bound;
}

GammaSearch min_max_gamma(std::span<const Eigen::VectorXd> benign, double gamma_max, int iterations) {
  return search_gamma(benign, gamma_max, iterations,
                      [&](const Eigen::VectorXd& c) { return min_max_satisfied(benign, c); });
}

GammaSearch min_sum_gamma(std::span<const Eigen::VectorXd> benign, double gamma_max, int iterations) {
  return search_gamma(benign, gamma_max, iterations,
                      [&](const Eigen::VectorXd& c) { return min_sum_satisfied(benign, c); });
}

AttackResult min_max(const AttackContext& ctx, const ScoreSet& benign_scores) {
  return score_space_attack(ctx, benign_scores, true);
}

AttackResult min_sum(const AttackContext& ctx, const ScoreSet& benign_scores) {
  return score_space_attack(ctx, benign_scores, false);
}

AttackResult run_attack(AttackKind kind, const AttackContext& ctx, const ScoreSet* benign_scores) {
  static const ScoreSet kNoScores;
  switch (kind) {
    case AttackKind::kNone: return {malicious_benign_rankings(ctx), {}};
    case AttackKind::kVem: return vem(ctx);
    case AttackKind::kReverseRank: return reverse_rank(ctx);
    case AttackKind::kLabelFlip: return label_flip(ctx);
    case AttackKind::kNoise: return noise_attack(ctx);
    case AttackKind::kGradAscent: return grad_ascent(ctx);
    case AttackKind::kMinMax: return min_max(ctx, benign_scores ? *benign_scores : kNoScores);
    case AttackKind::kMinSum: return min_sum(ctx, benign_scores ? *benign_scores : kNoScores);
    case AttackKind::kOptimizeAll: return optimize_all(ctx);
    case AttackKind::kReverseVulnerable: return reverse_vulnerable(ctx);
  }
  throw Error(ErrorCode::kInvalidConfig, "unhandled attack");
}

}  // namespace rankgauntlet
