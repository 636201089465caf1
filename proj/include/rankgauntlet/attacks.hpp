#pragma once

// Poisoning attacks against rank aggregation. Each maps the adversary's view
// of a round to one submission (a ranking per layer) for each malicious
// client. Only min_max and min_sum receive benign clients' scores.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rankgauntlet/dataset.hpp"
#include "rankgauntlet/permopt.hpp"
#include "rankgauntlet/ranking.hpp"
#include "rankgauntlet/subnet.hpp"
#include "rankgauntlet/vulnid.hpp"

namespace rankgauntlet {

enum class AttackKind {
  kNone,
  kVem,
  kReverseRank,
  kLabelFlip,
  kNoise,
  kGradAscent,
  kMinMax,
  kMinSum,
  kOptimizeAll,
  kReverseVulnerable,
};

std::string_view to_string(AttackKind kind);
AttackKind parse_attack(std::string_view name);

enum class EmptyRangePolicy { kBenign, kReverseRank };

struct AttackParams {
  double zeta = 1.0;
  EstimationMethod estimation = EstimationMethod::kHistorical;
  SinkhornConfig sinkhorn;
  EmptyRangePolicy empty_range = EmptyRangePolicy::kBenign;
  // Noise std as a multiple of the trained scores' std.
  double noise_scale = 1.0;
  // Min-max / min-sum gamma search.
  double gamma_max = 10.0;
  int gamma_iterations = 20;
};

struct AttackContext {
  int round = 1;
  std::vector<int> malicious_ids;           // selected this round
  std::vector<Dataset> malicious_data;      // aligned with malicious_ids
  std::vector<std::uint64_t> shuffle_seeds; // aligned with malicious_ids
  Supernetwork net;                         // scores already placed at the broadcast ranking
  TrainConfig train;
  LayerRankings global;                     // ranking broadcast this round
  // What the adversary submitted last round (empty if none of its clients was selected).
  std::vector<LayerRankings> last_malicious;
  int num_clients = 0;  // U
  double k_percent = 50.0;
  AttackParams params;
  std::uint64_t seed = 0;

  int m() const noexcept { return static_cast<int>(malicious_ids.size()); }
  void validate() const;
};

struct LayerDiagnostics {
  int layer_id = 0;
  VulnerableRange estimated;  // before zeta
  VulnerableRange used;       // after zeta (or forced range)
  bool fell_back = false;
  std::vector<double> objective_trace;
  double rounded_objective = 0.0;
};

struct AttackResult {
  std::vector<LayerRankings> rankings;  // per malicious client, per layer
  std::vector<LayerDiagnostics> diagnostics;
};

// Benign submissions the adversary's clients would send (Algorithm lines 2-5).
std::vector<LayerRankings> malicious_benign_rankings(const AttackContext& ctx);

// Estimated aggregated benign reputation for one layer: historical when
// last-round state exists, alternative otherwise. Historical estimates are
// rescaled from U - m_prev to U - m benign clients.
BenignEstimate estimate_benign(const AttackContext& ctx, std::span<const Ranking> own_layer, int layer);

AttackResult vem(const AttackContext& ctx);
AttackResult optimize_all(const AttackContext& ctx);
AttackResult reverse_vulnerable(const AttackContext& ctx);
AttackResult reverse_rank(const AttackContext& ctx);
AttackResult label_flip(const AttackContext& ctx);
AttackResult noise_attack(const AttackContext& ctx);
AttackResult grad_ascent(const AttackContext& ctx);

// Benign clients' trained scores: benign_scores[client][layer].
using ScoreSet = std::vector<std::vector<Eigen::VectorXd>>;

struct GammaSearch {
  double gamma = 0.0;
  Eigen::VectorXd malicious;  // avg + gamma * direction
};

// Largest gamma in [0, gamma_max] (bisection) with avg - gamma*avg/|avg| within
// the min-max (or min-sum) bound of the benign vectors.
GammaSearch min_max_gamma(std::span<const Eigen::VectorXd> benign, double gamma_max, int iterations);
GammaSearch min_sum_gamma(std::span<const Eigen::VectorXd> benign, double gamma_max, int iterations);
bool min_max_satisfied(std::span<const Eigen::VectorXd> benign, const Eigen::VectorXd& candidate);
bool min_sum_satisfied(std::span<const Eigen::VectorXd> benign, const Eigen::VectorXd& candidate);

// Throw kMissingKnowledge if benign_scores is empty.
AttackResult min_max(const AttackContext& ctx, const ScoreSet& benign_scores);
AttackResult min_sum(const AttackContext& ctx, const ScoreSet& benign_scores);

// Dispatch by kind; benign_scores is consulted only by min_max / min_sum.
AttackResult run_attack(AttackKind kind, const AttackContext& ctx, const ScoreSet* benign_scores);

}  // namespace rankgauntlet
