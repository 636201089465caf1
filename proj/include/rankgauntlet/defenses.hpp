#pragma once

// Server-side robust aggregation for ranking submissions. Every rule either
// filters clients or assigns trust weights; the survivors always feed
// majority_vote or weighted_majority_vote.
//
// Clients are addressed by their index in the input span. Ties break toward
// the lower index, so callers that order clients by ID get ID tie-breaks.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "rankgauntlet/dataset.hpp"
#include "rankgauntlet/ranking.hpp"
#include "rankgauntlet/subnet.hpp"

namespace rankgauntlet {

enum class DefenseKind { kNone, kMultiKrum, kAfa, kFaba, kDnc, kFltrust, kFoolsgold, kFang, kIbd };

std::string_view to_string(DefenseKind kind);
DefenseKind parse_defense(std::string_view name);

struct DefenseVerdict {
  std::vector<int> kept;       // ascending indices, never empty
  std::vector<double> trust;   // per input client, empty for pure filters
  std::vector<double> scores;  // rule-specific per-client diagnostic
  double fpr = 0.0;
  double tpr = 0.0;
  bool has_rates = false;
};

// One row per client: per-layer reputations minus the layer's mid value
// (a_1 + a_n) / 2, concatenated. Centering leaves distances unchanged and
// makes a reversed ranking the exact negation of the original.
Eigen::MatrixXd embed(std::span<const LayerRankings> clients);

// Cosine similarity, 0 when either side is the zero vector.
double cosine(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// c = U - 2m - 3 rounds of Krum selection. Needs U > 2m + 3.
DefenseVerdict multi_krum(const Eigen::MatrixXd& embeddings, int m);

DefenseVerdict afa(const Eigen::MatrixXd& embeddings, double xi = 2.0, double xi_step = 0.5);

// Drops the client farthest from the running mean, m times. Needs U > m.
DefenseVerdict faba(const Eigen::MatrixXd& embeddings, int m);

struct DncParams {
  double subsample = 1.0;     // fraction of coordinates kept, (0, 1]
  double filter_frac = 1.0;   // drops floor(filter_frac * m) clients
  std::uint64_t seed = 0;
};
DefenseVerdict dnc(const Eigen::MatrixXd& embeddings, int m, const DncParams& params);

// trust_u = max(0, cos(embed_u, server)).
DefenseVerdict fltrust(const Eigen::MatrixXd& embeddings, const Eigen::VectorXd& server_embedding);

// Rows of `history` are each client's summed embeddings over its rounds.
DefenseVerdict foolsgold(const Eigen::MatrixXd& history);

// Leave-one-out re-vote on the server's validation set: a client is excluded
// when removing it lowers both loss and error. At most floor(U/2) are excluded.
DefenseVerdict fang_validate(std::span<const LayerRankings> clients, const Supernetwork& net,
                             const Dataset& validation);

// Mean top-k overlap with the other clients (summed over layers), split by
// 1-D 2-means; the lower cluster is dropped. Needs U >= 3.
DefenseVerdict ibd(std::span<const LayerRankings> clients, double k_percent);

// Fills fpr/tpr from ground truth; either rate is 0 when its class is empty.
void score_verdict(DefenseVerdict& verdict, const std::vector<bool>& is_malicious);

struct DefenseParams {
  double afa_xi = 2.0;
  double afa_step = 0.5;
  DncParams dnc;
  int root_samples = 100;  // server data for FLTrust and Fang
};

struct DefenseInputs {
  std::span<const LayerRankings> clients;
  int m = 0;                 // malicious count the server plans for
  double k_percent = 50.0;
  const Supernetwork* net = nullptr;  // at the broadcast ranking
  const Dataset* root = nullptr;
  const LayerRankings* server_ranking = nullptr;  // FLTrust
  const Eigen::MatrixXd* history = nullptr;       // FoolsGold
};

struct DefenseOutcome {
  DefenseVerdict verdict;
  // Next global ranking; empty when the rule assigns no trust at all, in
  // which case the previous global ranking stands.
  std::optional<LayerRankings> global;
};

DefenseOutcome defend(DefenseKind kind, const DefenseInputs& in, const DefenseParams& params);

}  // namespace rankgauntlet
