#pragma once

// Round-based federated ranking simulation: partitioning, client sampling,
// attack and defense wiring, metrics and on-disk records.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rankgauntlet/attacks.hpp"
#include "rankgauntlet/dataset.hpp"
#include "rankgauntlet/defenses.hpp"
#include "rankgauntlet/ranking.hpp"
#include "rankgauntlet/subnet.hpp"

namespace rankgauntlet {

std::vector<Dataset> partition_iid(const Dataset& data, int num_shards, std::uint64_t seed);
std::vector<Dataset> partition_dirichlet(const Dataset& data, int num_shards, double beta, std::uint64_t seed);

// Share of the before-ranking's top-k edges, pooled over layers, that are no
// longer in the after-ranking's top-k.
double edge_cross_rate(const Ranking& before, const Ranking& after, double k_percent);
double edge_cross_rate(std::span<const Ranking> before, std::span<const Ranking> after, double k_percent);

double attack_impact(double acc_benign, double acc_attacked);

enum class PartitionKind { kIid, kDirichlet };

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int total_clients = 30;  // N
  int per_round = 10;      // U
  int rounds = 100;        // T
  int malicious = 2;       // m, planned per round; sets the malicious share m/U
  double k_percent = 50.0;

  BlobSpec blobs;
  std::string data_path;  // overrides blobs when set
  double train_fraction = 0.8;
  std::vector<int> hidden = {16};

  PartitionKind partition = PartitionKind::kIid;
  double beta = 0.5;

  AttackKind attack = AttackKind::kNone;
  AttackParams attack_params;
  DefenseKind defense = DefenseKind::kNone;
  DefenseParams defense_params;
  TrainConfig train;

  void validate() const;
  // Fixed malicious IDs: the first ceil(m / U * N) client IDs.
  int malicious_population() const;
};

struct RoundRecord {
  int round = 0;
  std::vector<int> selected;
  int n_malicious = 0;  // selected malicious clients that attacked
  LayerRankings global;
  double accuracy = 0.0;
  double phi_running = 0.0;
  double rho = 0.0;
  std::optional<double> est_acc;
  std::vector<int> defense_kept;  // client IDs
  std::optional<double> fpr;
  std::optional<double> tpr;
  std::vector<LayerDiagnostics> diagnostics;
};

// What a round looked like before the attack touched it; handed to observers.
struct RoundView {
  int round = 0;
  const LayerRankings* broadcast = nullptr;
  std::vector<int> selected;
  std::vector<LayerRankings> honest;  // every selected client's benign submission
  std::vector<bool> is_malicious;     // aligned with selected
};
using RoundObserver = std::function<void(const RoundView&)>;

struct Trajectory {
  std::vector<RoundRecord> rounds;
  double best_accuracy = 0.0;
  double final_accuracy = 0.0;
};

// Everything that stays fixed across the paired runs of one experiment.
struct Setup {
  Dataset train;
  Dataset test;
  Dataset root;  // server data for FLTrust and Fang
  std::vector<Dataset> shards;
  Supernetwork net;
  std::vector<bool> is_malicious;  // by client ID
};
Setup make_setup(const ExperimentConfig& cfg);

// One trajectory. With attack_active false the malicious clients train honestly.
Trajectory run_trajectory(const ExperimentConfig& cfg, const Setup& setup, bool attack_active,
                          const RoundObserver& observer = {});

struct MetricsReport {
  double acc_benign = 0.0;
  double acc_attacked = 0.0;
  double phi = 0.0;
  double mean_rho = 0.0;
  std::optional<double> mean_est_acc;
  Trajectory benign;
  Trajectory attacked;
};

// Paired benign and attacked trajectories on the same partitions and client
// selections. A precomputed benign trajectory for the same cfg may be passed in.
MetricsReport run_experiment(const ExperimentConfig& cfg, const Trajectory* benign = nullptr);

void write_rounds_csv(std::ostream& os, const Trajectory& trajectory);
void write_summary(std::ostream& os, const MetricsReport& report);

}  // namespace rankgauntlet
