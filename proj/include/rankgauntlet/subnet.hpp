#pragma once

// Supernetwork with frozen random weights and trainable per-edge scores, and
// the edge-popup training loop that turns local data into a client ranking.
//
// Edge numbering: layer l has in*out edges; the edge between input i and
// output o (0-based) has ID o*in + i + 1.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rankgauntlet/dataset.hpp"
#include "rankgauntlet/ranking.hpp"

namespace rankgauntlet {

struct TrainConfig {
  int local_epochs = 2;
  int batch_size = 32;
  double learning_rate = 0.4;
  double momentum = 0.9;
  double weight_decay = 1e-4;

  void validate() const;
};

class Supernetwork {
 public:
  // Fully connected ReLU network with layer widths `dims` (input first).
  // Throws kInvalidArchitecture / kInvalidSparsity.
  static Supernetwork init(std::uint64_t seed, std::vector<int> dims, double k_percent);

  std::uint64_t seed() const noexcept { return seed_; }
  const std::vector<int>& dims() const noexcept { return dims_; }
  double k_percent() const noexcept { return k_percent_; }
  int num_layers() const noexcept { return static_cast<int>(dims_.size()) - 1; }
  int edge_count(int layer) const;

  // out x in, never modified after init.
  const Eigen::MatrixXd& weights(int layer) const { return (*weights_)[static_cast<std::size_t>(layer)]; }
  const Eigen::VectorXd& scores(int layer) const { return scores_[static_cast<std::size_t>(layer)]; }
  const std::vector<Eigen::VectorXd>& all_scores() const noexcept { return scores_; }

  // Copy sharing the weights but carrying new scores.
  Supernetwork with_scores(std::vector<Eigen::VectorXd> scores) const;

  // argsort of the scores per layer.
  LayerRankings rankings() const;
  std::vector<Supermask> masks() const;

  bool shares_weights_with(const Supernetwork& other) const noexcept { return weights_ == other.weights_; }

 private:
  std::uint64_t seed_ = 0;
  std::vector<int> dims_;
  double k_percent_ = 100.0;
  std::shared_ptr<const std::vector<Eigen::MatrixXd>> weights_;
  std::vector<Eigen::VectorXd> scores_;
};

// Ranking of a score vector (ascending, ties by smaller edge ID).
Ranking ranking_of_scores(int layer_id, const Eigen::VectorXd& scores);

// Reassigns each layer's sorted score multiset so that argsort(scores) == r_g.
Supernetwork apply_global_ranking(const Supernetwork& net, std::span<const Ranking> r_g);

// theta_w (.) m per layer, m = supermask of the current scores.
std::vector<Eigen::MatrixXd> effective_weights(const Supernetwork& net);

// Plain forward pass with explicit per-layer weight matrices (ReLU between layers).
Eigen::MatrixXd forward_with(std::span<const Eigen::MatrixXd> weights, const Eigen::MatrixXd& batch);
// Mean cross-entropy of softmax(logits).
double cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> labels);

Eigen::MatrixXd ep_forward(const Supernetwork& net, const Eigen::MatrixXd& batch);

// Straight-through gradient of the mean batch loss w.r.t. the scores:
// dL/dtheta_s = dL/d(theta_w (.) m) (.) theta_w.
std::vector<Eigen::VectorXd> score_gradient(const Supernetwork& net, const Eigen::MatrixXd& batch,
                                            std::span<const int> labels);

struct TrainOptions {
  // Negates every score gradient step (gradient-ascent poisoning).
  bool ascend = false;
};

// E epochs of mini-batch SGD on the scores only; returns the trained scores.
std::vector<Eigen::VectorXd> ep_train_scores(const Supernetwork& net, const Dataset& data, const TrainConfig& cfg,
                                             std::uint64_t shuffle_seed, TrainOptions opts = {});
LayerRankings ep_train(const Supernetwork& net, const Dataset& data, const TrainConfig& cfg,
                       std::uint64_t shuffle_seed, TrainOptions opts = {});

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};
Evaluation evaluate_full(const Supernetwork& net, std::span<const Ranking> r_g, const Dataset& test);
double evaluate(const Supernetwork& net, std::span<const Ranking> r_g, const Dataset& test);

}  // namespace rankgauntlet
