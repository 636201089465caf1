#pragma once

// Differentiable permutation search: temperature-scaled Sinkhorn relaxation,
// the reputation-displacement objective with its exact reverse-mode
// gradient, an Adam driver, and Hungarian rounding back to permutations.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rankgauntlet/ranking.hpp"
#include "rankgauntlet/vulnid.hpp"

namespace rankgauntlet {

struct SinkhornConfig {
  int iterations = 50;       // L
  double temperature = 1.0;  // tau
  // Past L rounds, iterate until row sums are within `tolerance` of 1 or
  // max_iterations rounds have run. tolerance = 0 with max_iterations = L
  // gives exactly L rounds.
  double tolerance = 1e-12;
  int max_iterations = 1000;
  int epochs = 50;           // optimizer steps
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Opt-in Gumbel perturbation of X before each Sinkhorn pass.
  double gumbel_scale = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Sinkhorn normalization of exp(X / tau): row then column steps, at least L rounds.
// Log space is used when X / tau is too spread for linear arithmetic.
Eigen::MatrixXd sinkhorn(const Eigen::MatrixXd& x, const SinkhornConfig& cfg);

// Vector-Jacobian product of sinkhorn(): given dL/dP at P = sinkhorn(x),
// returns dL/dx by unrolling all L iterations in reverse.
Eigen::MatrixXd sinkhorn_vjp(const Eigen::MatrixXd& x, const SinkhornConfig& cfg, const Eigen::MatrixXd& grad_p);

// Per-client row weights b_u = A restricted to the client's vulnerable
// positions, mapped onto edge columns: b_u[c] = a_{position of edge c}.
Eigen::RowVectorXd edge_weights(const VulnerableMatrix& rv, std::span<const std::int64_t> a);

// ||sum_u b_u (I - P_u)||: how far the m clients' permutations P_u move the
// vulnerable edges' aggregated reputation.
double displacement_objective(std::span<const VulnerableMatrix> r_v, std::span<const Eigen::MatrixXd> perms,
                              std::span<const std::int64_t> a);

struct LossAndGradient {
  double loss = 0.0;  // negated objective
  std::vector<Eigen::MatrixXd> gradients;
};

// loss = -||sum_u b_u (I - S_L(X_u))||, with S_L exactly L unrolled rounds
// (no convergence continuation), gradient through all of them.
LossAndGradient attack_loss(std::span<const Eigen::MatrixXd> x_list, std::span<const VulnerableMatrix> r_v,
                            std::span<const std::int64_t> a, const SinkhornConfig& cfg);

struct OptimizeResult {
  std::vector<Eigen::MatrixXd> doubly_stochastic;  // best iterate's Sinkhorn outputs
  std::vector<double> objective_trace;             // objective before each step, then final
  double initial_objective = 0.0;
  double best_objective = 0.0;
};

// Adam on X_u (initialized U(0,1) from cfg.seed) to maximize the relaxed
// objective. Returns the best iterate seen, so best >= initial.
OptimizeResult optimize(std::span<const VulnerableMatrix> r_v, std::span<const std::int64_t> a,
                        const SinkhornConfig& cfg);

struct Assignment {
  std::vector<int> column_of_row;  // 0-based
  double value = 0.0;
};

// Maximum-weight perfect matching on a square matrix. Among optimal
// assignments (within `tol`) returns the lexicographically smallest.
Assignment max_weight_assignment(const Eigen::MatrixXd& weight, double tol = 1e-9);

// Permutation P maximizing <P, p_b>_F.
PermutationMatrix hungarian_round(const Eigen::MatrixXd& p_b);

// Dense 0/1 d x d matrix of a permutation.
Eigen::MatrixXd to_dense(const PermutationMatrix& p);

// Rewrites the vulnerable positions of `ranking`: the edge at positions[r]
// becomes edges[sigma(column_of_row[r])], where sigma is the row->column
// map of `perm` (R~ = R^v P).
Ranking apply_vulnerable_permutation(const Ranking& ranking, const VulnerableMatrix& rv, const PermutationMatrix& perm);

}  // namespace rankgauntlet
