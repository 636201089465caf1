#pragma once

// Vulnerable-edge analysis: reputation band an edge must lie in for m
// adversaries to move it across the selection boundary, estimation of the
// benign aggregate from the adversary's own view, and extraction of the
// vulnerable sub-rankings that the attack optimizes.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rankgauntlet/ranking.hpp"

namespace rankgauntlet {

enum class EstimationMethod { kAlternative, kHistorical };

struct BenignEstimate {
  int layer_id = 0;
  std::vector<double> values;  // estimated aggregated benign reputation per edge
  EstimationMethod method = EstimationMethod::kAlternative;
  int round = 0;
};

struct VulnerableRange {
  int layer_id = 0;
  double lower = 0.0;  // strict
  double upper = 0.0;  // strict
  double zeta = 1.0;
  std::vector<int> edge_ids;        // sorted ascending
  std::vector<double> reputations;  // the estimate the bounds were drawn from

  bool empty() const noexcept { return edge_ids.empty(); }
  int size() const noexcept { return static_cast<int>(edge_ids.size()); }
};

// Edges with lower < w_j < upper, ascending by ID.
std::vector<int> edges_strictly_between(std::span<const double> w, double lower, double upper);

// Bounds from the estimate's own top-k partition:
// (max(W_out) - m (a_n - a_1), min(W_in) + m (a_n - a_1)).
VulnerableRange vulnerable_bounds(const BenignEstimate& w_bar, double m, std::span<const std::int64_t> a,
                                  double k_percent);

// Shrinks both bounds inward by (1 - zeta)(upper - lower)/2. Throws kInvalidZeta.
VulnerableRange apply_zeta(const VulnerableRange& range, double zeta);

// (U/m - 1) * A * sum_u R_u over the adversary's m rankings. Throws
// kNoMaliciousClients when m = 0 or U <= m.
BenignEstimate estimate_alternative(std::span<const Ranking> malicious, int num_clients,
                                    std::span<const std::int64_t> a);

// U * A R_g(t-1) - A * sum_u R~_u(t-1). Throws kNoHistory for round < 2.
BenignEstimate estimate_historical(const Ranking& last_global, std::span<const Ranking> last_malicious,
                                   int num_clients, std::span<const std::int64_t> a, int round);

// A client's ranking restricted to a set of edges: column c is edge
// edges[c] (ascending ID), row r is the r-th smallest position any of those
// edges occupies in the client's ranking.
struct VulnerableMatrix {
  int layer_id = 0;
  int n = 0;
  std::vector<int> edges;      // ascending edge IDs
  std::vector<int> positions;  // ascending 1-based positions
  // column_of_row[r] = column index (into `edges`) of the edge at positions[r].
  std::vector<int> column_of_row;

  int size() const noexcept { return static_cast<int>(edges.size()); }
  // d x d one-hot matrix.
  Eigen::MatrixXd dense() const;
  // n x n matrix: the client's permutation matrix with non-vulnerable entries zeroed.
  IntMatrix full() const;
};

std::vector<VulnerableMatrix> extract_vulnerable(std::span<const Ranking> rankings, const VulnerableRange& range);
VulnerableMatrix extract_vulnerable(const Ranking& ranking, std::span<const int> edges);

// |estimated ∩ truth| / |truth|. Throws kEmptyTrueSet.
double estimation_accuracy(std::span<const int> estimated, std::span<const int> truth);

}  // namespace rankgauntlet
