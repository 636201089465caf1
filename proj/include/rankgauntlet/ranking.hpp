#pragma once

// Permutation algebra and majority voting over per-layer edge rankings.
//
// Conventions: edge IDs and reputation indices are 1-based. A ranking lists
// edge IDs in ascending order of importance, so the edge at position i
// (1-based) carries reputation weight a_i.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rankgauntlet/error.hpp"

namespace rankgauntlet {

using Index = std::int64_t;
using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

class Ranking {
 public:
  // Throws kInvalidRanking unless `order` is a permutation of {1..n}, n >= 1.
  Ranking(int layer_id, std::vector<int> order);

  static Ranking identity(int layer_id, int n);

  int layer_id() const noexcept { return layer_id_; }
  int size() const noexcept { return static_cast<int>(order_.size()); }
  const std::vector<int>& order() const noexcept { return order_; }
  // Edge at 1-based position `pos`.
  int at(int pos) const { return order_.at(static_cast<std::size_t>(pos - 1)); }

  // Same layer, least and most important swapped end to end.
  Ranking reversed() const;

  // Top-k edge IDs for sparsity k_percent, sorted ascending by ID.
  std::vector<int> selected_edges(double k_percent) const;

  friend bool operator==(const Ranking&, const Ranking&) = default;

 private:
  int layer_id_;
  std::vector<int> order_;
};

// One ranking per layer of a network.
using LayerRankings = std::vector<Ranking>;

// Sparse one-hot matrix: row i (reputation index) has its 1 in column
// col_of_row[i-1] (edge ID).
class PermutationMatrix {
 public:
  // Throws kMalformedMatrix unless `col_of_row` is a permutation of {1..n}.
  explicit PermutationMatrix(std::vector<int> col_of_row);
  // Throws kMalformedMatrix unless `dense` is square, 0/1, one-hot per row and column.
  static PermutationMatrix from_dense(const IntMatrix& dense);

  int size() const noexcept { return static_cast<int>(col_of_row_.size()); }
  int column_of(int row) const { return col_of_row_.at(static_cast<std::size_t>(row - 1)); }
  const std::vector<int>& columns() const noexcept { return col_of_row_; }
  IntMatrix dense() const;

  friend bool operator==(const PermutationMatrix&, const PermutationMatrix&) = default;

 private:
  std::vector<int> col_of_row_;
};

struct ReputationVector {
  // values[j] is the reputation of edge j+1.
  std::vector<std::int64_t> values;
  // Weight vector A = [a_1..a_n].
  std::vector<std::int64_t> scale;
};

// counts(i, j) = number of clients placing edge j+1 at reputation index i+1.
struct AggregateMatrix {
  int layer_id = 0;
  int num_clients = 0;
  IntMatrix counts;
};

struct Supermask {
  int layer_id = 0;
  double k_percent = 100.0;
  // bits[j] == 1 iff edge j+1 is in the subnetwork.
  std::vector<std::uint8_t> bits;

  int popcount() const;
};

// A = [1..n].
std::vector<std::int64_t> default_scale(int n);

// Selection boundary t = floor(n (1 - k/100)); positions > t are selected.
// Throws kInvalidSparsity unless 0 < k <= 100.
int selection_boundary(int n, double k_percent);

ReputationVector reputation_of(const Ranking& r);
PermutationMatrix to_matrix(const Ranking& r);
Ranking from_matrix(const PermutationMatrix& p, int layer_id = 0);
Ranking from_matrix(const IntMatrix& dense, int layer_id = 0);

AggregateMatrix aggregate(std::span<const Ranking> rankings);
ReputationVector aggregated_reputation(const AggregateMatrix& s, std::span<const std::int64_t> a);

// Sort-get-index: edge IDs ordered by ascending value, ties by smaller edge ID.
std::vector<int> sort_get_index(std::span<const double> values);
std::vector<int> sort_get_index(std::span<const std::int64_t> values);

Ranking majority_vote(std::span<const Ranking> rankings, std::span<const std::int64_t> a);
Ranking majority_vote(std::span<const Ranking> rankings);
// Real-valued weighted tally A * sum_u s_u R_u; used directly by weighted AGRs.
std::vector<double> weighted_reputation(std::span<const Ranking> rankings,
                                        std::span<const double> trust,
                                        std::span<const std::int64_t> a);
Ranking weighted_majority_vote(std::span<const Ranking> rankings, std::span<const double> trust,
                               std::span<const std::int64_t> a);

Supermask supermask_of(const Ranking& r, double k_percent);

// Layer-wise helpers over multi-layer submissions: clients[u][layer].
LayerRankings majority_vote_layers(std::span<const LayerRankings> clients);
LayerRankings weighted_vote_layers(std::span<const LayerRankings> clients,
                                   std::span<const double> trust);

// Text form: one line per layer, `layer_id: e1,e2,...,en`.
std::string serialize(const Ranking& r);
Ranking parse_ranking(const std::string& line);
void write_rankings(std::ostream& os, std::span<const Ranking> layers);
LayerRankings read_rankings(std::istream& is);

}  // namespace rankgauntlet
