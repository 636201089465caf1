#include "rankgauntlet/vulnid.hpp"

#include <algorithm>
#include <set>

namespace rankgauntlet {

std::vector<int> edges_strictly_between(std::span<const double> w, double lower, double upper) {
  std::vector<int> out;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (lower < w[j] && w[j] < upper) out.push_back(static_cast<int>(j) + 1);
  }
  return out;
}

VulnerableRange vulnerable_bounds(const BenignEstimate& w_bar, double m, std::span<const std::int64_t> a,
                                  double k_percent) {
  const int n = static_cast<int>(w_bar.values.size());
  if (n == 0) throw Error(ErrorCode::kDimensionMismatch, "empty estimate");
  if (static_cast<int>(a.size()) != n) throw Error(ErrorCode::kDimensionMismatch, "weight vector length");
  if (m < 0.0) throw Error(ErrorCode::kNoMaliciousClients, "m must be non-negative");

  VulnerableRange range;
  range.layer_id = w_bar.layer_id;
  range.reputations = w_bar.values;

  const int t = selection_boundary(n, k_percent);
  if (t == 0) {
    // Everything is selected; there is no boundary to cross.
    range.lower = range.upper = 0.0;
    return range;
  }
  const auto order = sort_get_index(std::span<const double>(w_bar.values));
  double w_max_out = w_bar.values[static_cast<std::size_t>(order[0] - 1)];
  for (int pos = 1; pos <= t; ++pos)
    w_max_out = std::max(w_max_out, w_bar.values[static_cast<std::size_t>(order[static_cast<std::size_t>(pos - 1)] - 1)]);
  double w_min_in = w_bar.values[static_cast<std::size_t>(order[static_cast<std::size_t>(t)] - 1)];
  for (int pos = t + 1; pos <= n; ++pos)
    w_min_in = std::min(w_min_in, w_bar.values[static_cast<std::size_t>(order[static_cast<std::size_t>(pos - 1)] - 1)]);

  const double budget = m * static_cast<double>(a.back() - a.front());
  range.lower = w_max_out - budget;
  range.upper = w_min_in + budget;
  range.edge_ids = edges_strictly_between(range.reputations, range.lower, range.upper);
  return range;
}

VulnerableRange apply_zeta(const VulnerableRange& range, double zeta) {
  if (!(zeta > 0.0 && zeta <= 1.0)) throw Error(ErrorCode::kInvalidZeta, "zeta must lie in (0, 1]");
  VulnerableRange out = range;
  const double shrink = (1.0 - zeta) * (range.upper - range.lower) / 2.0;
  out.lower = range.lower + shrink;
  out.upper = range.upper - shrink;
  out.zeta = range.zeta * zeta;
  out.edge_ids = edges_strictly_between(out.reputations, out.lower, out.upper);
  return out;
}

namespace {

std::vector<double> summed_reputation(std::span<const Ranking> rankings, std::span<const std::int64_t> a) {
  const auto s = aggregate(rankings);
  const auto w = aggregated_reputation(s, a);
  return {w.values.begin(), w.values.end()};
}

}  // namespace

BenignEstimate estimate_alternative(std::span<const Ranking> malicious, int num_clients,
                                    std::span<const std::int64_t> a) {
  const int m = static_cast<int>(malicious.size());
  if (m < 1) throw Error(ErrorCode::kNoMaliciousClients, "alternative estimation needs m >= 1");
  if (num_clients <= m) throw Error(ErrorCode::kNoMaliciousClients, "need U > m");
  BenignEstimate est;
  est.layer_id = malicious.front().layer_id();
  est.method = EstimationMethod::kAlternative;
  est.values = summed_reputation(malicious, a);
  const double factor = static_cast<double>(num_clients) / m - 1.0;
  for (auto& v : est.values) v *= factor;
  return est;
}

BenignEstimate estimate_historical(const Ranking& last_global, std::span<const Ranking> last_malicious,
                                   int num_clients, std::span<const std::int64_t> a, int round) {
  if (round < 2) throw Error(ErrorCode::kNoHistory, "no previous round to draw on");
  const int n = last_global.size();
  if (static_cast<int>(a.size()) != n) throw Error(ErrorCode::kDimensionMismatch, "weight vector length");
  BenignEstimate est;
  est.layer_id = last_global.layer_id();
  est.method = EstimationMethod::kHistorical;
  est.round = round;
  est.values.assign(static_cast<std::size_t>(n), 0.0);
  for (int pos = 1; pos <= n; ++pos) {
    est.values[static_cast<std::size_t>(last_global.at(pos) - 1)] =
        static_cast<double>(num_clients) * static_cast<double>(a[static_cast<std::size_t>(pos - 1)]);
  }
  if (!last_malicious.empty()) {
    if (last_malicious.front().size() != n) throw Error(ErrorCode::kDimensionMismatch, "malicious ranking size");
    const auto mal = summed_reputation(last_malicious, a);
    for (std::size_t j = 0; j < est.values.size(); ++j) est.values[j] -= mal[j];
  }
  return est;
}

Eigen::MatrixXd VulnerableMatrix::dense() const {
  const auto d = static_cast<Eigen::Index>(edges.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index r = 0; r < d; ++r) m(r, column_of_row[static_cast<std::size_t>(r)]) = 1.0;
  return m;
}

IntMatrix VulnerableMatrix::full() const {
  IntMatrix m = IntMatrix::Zero(n, n);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    m(positions[r] - 1, edges[static_cast<std::size_t>(column_of_row[r])] - 1) = 1;
  }
  return m;
}

VulnerableMatrix extract_vulnerable(const Ranking& ranking, std::span<const int> edges) {
  VulnerableMatrix v;
  v.layer_id = ranking.layer_id();
  v.n = ranking.size();
  v.edges.assign(edges.begin(), edges.end());
  std::sort(v.edges.begin(), v.edges.end());

  std::vector<int> column_of_edge(static_cast<std::size_t>(v.n) + 1, -1);
  for (std::size_t c = 0; c < v.edges.size(); ++c) {
    const int e = v.edges[c];
    if (e < 1 || e > v.n) throw Error(ErrorCode::kDimensionMismatch, "edge id outside layer");
    column_of_edge[static_cast<std::size_t>(e)] = static_cast<int>(c);
  }
  for (int pos = 1; pos <= v.n; ++pos) {
    const int col = column_of_edge[static_cast<std::size_t>(ranking.at(pos))];
    if (col < 0) continue;
    v.positions.push_back(pos);
    v.column_of_row.push_back(col);
  }
  return v;
}

std::vector<VulnerableMatrix> extract_vulnerable(std::span<const Ranking> rankings, const VulnerableRange& range) {
  if (range.empty()) throw Error(ErrorCode::kEmptyRange, "no vulnerable edges in layer " + std::to_string(range.layer_id));
  std::vector<VulnerableMatrix> out;
  out.reserve(rankings.size());
  for (const auto& r : rankings) out.push_back(extract_vulnerable(r, range.edge_ids));
  return out;
}

double estimation_accuracy(std::span<const int> estimated, std::span<const int> truth) {
  if (truth.empty()) throw Error(ErrorCode::kEmptyTrueSet, "true vulnerable set is empty");
  const std::set<int> est(estimated.begin(), estimated.end());
  const std::set<int> tru(truth.begin(), truth.end());
  std::size_t hit = 0;
  for (int e : tru) hit += est.count(e);
  return static_cast<double>(hit) / static_cast<double>(tru.size());
}

}  // namespace rankgauntlet
