#include "rankgauntlet/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace rankgauntlet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidRanking: return "InvalidRanking";
    case ErrorCode::kMalformedMatrix: return "MalformedMatrix";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kAllZeroTrust: return "AllZeroTrust";
    case ErrorCode::kInvalidSparsity: return "InvalidSparsity";
    case ErrorCode::kInvalidArchitecture: return "InvalidArchitecture";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kInvalidZeta: return "InvalidZeta";
    case ErrorCode::kNoMaliciousClients: return "NoMaliciousClients";
    case ErrorCode::kNoHistory: return "NoHistory";
    case ErrorCode::kEmptyRange: return "EmptyRange";
    case ErrorCode::kEmptyTrueSet: return "EmptyTrueSet";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kNumericOverflow: return "NumericOverflow";
    case ErrorCode::kMissingKnowledge: return "MissingKnowledge";
    case ErrorCode::kTooFewClients: return "TooFewClients";
    case ErrorCode::kMissingRootData: return "MissingRootData";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kParseError: return "ParseError";
  }
  return "Unknown";
}

namespace {

bool is_permutation_of_1_to_n(const std::vector<int>& v) {
  std::vector<char> seen(v.size() + 1, 0);
  for (int x : v) {
    if (x < 1 || x > static_cast<int>(v.size()) || seen[static_cast<std::size_t>(x)]) return false;
    seen[static_cast<std::size_t>(x)] = 1;
  }
  return true;
}

template <typename T>
std::vector<int> sgi_impl(std::span<const T> values) {
  std::vector<int> ids(values.size());
  std::iota(ids.begin(), ids.end(), 1);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return values[static_cast<std::size_t>(a - 1)] < values[static_cast<std::size_t>(b - 1)];
  });
  return ids;
}

void require_same_shape(std::span<const Ranking> rankings) {
  if (rankings.empty()) throw Error(ErrorCode::kDimensionMismatch, "no rankings to aggregate");
  const int n = rankings.front().size();
  const int layer = rankings.front().layer_id();
  for (const auto& r : rankings) {
    if (r.size() != n || r.layer_id() != layer)
      throw Error(ErrorCode::kDimensionMismatch, "rankings differ in size or layer");
  }
}

void require_scale(std::span<const std::int64_t> a, int n) {
  if (static_cast<int>(a.size()) != n)
    throw Error(ErrorCode::kDimensionMismatch, "weight vector length differs from n");
  for (std::size_t i = 1; i < a.size(); ++i) {
    if (a[i] <= a[i - 1]) throw Error(ErrorCode::kDimensionMismatch, "weight vector must be strictly ascending");
  }
}

}  // namespace

Ranking::Ranking(int layer_id, std::vector<int> order) : layer_id_(layer_id), order_(std::move(order)) {
  if (order_.empty()) throw Error(ErrorCode::kInvalidRanking, "empty ranking");
  if (!is_permutation_of_1_to_n(order_))
    throw Error(ErrorCode::kInvalidRanking, "order is not a permutation of 1..n");
}

Ranking Ranking::identity(int layer_id, int n) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 1);
  return Ranking(layer_id, std::move(order));
}

Ranking Ranking::reversed() const {
  std::vector<int> rev(order_.rbegin(), order_.rend());
  return Ranking(layer_id_, std::move(rev));
}

std::vector<int> Ranking::selected_edges(double k_percent) const {
  const int t = selection_boundary(size(), k_percent);
  std::vector<int> out(order_.begin() + t, order_.end());
  std::sort(out.begin(), out.end());
  return out;
}

PermutationMatrix::PermutationMatrix(std::vector<int> col_of_row) : col_of_row_(std::move(col_of_row)) {
  if (col_of_row_.empty() || !is_permutation_of_1_to_n(col_of_row_))
    throw Error(ErrorCode::kMalformedMatrix, "rows do not map one-to-one onto columns");
}

PermutationMatrix PermutationMatrix::from_dense(const IntMatrix& dense) {
  if (dense.rows() != dense.cols() || dense.rows() == 0)
    throw Error(ErrorCode::kMalformedMatrix, "matrix must be square and non-empty");
  const Index n = dense.rows();
  std::vector<int> cols(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const auto v = dense(i, j);
      if (v == 0) continue;
      if (v != 1 || cols[static_cast<std::size_t>(i)] != 0)
        throw Error(ErrorCode::kMalformedMatrix, "row " + std::to_string(i + 1) + " is not one-hot");
      cols[static_cast<std::size_t>(i)] = static_cast<int>(j + 1);
    }
    if (cols[static_cast<std::size_t>(i)] == 0)
      throw Error(ErrorCode::kMalformedMatrix, "row " + std::to_string(i + 1) + " is empty");
  }
  // Row checks passed; a repeated column means some column is not one-hot.
  return PermutationMatrix(std::move(cols));
}

IntMatrix PermutationMatrix::dense() const {
  const Index n = size();
  IntMatrix m = IntMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) m(i, col_of_row_[static_cast<std::size_t>(i)] - 1) = 1;
  return m;
}

int Supermask::popcount() const {
  return static_cast<int>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::vector<std::int64_t> default_scale(int n) {
  std::vector<std::int64_t> a(static_cast<std::size_t>(n));
  std::iota(a.begin(), a.end(), std::int64_t{1});
  return a;
}

int selection_boundary(int n, double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0))
    throw Error(ErrorCode::kInvalidSparsity, "k_percent must lie in (0, 100]");
  // Round before flooring so that e.g. 10 * (1 - 0.9) lands on 1, not 0.9999.
  const double raw = static_cast<double>(n) * (100.0 - k_percent) / 100.0;
  const double snapped = std::round(raw * 1e9) / 1e9;
  return static_cast<int>(std::floor(snapped));
}

ReputationVector reputation_of(const Ranking& r) {
  ReputationVector rep;
  rep.scale = default_scale(r.size());
  rep.values.assign(static_cast<std::size_t>(r.size()), 0);
  for (int i = 1; i <= r.size(); ++i) rep.values[static_cast<std::size_t>(r.at(i) - 1)] = i;
  return rep;
}

PermutationMatrix to_matrix(const Ranking& r) { return PermutationMatrix(r.order()); }

Ranking from_matrix(const PermutationMatrix& p, int layer_id) { return Ranking(layer_id, p.columns()); }

Ranking from_matrix(const IntMatrix& dense, int layer_id) {
  return from_matrix(PermutationMatrix::from_dense(dense), layer_id);
}

AggregateMatrix aggregate(std::span<const Ranking> rankings) {
  require_same_shape(rankings);
  const int n = rankings.front().size();
  AggregateMatrix s;
  s.layer_id = rankings.front().layer_id();
  s.num_clients = static_cast<int>(rankings.size());
  s.counts = IntMatrix::Zero(n, n);
  for (const auto& r : rankings) {
    for (int i = 1; i <= n; ++i) s.counts(i - 1, r.at(i) - 1) += 1;
  }
  return s;
}

ReputationVector aggregated_reputation(const AggregateMatrix& s, std::span<const std::int64_t> a) {
  const auto n = static_cast<int>(s.counts.cols());
  require_scale(a, n);
  ReputationVector rep;
  rep.scale.assign(a.begin(), a.end());
  rep.values.assign(static_cast<std::size_t>(n), 0);
  for (Index j = 0; j < n; ++j) {
    std::int64_t w = 0;
    for (Index i = 0; i < n; ++i) w += a[static_cast<std::size_t>(i)] * s.counts(i, j);
    rep.values[static_cast<std::size_t>(j)] = w;
  }
  return rep;
}

std::vector<int> sort_get_index(std::span<const double> values) { return sgi_impl(values); }
std::vector<int> sort_get_index(std::span<const std::int64_t> values) { return sgi_impl(values); }

Ranking majority_vote(std::span<const Ranking> rankings, std::span<const std::int64_t> a) {
  const auto s = aggregate(rankings);
  const auto w = aggregated_reputation(s, a);
  return Ranking(s.layer_id, sort_get_index(std::span<const std::int64_t>(w.values)));
}

Ranking majority_vote(std::span<const Ranking> rankings) {
  require_same_shape(rankings);
  const auto a = default_scale(rankings.front().size());
  return majority_vote(rankings, a);
}

std::vector<double> weighted_reputation(std::span<const Ranking> rankings, std::span<const double> trust,
                                        std::span<const std::int64_t> a) {
  require_same_shape(rankings);
  const int n = rankings.front().size();
  require_scale(a, n);
  if (trust.size() != rankings.size())
    throw Error(ErrorCode::kDimensionMismatch, "one trust score per ranking required");
  bool any_positive = false;
  for (double s : trust) {
    if (!(s >= 0.0) || !std::isfinite(s))
      throw Error(ErrorCode::kAllZeroTrust, "trust scores must be finite and non-negative");
    any_positive = any_positive || s > 0.0;
  }
  if (!any_positive) throw Error(ErrorCode::kAllZeroTrust, "all trust scores are zero");

  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  for (std::size_t u = 0; u < rankings.size(); ++u) {
    if (trust[u] == 0.0) continue;
    for (int i = 1; i <= n; ++i) {
      w[static_cast<std::size_t>(rankings[u].at(i) - 1)] +=
          trust[u] * static_cast<double>(a[static_cast<std::size_t>(i - 1)]);
    }
  }
  return w;
}

Ranking weighted_majority_vote(std::span<const Ranking> rankings, std::span<const double> trust,
                               std::span<const std::int64_t> a) {
  const auto w = weighted_reputation(rankings, trust, a);
  return Ranking(rankings.front().layer_id(), sort_get_index(std::span<const double>(w)));
}

Supermask supermask_of(const Ranking& r, double k_percent) {
  const int t = selection_boundary(r.size(), k_percent);
  Supermask mask;
  mask.layer_id = r.layer_id();
  mask.k_percent = k_percent;
  mask.bits.assign(static_cast<std::size_t>(r.size()), 0);
  for (int pos = t + 1; pos <= r.size(); ++pos) mask.bits[static_cast<std::size_t>(r.at(pos) - 1)] = 1;
  return mask;
}

namespace {

std::vector<Ranking> layer_slice(std::span<const LayerRankings> clients, std::size_t layer) {
  std::vector<Ranking> out;
  out.reserve(clients.size());
  for (const auto& c : clients) {
    if (c.size() <= layer) throw Error(ErrorCode::kDimensionMismatch, "client is missing a layer");
    out.push_back(c[layer]);
  }
  return out;
}

}  // namespace

LayerRankings majority_vote_layers(std::span<const LayerRankings> clients) {
  if (clients.empty()) throw Error(ErrorCode::kDimensionMismatch, "no clients");
  LayerRankings out;
  for (std::size_t l = 0; l < clients.front().size(); ++l) {
    const auto slice = layer_slice(clients, l);
    out.push_back(majority_vote(slice));
  }
  return out;
}

LayerRankings weighted_vote_layers(std::span<const LayerRankings> clients, std::span<const double> trust) {
  if (clients.empty()) throw Error(ErrorCode::kDimensionMismatch, "no clients");
  LayerRankings out;
  for (std::size_t l = 0; l < clients.front().size(); ++l) {
    const auto slice = layer_slice(clients, l);
    const auto a = default_scale(slice.front().size());
    out.push_back(weighted_majority_vote(slice, trust, a));
  }
  return out;
}

std::string serialize(const Ranking& r) {
  std::ostringstream os;
  os << r.layer_id() << ": ";
  for (int i = 1; i <= r.size(); ++i) {
    if (i > 1) os << ',';
    os << r.at(i);
  }
  return os.str();
}

Ranking parse_ranking(const std::string& line) {
  const auto colon = line.find(':');
  if (colon == std::string::npos) throw Error(ErrorCode::kParseError, "missing ':' in ranking line");
  int layer = 0;
  try {
    std::size_t used = 0;
    layer = std::stoi(line.substr(0, colon), &used);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParseError, "bad layer id in '" + line + "'");
  }
  std::vector<int> order;
  std::stringstream body(line.substr(colon + 1));
  std::string tok;
  while (std::getline(body, tok, ',')) {
    try {
      order.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParseError, "bad edge id '" + tok + "'");
    }
  }
  return Ranking(layer, std::move(order));
}

void write_rankings(std::ostream& os, std::span<const Ranking> layers) {
  for (const auto& r : layers) os << serialize(r) << '\n';
}

LayerRankings read_rankings(std::istream& is) {
  LayerRankings out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_ranking(line));
  }
  return out;
}

}  // namespace rankgauntlet
