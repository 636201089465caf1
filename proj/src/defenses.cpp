#include "rankgauntlet/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <Eigen/SVD>

#include "rankgauntlet/error.hpp"
#include "rankgauntlet/rng.hpp"

namespace rankgauntlet {

std::string_view to_string(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::kNone: return "none";
    case DefenseKind::kMultiKrum: return "multi_krum";
    case DefenseKind::kAfa: return "afa";
    case DefenseKind::kFaba: return "faba";
    case DefenseKind::kDnc: return "dnc";
    case DefenseKind::kFltrust: return "fltrust";
    case DefenseKind::kFoolsgold: return "foolsgold";
    case DefenseKind::kFang: return "fang";
    case DefenseKind::kIbd: return "ibd";
  }
  return "none";
}

DefenseKind parse_defense(std::string_view name) {
  for (auto k : {DefenseKind::kNone, DefenseKind::kMultiKrum, DefenseKind::kAfa, DefenseKind::kFaba,
                 DefenseKind::kDnc, DefenseKind::kFltrust, DefenseKind::kFoolsgold, DefenseKind::kFang,
                 DefenseKind::kIbd}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown defense '" + std::string(name) + "'");
}

Eigen::MatrixXd embed(std::span<const LayerRankings> clients) {
  if (clients.empty()) throw Error(ErrorCode::kEmptyInput, "no clients to embed");
  Eigen::Index width = 0;
  for (const auto& r : clients.front()) width += r.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(clients.size()), width);
  for (std::size_t u = 0; u < clients.size(); ++u) {
    if (clients[u].size() != clients.front().size())
      throw Error(ErrorCode::kDimensionMismatch, "clients disagree on layer count");
    Eigen::Index col = 0;
    for (const auto& r : clients[u]) {
      const auto rep = reputation_of(r);
      const double mid = 0.5 * static_cast<double>(rep.scale.front() + rep.scale.back());
      if (col + r.size() > width) throw Error(ErrorCode::kDimensionMismatch, "clients disagree on layer sizes");
      for (std::size_t j = 0; j < rep.values.size(); ++j)
        out(static_cast<Eigen::Index>(u), col + static_cast<Eigen::Index>(j)) = static_cast<double>(rep.values[j]) - mid;
      col += r.size();
    }
    if (col != width) throw Error(ErrorCode::kDimensionMismatch, "clients disagree on layer sizes");
  }
  return out;
}

double cosine(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) return 0.0;
  return x.dot(y) / (nx * ny);
}

namespace {

std::vector<int> all_indices(int u) {
  std::vector<int> v(static_cast<std::size_t>(u));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::vector<int> complement(int u, const std::vector<bool>& removed) {
  std::vector<int> kept;
  for (int i = 0; i < u; ++i)
    if (!removed[static_cast<std::size_t>(i)]) kept.push_back(i);
  return kept;
}

Eigen::VectorXd mean_of_rows(const Eigen::MatrixXd& e, std::span<const int> rows) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(e.cols());
  for (int r : rows) mean += e.row(r).transpose();
  return mean / static_cast<double>(rows.size());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

DefenseVerdict multi_krum(const Eigen::MatrixXd& embeddings, int m) {
  const int u = static_cast<int>(embeddings.rows());
  if (m < 0 || u <= 2 * m + 3) throw Error(ErrorCode::kTooFewClients, "multi-krum needs U > 2m + 3");
  const int c = u - 2 * m - 3;

  Eigen::MatrixXd dist(u, u);
  for (int i = 0; i < u; ++i)
    for (int j = 0; j < u; ++j) dist(i, j) = (embeddings.row(i) - embeddings.row(j)).squaredNorm();

  DefenseVerdict v;
  v.scores.assign(static_cast<std::size_t>(u), 0.0);
  std::vector<int> remaining = all_indices(u);
  for (int round = 0; round < c; ++round) {
    const int rem = static_cast<int>(remaining.size());
    const int neighbours = std::max(1, rem - m - 2);
    int best = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (int i : remaining) {
      std::vector<double> d;
      for (int j : remaining)
        if (j != i) d.push_back(dist(i, j));
      std::sort(d.begin(), d.end());
      const auto take = std::min<std::size_t>(static_cast<std::size_t>(neighbours), d.size());
      const double score = std::accumulate(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(take), 0.0);
      if (round == 0) v.scores[static_cast<std::size_t>(i)] = score;
      if (score < best_score) {
        best_score = score;
        best = i;
      }
    }
    v.kept.push_back(best);
    remaining.erase(std::find(remaining.begin(), remaining.end(), best));
  }
  std::sort(v.kept.begin(), v.kept.end());
  return v;
}

DefenseVerdict afa(const Eigen::MatrixXd& embeddings, double xi, double xi_step) {
  const int u = static_cast<int>(embeddings.rows());
  if (u == 0) throw Error(ErrorCode::kEmptyInput, "no clients");
  std::vector<bool> removed(static_cast<std::size_t>(u), false);
  DefenseVerdict v;
  v.scores.assign(static_cast<std::size_t>(u), 0.0);
  for (;;) {
    const auto good = complement(u, removed);
    const Eigen::VectorXd agg = mean_of_rows(embeddings, good);
    std::vector<double> sims;
    for (int i : good) {
      const double s = cosine(embeddings.row(i).transpose(), agg);
      v.scores[static_cast<std::size_t>(i)] = s;
      sims.push_back(s);
    }
    const double mean = std::accumulate(sims.begin(), sims.end(), 0.0) / static_cast<double>(sims.size());
    const double med = median(sims);
    double var = 0.0;
    for (double s : sims) var += (s - mean) * (s - mean);
    const double sd = std::sqrt(var / static_cast<double>(sims.size()));

    bool changed = false;
    for (std::size_t g = 0; g < good.size(); ++g) {
      const double s = sims[g];
      const bool out = mean < med ? s < med - xi * sd : s > med + xi * sd;
      if (out) {
        removed[static_cast<std::size_t>(good[g])] = true;
        changed = true;
      }
    }
    if (complement(u, removed).empty()) {
      // Never filter everyone; fall back to the last non-empty set.
      for (int i : good) removed[static_cast<std::size_t>(i)] = false;
      break;
    }
    if (!changed) break;
    xi += xi_step;
  }
  v.kept = complement(u, removed);
  return v;
}

DefenseVerdict faba(const Eigen::MatrixXd& embeddings, int m) {
  const int u = static_cast<int>(embeddings.rows());
  if (m < 0 || u <= m) throw Error(ErrorCode::kTooFewClients, "faba needs U > m");
  std::vector<bool> removed(static_cast<std::size_t>(u), false);
  DefenseVerdict v;
  v.scores.assign(static_cast<std::size_t>(u), 0.0);
  for (int step = 0; step < m; ++step) {
    const auto good = complement(u, removed);
    const Eigen::VectorXd mean = mean_of_rows(embeddings, good);
    int worst = -1;
    double worst_d = -1.0;
    for (int i : good) {
      const double d = (embeddings.row(i).transpose() - mean).norm();
      if (step == 0) v.scores[static_cast<std::size_t>(i)] = d;
      if (d > worst_d) {
        worst_d = d;
        worst = i;
      }
    }
    removed[static_cast<std::size_t>(worst)] = true;
  }
  v.kept = complement(u, removed);
  return v;
}

DefenseVerdict dnc(const Eigen::MatrixXd& embeddings, int m, const DncParams& params) {
  const int u = static_cast<int>(embeddings.rows());
  if (u == 0) throw Error(ErrorCode::kEmptyInput, "no clients");
  if (!(params.subsample > 0.0 && params.subsample <= 1.0))
    throw Error(ErrorCode::kInvalidConfig, "dnc subsample must lie in (0, 1]");
  const auto dims = static_cast<int>(embeddings.cols());
  const int keep_dims = std::max(1, static_cast<int>(std::lround(params.subsample * dims)));

  std::vector<int> cols(static_cast<std::size_t>(dims));
  std::iota(cols.begin(), cols.end(), 0);
  if (keep_dims < dims) {
    Rng rng(params.seed);
    std::shuffle(cols.begin(), cols.end(), rng);
    cols.resize(static_cast<std::size_t>(keep_dims));
    std::sort(cols.begin(), cols.end());
  }
  Eigen::MatrixXd sub(u, keep_dims);
  for (int j = 0; j < keep_dims; ++j) sub.col(j) = embeddings.col(cols[static_cast<std::size_t>(j)]);
  const Eigen::RowVectorXd mu = sub.colwise().mean();
  const Eigen::MatrixXd centered = sub.rowwise() - mu;

  DefenseVerdict v;
  v.scores.assign(static_cast<std::size_t>(u), 0.0);
  if (centered.norm() > 0.0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::VectorXd top = svd.matrixV().col(0);
    for (int i = 0; i < u; ++i) {
      const double p = centered.row(i).dot(top);
      v.scores[static_cast<std::size_t>(i)] = p * p;
    }
  }
  const int drop = std::min(u - 1, static_cast<int>(std::floor(params.filter_frac * m + 1e-9)));
  auto order = all_indices(u);
  // Highest score first; equal scores drop the higher index first.
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = v.scores[static_cast<std::size_t>(a)];
    const double sb = v.scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a > b;
  });
  std::vector<bool> removed(static_cast<std::size_t>(u), false);
  for (int i = 0; i < std::max(0, drop); ++i) removed[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  v.kept = complement(u, removed);
  return v;
}

DefenseVerdict fltrust(const Eigen::MatrixXd& embeddings, const Eigen::VectorXd& server_embedding) {
  const int u = static_cast<int>(embeddings.rows());
  if (server_embedding.size() != embeddings.cols())
    throw Error(ErrorCode::kDimensionMismatch, "server embedding width");
  DefenseVerdict v;
  for (int i = 0; i < u; ++i) {
    const double t = std::max(0.0, cosine(embeddings.row(i).transpose(), server_embedding));
    v.trust.push_back(t);
    v.scores.push_back(t);
    if (t > 0.0) v.kept.push_back(i);
  }
  return v;
}

DefenseVerdict foolsgold(const Eigen::MatrixXd& history) {
  const int u = static_cast<int>(history.rows());
  if (u == 0) throw Error(ErrorCode::kEmptyInput, "no clients");
  Eigen::MatrixXd cs = Eigen::MatrixXd::Zero(u, u);
  for (int i = 0; i < u; ++i)
    for (int j = 0; j < u; ++j)
      if (i != j) cs(i, j) = cosine(history.row(i).transpose(), history.row(j).transpose());
  Eigen::VectorXd maxcs(u);
  for (int i = 0; i < u; ++i) maxcs(i) = u > 1 ? cs.row(i).maxCoeff() : 0.0;
  // Pardoning: honest clients that resemble a sybil are scaled back.
  for (int i = 0; i < u; ++i)
    for (int j = 0; j < u; ++j)
      if (i != j && maxcs(i) < maxcs(j) && maxcs(j) > 0.0) cs(i, j) *= maxcs(i) / maxcs(j);

  std::vector<double> wv(static_cast<std::size_t>(u));
  for (int i = 0; i < u; ++i) {
    const double top = u > 1 ? cs.row(i).maxCoeff() : 0.0;
    wv[static_cast<std::size_t>(i)] = std::clamp(1.0 - top, 0.0, 1.0);
  }
  const double wmax = *std::max_element(wv.begin(), wv.end());
  DefenseVerdict v;
  if (wmax <= 0.0) {
    v.trust.assign(static_cast<std::size_t>(u), 1.0);
  } else {
    for (double& w : wv) {
      w /= wmax;
      if (w >= 1.0) w = 0.99;
      if (w <= 0.0) {
        w = 0.0;
        continue;
      }
      w = std::clamp(std::log(w / (1.0 - w)) + 0.5, 0.0, 1.0);
    }
    v.trust = wv;
    if (std::all_of(wv.begin(), wv.end(), [](double w) { return w <= 0.0; }))
      v.trust.assign(static_cast<std::size_t>(u), 1.0);
  }
  v.scores = v.trust;
  for (int i = 0; i < u; ++i)
    if (v.trust[static_cast<std::size_t>(i)] > 0.0) v.kept.push_back(i);
  return v;
}

DefenseVerdict fang_validate(std::span<const LayerRankings> clients, const Supernetwork& net,
                             const Dataset& validation) {
  if (validation.empty()) throw Error(ErrorCode::kMissingRootData, "fang needs a validation set");
  const int u = static_cast<int>(clients.size());
  if (u == 0) throw Error(ErrorCode::kEmptyInput, "no clients");
  DefenseVerdict v;
  v.scores.assign(static_cast<std::size_t>(u), 0.0);
  if (u == 1) {
    v.kept = {0};
    return v;
  }
  const auto with_all = evaluate_full(net, majority_vote_layers(clients), validation);
  std::vector<std::pair<double, int>> harmful;  // (loss gain from removal, index)
  for (int i = 0; i < u; ++i) {
    std::vector<LayerRankings> rest;
    for (int j = 0; j < u; ++j)
      if (j != i) rest.push_back(clients[static_cast<std::size_t>(j)]);
    const auto without = evaluate_full(net, majority_vote_layers(rest), validation);
    const double loss_gain = with_all.loss - without.loss;
    v.scores[static_cast<std::size_t>(i)] = loss_gain;
    if (loss_gain > 0.0 && without.accuracy > with_all.accuracy) harmful.emplace_back(loss_gain, i);
  }
  std::sort(harmful.begin(), harmful.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  harmful.resize(std::min<std::size_t>(harmful.size(), static_cast<std::size_t>(u / 2)));
  std::vector<bool> removed(static_cast<std::size_t>(u), false);
  for (const auto& h : harmful) removed[static_cast<std::size_t>(h.second)] = true;
  v.kept = complement(u, removed);
  return v;
}

DefenseVerdict ibd(std::span<const LayerRankings> clients, double k_percent) {
  const int u = static_cast<int>(clients.size());
  if (u < 3) throw Error(ErrorCode::kTooFewClients, "ibd needs U >= 3");
  const std::size_t layers = clients.front().size();
  std::vector<std::vector<std::vector<bool>>> top(static_cast<std::size_t>(u));
  for (int i = 0; i < u; ++i) {
    for (std::size_t l = 0; l < layers; ++l) {
      const auto& r = clients[static_cast<std::size_t>(i)][l];
      std::vector<bool> in(static_cast<std::size_t>(r.size()) + 1, false);
      for (int e : r.selected_edges(k_percent)) in[static_cast<std::size_t>(e)] = true;
      top[static_cast<std::size_t>(i)].push_back(std::move(in));
    }
  }
  std::vector<double> mu(static_cast<std::size_t>(u), 0.0);
  for (int i = 0; i < u; ++i) {
    for (int j = 0; j < u; ++j) {
      if (i == j) continue;
      for (std::size_t l = 0; l < layers; ++l) {
        const auto& a = top[static_cast<std::size_t>(i)][l];
        const auto& b = top[static_cast<std::size_t>(j)][l];
        for (std::size_t e = 1; e < a.size(); ++e) mu[static_cast<std::size_t>(i)] += (a[e] && b[e]) ? 1.0 : 0.0;
      }
    }
    mu[static_cast<std::size_t>(i)] /= static_cast<double>(u - 1);
  }

  DefenseVerdict v;
  v.scores = mu;
  const auto [lo_it, hi_it] = std::minmax_element(mu.begin(), mu.end());
  double lo = *lo_it;
  double hi = *hi_it;
  if (lo == hi) {
    v.kept = all_indices(u);
    return v;
  }
  std::vector<bool> upper(static_cast<std::size_t>(u), false);
  for (int it = 0; it < 100; ++it) {
    // Ties go to the upper cluster, so an undecided client is kept.
    for (int i = 0; i < u; ++i) {
      const double x = mu[static_cast<std::size_t>(i)];
      upper[static_cast<std::size_t>(i)] = std::abs(x - hi) <= std::abs(x - lo);
    }
    double s_lo = 0.0, s_hi = 0.0;
    int n_lo = 0, n_hi = 0;
    for (int i = 0; i < u; ++i) {
      if (upper[static_cast<std::size_t>(i)]) {
        s_hi += mu[static_cast<std::size_t>(i)];
        ++n_hi;
      } else {
        s_lo += mu[static_cast<std::size_t>(i)];
        ++n_lo;
      }
    }
    const double new_lo = n_lo > 0 ? s_lo / n_lo : lo;
    const double new_hi = n_hi > 0 ? s_hi / n_hi : hi;
    if (new_lo == lo && new_hi == hi) break;
    lo = new_lo;
    hi = new_hi;
  }
  for (int i = 0; i < u; ++i)
    if (upper[static_cast<std::size_t>(i)]) v.kept.push_back(i);
  return v;
}

void score_verdict(DefenseVerdict& verdict, const std::vector<bool>& is_malicious) {
  const std::set<int> kept(verdict.kept.begin(), verdict.kept.end());
  int benign = 0, malicious = 0, benign_removed = 0, malicious_removed = 0;
  for (std::size_t i = 0; i < is_malicious.size(); ++i) {
    const bool removed = !kept.count(static_cast<int>(i));
    if (is_malicious[i]) {
      ++malicious;
      malicious_removed += removed;
    } else {
      ++benign;
      benign_removed += removed;
    }
  }
  verdict.fpr = benign > 0 ? static_cast<double>(benign_removed) / benign : 0.0;
  verdict.tpr = malicious > 0 ? static_cast<double>(malicious_removed) / malicious : 0.0;
  verdict.has_rates = true;
}

DefenseOutcome defend(DefenseKind kind, const DefenseInputs& in, const DefenseParams& params) {
  const int u = static_cast<int>(in.clients.size());
  if (u == 0) throw Error(ErrorCode::kEmptyInput, "no submissions");
  DefenseOutcome out;
  auto& v = out.verdict;
  switch (kind) {
    case DefenseKind::kNone: v.kept = all_indices(u); break;
    case DefenseKind::kMultiKrum: v = multi_krum(embed(in.clients), in.m); break;
    case DefenseKind::kAfa: v = afa(embed(in.clients), params.afa_xi, params.afa_step); break;
    case DefenseKind::kFaba: v = faba(embed(in.clients), in.m); break;
    case DefenseKind::kDnc: v = dnc(embed(in.clients), in.m, params.dnc); break;
    case DefenseKind::kFltrust: {
      if (!in.server_ranking) throw Error(ErrorCode::kMissingRootData, "fltrust needs the server's ranking");
      const LayerRankings server = *in.server_ranking;
      const Eigen::MatrixXd e = embed(in.clients);
      const Eigen::VectorXd s = embed(std::span<const LayerRankings>(&server, 1)).row(0).transpose();
      v = fltrust(e, s);
      break;
    }
    case DefenseKind::kFoolsgold:
      if (!in.history) throw Error(ErrorCode::kInvalidConfig, "foolsgold needs client history");
      v = foolsgold(*in.history);
      break;
    case DefenseKind::kFang:
      if (!in.root || !in.net) throw Error(ErrorCode::kMissingRootData, "fang needs server data");
      v = fang_validate(in.clients, *in.net, *in.root);
      break;
    case DefenseKind::kIbd: v = ibd(in.clients, in.k_percent); break;
  }

  if (!v.trust.empty()) {
    if (std::all_of(v.trust.begin(), v.trust.end(), [](double t) { return t <= 0.0; })) return out;
    out.global = weighted_vote_layers(in.clients, v.trust);
    return out;
  }
  if (v.kept.empty()) throw Error(ErrorCode::kEmptyInput, "defense kept no clients");
  std::vector<LayerRankings> kept;
  for (int i : v.kept) kept.push_back(in.clients[static_cast<std::size_t>(i)]);
  out.global = majority_vote_layers(kept);
  return out;
}

}  // namespace rankgauntlet
