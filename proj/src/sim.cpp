#include "rankgauntlet/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "rankgauntlet/error.hpp"
#include "rankgauntlet/rng.hpp"
#include "rankgauntlet/vulnid.hpp"

namespace rankgauntlet {

std::vector<Dataset> partition_iid(const Dataset& data, int num_shards, std::uint64_t seed) {
  data.validate();
  if (num_shards < 1 || data.size() < num_shards)
    throw Error(ErrorCode::kTooFewSamples, "need at least one sample per shard");
  Rng rng(derive_seed(seed, {stream::kPartition}));
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(data.num_classes));
  for (int i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(i);

  // Dealing class after class with one running cursor keeps both shard sizes
  // and per-class counts within one of each other.
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(num_shards));
  std::size_t cursor = 0;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (int i : members) rows[cursor++ % rows.size()].push_back(i);
  }
  std::vector<Dataset> out;
  for (auto& r : rows) {
    std::sort(r.begin(), r.end());
    out.push_back(data.subset(r));
  }
  return out;
}

std::vector<Dataset> partition_dirichlet(const Dataset& data, int num_shards, double beta, std::uint64_t seed) {
  data.validate();
  if (!(beta > 0.0)) throw Error(ErrorCode::kInvalidConfig, "dirichlet beta must be positive");
  if (num_shards < 1 || data.size() < num_shards)
    throw Error(ErrorCode::kTooFewSamples, "need at least one sample per shard");
  Rng rng(derive_seed(seed, {stream::kPartition}));
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(data.num_classes));
  for (int i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(i);
  for (auto& members : by_class) std::shuffle(members.begin(), members.end(), rng);

  std::gamma_distribution<double> gamma(beta, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(num_shards));
    for (const auto& members : by_class) {
      std::vector<double> p(static_cast<std::size_t>(num_shards));
      double total = 0.0;
      for (auto& x : p) total += (x = gamma(rng));
      if (total <= 0.0) {
        std::fill(p.begin(), p.end(), 1.0);
        total = static_cast<double>(num_shards);
      }
      double acc = 0.0;
      std::size_t start = 0;
      for (std::size_t s = 0; s < p.size(); ++s) {
        acc += p[s] / total;
        const auto end = s + 1 == p.size() ? members.size()
                                           : std::min(members.size(), static_cast<std::size_t>(std::llround(acc * static_cast<double>(members.size()))));
        for (std::size_t i = start; i < end; ++i) rows[s].push_back(members[i]);
        start = std::max(start, end);
      }
    }
    if (std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.empty(); })) continue;
    std::vector<Dataset> out;
    for (auto& r : rows) {
      std::sort(r.begin(), r.end());
      out.push_back(data.subset(r));
    }
    return out;
  }
  throw Error(ErrorCode::kTooFewSamples, "could not draw a partition without empty shards");
}

double edge_cross_rate(const Ranking& before, const Ranking& after, double k_percent) {
  return edge_cross_rate(std::span<const Ranking>(&before, 1), std::span<const Ranking>(&after, 1), k_percent);
}

double edge_cross_rate(std::span<const Ranking> before, std::span<const Ranking> after, double k_percent) {
  if (before.size() != after.size()) throw Error(ErrorCode::kDimensionMismatch, "layer count differs");
  std::size_t selected = 0;
  std::size_t kept = 0;
  for (std::size_t l = 0; l < before.size(); ++l) {
    if (before[l].size() != after[l].size()) throw Error(ErrorCode::kDimensionMismatch, "layer size differs");
    const auto b = before[l].selected_edges(k_percent);
    const auto a = after[l].selected_edges(k_percent);
    const std::set<int> after_set(a.begin(), a.end());
    selected += b.size();
    for (int e : b) kept += after_set.count(e);
  }
  if (selected == 0) return 0.0;
  return static_cast<double>(selected - kept) / static_cast<double>(selected);
}

double attack_impact(double acc_benign, double acc_attacked) {
  if (!(acc_benign > 0.0)) throw Error(ErrorCode::kInvalidConfig, "benign accuracy must be positive");
  return (acc_benign - acc_attacked) / acc_benign * 100.0;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidConfig, what); };
  if (total_clients < 1) fail("N must be >= 1");
  if (per_round < 1 || per_round > total_clients) fail("U must lie in [1, N]");
  if (malicious < 0 || malicious > per_round) fail("m must lie in [0, U]");
  if (rounds < 1) fail("T must be >= 1");
  if (!(k_percent > 0.0 && k_percent <= 100.0)) fail("k must lie in (0, 100]");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail("train fraction must lie in (0, 1)");
  if (partition == PartitionKind::kDirichlet && !(beta > 0.0)) fail("dirichlet beta must be positive");
  if (hidden.empty() || std::any_of(hidden.begin(), hidden.end(), [](int h) { return h < 1; }))
    fail("hidden layer widths must be positive");
  if (!(attack_params.zeta > 0.0 && attack_params.zeta <= 1.0)) fail("zeta must lie in (0, 1]");
  if (defense_params.root_samples < 1) fail("root samples must be >= 1");
  train.validate();
  attack_params.sinkhorn.validate();
}

int ExperimentConfig::malicious_population() const {
  const auto share = static_cast<double>(malicious) / per_round * total_clients;
  return std::min(total_clients, static_cast<int>(std::ceil(share - 1e-9)));
}

Setup make_setup(const ExperimentConfig& cfg) {
  cfg.validate();
  Setup s;
  const Dataset all = cfg.data_path.empty() ? make_blobs(cfg.blobs, cfg.seed) : load_dataset(cfg.data_path);
  auto split = split_train_test(all, cfg.train_fraction, derive_seed(cfg.seed, {stream::kData, 1}));
  s.train = std::move(split.train);
  s.test = std::move(split.test);
  s.shards = cfg.partition == PartitionKind::kIid ? partition_iid(s.train, cfg.total_clients, cfg.seed)
                                                  : partition_dirichlet(s.train, cfg.total_clients, cfg.beta, cfg.seed);

  std::vector<int> idx(static_cast<std::size_t>(s.train.size()));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(cfg.seed, {stream::kDefense, 0}));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(idx.size(), static_cast<std::size_t>(cfg.defense_params.root_samples)));
  std::sort(idx.begin(), idx.end());
  s.root = s.train.subset(idx);

  std::vector<int> dims{s.train.dims()};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(s.train.num_classes);
  s.net = Supernetwork::init(derive_seed(cfg.seed, {stream::kInit}), dims, cfg.k_percent);

  s.is_malicious.assign(static_cast<std::size_t>(cfg.total_clients), false);
  for (int i = 0; i < cfg.malicious_population(); ++i) s.is_malicious[static_cast<std::size_t>(i)] = true;
  return s;
}

namespace {

std::vector<int> select_clients(const ExperimentConfig& cfg, int round) {
  std::vector<int> ids(static_cast<std::size_t>(cfg.total_clients));
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(derive_seed(cfg.seed, {stream::kSelect, static_cast<std::uint64_t>(round)}));
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(cfg.per_round));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::uint64_t shuffle_seed(const ExperimentConfig& cfg, int client, int round) {
  return derive_seed(cfg.seed, {stream::kShuffle, static_cast<std::uint64_t>(client), static_cast<std::uint64_t>(round)});
}

// Mean over layers of how many truly vulnerable edges the attack's estimate found.
std::optional<double> estimation_accuracy_of(const std::vector<LayerDiagnostics>& diags,
                                             const std::vector<LayerRankings>& benign, int m, double k_percent) {
  if (diags.empty() || benign.empty()) return std::nullopt;
  double total = 0.0;
  int layers = 0;
  for (const auto& d : diags) {
    std::vector<Ranking> layer;
    for (const auto& c : benign) layer.push_back(c[static_cast<std::size_t>(d.layer_id)]);
    const auto a = default_scale(layer.front().size());
    const auto w = aggregated_reputation(aggregate(layer), a);
    BenignEstimate truth;
    truth.layer_id = d.layer_id;
    truth.values.assign(w.values.begin(), w.values.end());
    const auto range = vulnerable_bounds(truth, m, a, k_percent);
    if (range.edge_ids.empty()) continue;
    total += estimation_accuracy(d.estimated.edge_ids, range.edge_ids);
    ++layers;
  }
  if (layers == 0) return std::nullopt;
  return total / layers;
}

bool uses_estimate(AttackKind kind) {
  return kind == AttackKind::kVem || kind == AttackKind::kReverseVulnerable || kind == AttackKind::kOptimizeAll;
}

}  // namespace

Trajectory run_trajectory(const ExperimentConfig& cfg, const Setup& setup, bool attack_active,
                          const RoundObserver& observer) {
  const bool attacking = attack_active && cfg.attack != AttackKind::kNone;
  Trajectory traj;
  LayerRankings global = setup.net.rankings();
  std::vector<LayerRankings> last_malicious;
  std::map<int, Eigen::VectorXd> history;  // FoolsGold, by client ID

  for (int t = 1; t <= cfg.rounds; ++t) {
    RoundRecord rec;
    rec.round = t;
    rec.selected = select_clients(cfg, t);
    const Supernetwork broadcast = apply_global_ranking(setup.net, global);
    const bool need_scores = attacking && (cfg.attack == AttackKind::kMinMax || cfg.attack == AttackKind::kMinSum);

    std::vector<LayerRankings> honest;
    std::vector<bool> flags;
    ScoreSet benign_scores;
    for (int id : rec.selected) {
      const auto& shard = setup.shards[static_cast<std::size_t>(id)];
      const bool mal = setup.is_malicious[static_cast<std::size_t>(id)];
      flags.push_back(mal);
      if (need_scores && !mal) {
        auto scores = ep_train_scores(broadcast, shard, cfg.train, shuffle_seed(cfg, id, t));
        honest.push_back(broadcast.with_scores(scores).rankings());
        benign_scores.push_back(std::move(scores));
      } else {
        honest.push_back(ep_train(broadcast, shard, cfg.train, shuffle_seed(cfg, id, t)));
      }
    }
    if (observer) observer(RoundView{t, &global, rec.selected, honest, flags});

    std::vector<LayerRankings> submissions = honest;
    AttackContext ctx;
    for (std::size_t i = 0; i < rec.selected.size(); ++i) {
      if (!flags[i]) continue;
      ctx.malicious_ids.push_back(rec.selected[i]);
      ctx.malicious_data.push_back(setup.shards[static_cast<std::size_t>(rec.selected[i])]);
      ctx.shuffle_seeds.push_back(shuffle_seed(cfg, rec.selected[i], t));
    }
    const bool attack_now = attacking && ctx.m() > 0;
    if (attack_now) {
      ctx.round = t;
      ctx.net = broadcast;
      ctx.train = cfg.train;
      ctx.global = global;
      ctx.last_malicious = last_malicious;
      ctx.num_clients = cfg.per_round;
      ctx.k_percent = cfg.k_percent;
      ctx.params = cfg.attack_params;
      ctx.seed = cfg.seed;
      auto result = run_attack(cfg.attack, ctx, need_scores ? &benign_scores : nullptr);
      std::size_t next = 0;
      for (std::size_t i = 0; i < submissions.size(); ++i)
        if (flags[i]) submissions[i] = result.rankings[next++];
      rec.n_malicious = ctx.m();
      last_malicious = result.rankings;
      if (uses_estimate(cfg.attack)) {
        std::vector<LayerRankings> benign;
        for (std::size_t i = 0; i < honest.size(); ++i)
          if (!flags[i]) benign.push_back(honest[i]);
        rec.est_acc = estimation_accuracy_of(result.diagnostics, benign, ctx.m(), cfg.k_percent);
      }
      rec.diagnostics = std::move(result.diagnostics);
    } else {
      last_malicious.clear();
    }

    auto defended = [&](const std::vector<LayerRankings>& subs, bool update_history) {
      DefenseInputs in;
      in.clients = subs;
      in.m = cfg.malicious;
      in.k_percent = cfg.k_percent;
      in.net = &broadcast;
      in.root = &setup.root;
      LayerRankings server;
      Eigen::MatrixXd hist;
      if (cfg.defense == DefenseKind::kFltrust) {
        server = ep_train(broadcast, setup.root, cfg.train,
                          derive_seed(cfg.seed, {stream::kDefense, static_cast<std::uint64_t>(t)}));
        in.server_ranking = &server;
      }
      if (cfg.defense == DefenseKind::kFoolsgold) {
        const Eigen::MatrixXd e = embed(subs);
        hist.resize(e.rows(), e.cols());
        for (std::size_t i = 0; i < rec.selected.size(); ++i) {
          Eigen::VectorXd row = e.row(static_cast<Eigen::Index>(i)).transpose();
          const auto it = history.find(rec.selected[i]);
          if (it != history.end()) row += it->second;
          if (update_history) history[rec.selected[i]] = row;
          hist.row(static_cast<Eigen::Index>(i)) = row.transpose();
        }
        in.history = &hist;
      }
      return defend(cfg.defense, in, cfg.defense_params);
    };

    auto outcome = defended(submissions, true);
    if (attacking) score_verdict(outcome.verdict, flags);
    if (outcome.verdict.has_rates) {
      rec.fpr = outcome.verdict.fpr;
      rec.tpr = outcome.verdict.tpr;
    }
    for (int i : outcome.verdict.kept) rec.defense_kept.push_back(rec.selected[static_cast<std::size_t>(i)]);
    LayerRankings next = outcome.global ? *outcome.global : global;

    if (attack_now) {
      // Cross rate against the vote the same server would have reached
      // had every client been honest.
      auto clean = defended(honest, false);
      const LayerRankings reference = clean.global ? *clean.global : global;
      rec.rho = edge_cross_rate(reference, next, cfg.k_percent);
    }

    global = std::move(next);
    rec.global = global;
    rec.accuracy = evaluate(setup.net, global, setup.test);
    traj.best_accuracy = std::max(traj.best_accuracy, rec.accuracy);
    rec.phi_running = traj.best_accuracy > 0.0 ? attack_impact(traj.best_accuracy, rec.accuracy) : 0.0;
    traj.rounds.push_back(std::move(rec));
  }
  traj.final_accuracy = traj.rounds.back().accuracy;
  return traj;
}

MetricsReport run_experiment(const ExperimentConfig& cfg, const Trajectory* benign) {
  const Setup setup = make_setup(cfg);
  MetricsReport report;
  report.benign = benign ? *benign : run_trajectory(cfg, setup, false);
  report.attacked = cfg.attack == AttackKind::kNone ? report.benign : run_trajectory(cfg, setup, true);

  double best = 0.0;
  for (std::size_t i = 0; i < report.attacked.rounds.size(); ++i) {
    if (i < report.benign.rounds.size()) best = std::max(best, report.benign.rounds[i].accuracy);
    auto& r = report.attacked.rounds[i];
    r.phi_running = best > 0.0 ? attack_impact(best, r.accuracy) : 0.0;
  }
  report.acc_benign = report.benign.best_accuracy;
  report.acc_attacked = report.attacked.final_accuracy;
  report.phi = attack_impact(report.acc_benign, report.acc_attacked);

  double rho = 0.0;
  double est = 0.0;
  int est_n = 0;
  for (const auto& r : report.attacked.rounds) {
    rho += r.rho;
    if (r.est_acc) {
      est += *r.est_acc;
      ++est_n;
    }
  }
  report.mean_rho = rho / static_cast<double>(report.attacked.rounds.size());
  if (est_n > 0) report.mean_est_acc = est / est_n;
  return report;
}

namespace {

std::string fixed(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string opt(const std::optional<double>& x) { return x ? fixed(*x) : std::string(); }

std::string joined(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(ids[i]);
  }
  return s;
}

}  // namespace

void write_rounds_csv(std::ostream& os, const Trajectory& trajectory) {
  os << "t,selected_ids,n_malicious,acc,phi_running,rho,est_acc,defense_kept,fpr,tpr\n";
  for (const auto& r : trajectory.rounds) {
    os << r.round << ',' << joined(r.selected) << ',' << r.n_malicious << ',' << fixed(r.accuracy) << ','
       << fixed(r.phi_running) << ',' << fixed(r.rho) << ',' << opt(r.est_acc) << ',' << joined(r.defense_kept) << ','
       << opt(r.fpr) << ',' << opt(r.tpr) << '\n';
  }
}

void write_summary(std::ostream& os, const MetricsReport& report) {
  os << "acc_benign=" << fixed(report.acc_benign) << '\n'
     << "acc_attacked=" << fixed(report.acc_attacked) << '\n'
     << "phi=" << fixed(report.phi) << '\n'
     << "mean_rho=" << fixed(report.mean_rho) << '\n'
     << "mean_est_acc=" << opt(report.mean_est_acc) << '\n'
     << "rounds=" << report.attacked.rounds.size() << '\n';
}

}  // namespace rankgauntlet
