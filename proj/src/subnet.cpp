#include "rankgauntlet/subnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rankgauntlet/error.hpp"
#include "rankgauntlet/rng.hpp"

namespace rankgauntlet {

void TrainConfig::validate() const {
  if (local_epochs < 0) throw Error(ErrorCode::kInvalidConfig, "local_epochs must be >= 0");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidConfig, "learning_rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw Error(ErrorCode::kInvalidConfig, "momentum must be in [0, 1)");
  if (weight_decay < 0.0) throw Error(ErrorCode::kInvalidConfig, "weight_decay must be >= 0");
}

Supernetwork Supernetwork::init(std::uint64_t seed, std::vector<int> dims, double k_percent) {
  if (dims.size() < 2) throw Error(ErrorCode::kInvalidArchitecture, "need at least input and output widths");
  for (int d : dims) {
    if (d <= 0) throw Error(ErrorCode::kInvalidArchitecture, "layer widths must be positive");
  }
  selection_boundary(1, k_percent);  // validates k

  Rng rng(derive_seed(seed, {stream::kInit}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto weights = std::make_shared<std::vector<Eigen::MatrixXd>>();
  std::vector<Eigen::VectorXd> scores;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    // Kaiming-uniform bound for ReLU fan-in.
    const double bound = std::sqrt(6.0 / in);
    Eigen::MatrixXd w(out, in);
    for (int o = 0; o < out; ++o)
      for (int i = 0; i < in; ++i) w(o, i) = bound * (2.0 * unit(rng) - 1.0);
    Eigen::VectorXd s(static_cast<Eigen::Index>(in) * out);
    for (Eigen::Index j = 0; j < s.size(); ++j) s(j) = unit(rng);
    weights->push_back(std::move(w));
    scores.push_back(std::move(s));
  }

  Supernetwork net;
  net.seed_ = seed;
  net.dims_ = std::move(dims);
  net.k_percent_ = k_percent;
  net.weights_ = std::move(weights);
  net.scores_ = std::move(scores);
  return net;
}

int Supernetwork::edge_count(int layer) const {
  return dims_.at(static_cast<std::size_t>(layer)) * dims_.at(static_cast<std::size_t>(layer) + 1);
}

Supernetwork Supernetwork::with_scores(std::vector<Eigen::VectorXd> scores) const {
  if (scores.size() != scores_.size()) throw Error(ErrorCode::kDimensionMismatch, "score layer count");
  for (std::size_t l = 0; l < scores.size(); ++l) {
    if (scores[l].size() != scores_[l].size()) throw Error(ErrorCode::kDimensionMismatch, "score vector size");
  }
  Supernetwork net = *this;
  net.scores_ = std::move(scores);
  return net;
}

Ranking ranking_of_scores(int layer_id, const Eigen::VectorXd& scores) {
  return Ranking(layer_id, sort_get_index(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size()))));
}

LayerRankings Supernetwork::rankings() const {
  LayerRankings out;
  for (int l = 0; l < num_layers(); ++l) out.push_back(ranking_of_scores(l, scores(l)));
  return out;
}

std::vector<Supermask> Supernetwork::masks() const {
  std::vector<Supermask> out;
  for (const auto& r : rankings()) out.push_back(supermask_of(r, k_percent_));
  return out;
}

Supernetwork apply_global_ranking(const Supernetwork& net, std::span<const Ranking> r_g) {
  if (static_cast<int>(r_g.size()) != net.num_layers())
    throw Error(ErrorCode::kDimensionMismatch, "one global ranking per layer required");
  std::vector<Eigen::VectorXd> scores;
  for (int l = 0; l < net.num_layers(); ++l) {
    const auto& r = r_g[static_cast<std::size_t>(l)];
    if (r.size() != net.edge_count(l)) throw Error(ErrorCode::kDimensionMismatch, "ranking size vs layer edges");
    Eigen::VectorXd sorted = net.scores(l);
    std::sort(sorted.data(), sorted.data() + sorted.size());
    Eigen::VectorXd s(sorted.size());
    for (int pos = 1; pos <= r.size(); ++pos) s(r.at(pos) - 1) = sorted(pos - 1);
    scores.push_back(std::move(s));
  }
  return net.with_scores(std::move(scores));
}

std::vector<Eigen::MatrixXd> effective_weights(const Supernetwork& net) {
  std::vector<Eigen::MatrixXd> out;
  const auto masks = net.masks();
  for (int l = 0; l < net.num_layers(); ++l) {
    Eigen::MatrixXd w = net.weights(l);
    const int in = static_cast<int>(w.cols());
    const auto& bits = masks[static_cast<std::size_t>(l)].bits;
    for (Eigen::Index o = 0; o < w.rows(); ++o)
      for (Eigen::Index i = 0; i < w.cols(); ++i)
        if (!bits[static_cast<std::size_t>(o * in + i)]) w(o, i) = 0.0;
    out.push_back(std::move(w));
  }
  return out;
}

Eigen::MatrixXd forward_with(std::span<const Eigen::MatrixXd> weights, const Eigen::MatrixXd& batch) {
  Eigen::MatrixXd h = batch;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (h.cols() != weights[l].cols()) throw Error(ErrorCode::kDimensionMismatch, "batch width vs layer input");
    h = h * weights[l].transpose();
    if (l + 1 < weights.size()) h = h.cwiseMax(0.0);
  }
  return h;
}

namespace {

// Row-wise softmax, numerically stabilized.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - mx).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

void check_labels(const Eigen::MatrixXd& logits, std::span<const int> labels) {
  if (logits.rows() != static_cast<Eigen::Index>(labels.size()))
    throw Error(ErrorCode::kDimensionMismatch, "logits rows vs labels");
  for (int y : labels) {
    if (y < 0 || y >= logits.cols()) throw Error(ErrorCode::kDimensionMismatch, "label outside logits");
  }
}

}  // namespace

double cross_entropy(const Eigen::MatrixXd& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    total += lse - logits(r, labels[static_cast<std::size_t>(r)]);
  }
  return total / static_cast<double>(logits.rows());
}

Eigen::MatrixXd ep_forward(const Supernetwork& net, const Eigen::MatrixXd& batch) {
  const auto w = effective_weights(net);
  return forward_with(w, batch);
}

std::vector<Eigen::VectorXd> score_gradient(const Supernetwork& net, const Eigen::MatrixXd& batch,
                                            std::span<const int> labels) {
  const auto w = effective_weights(net);
  const std::size_t layers = w.size();

  // inputs[l] feeds layer l; pre[l] is its pre-activation.
  std::vector<Eigen::MatrixXd> inputs(layers);
  std::vector<Eigen::MatrixXd> pre(layers);
  Eigen::MatrixXd h = batch;
  for (std::size_t l = 0; l < layers; ++l) {
    if (h.cols() != w[l].cols()) throw Error(ErrorCode::kDimensionMismatch, "batch width vs layer input");
    inputs[l] = h;
    pre[l] = h * w[l].transpose();
    h = (l + 1 < layers) ? pre[l].cwiseMax(0.0) : pre[l];
  }
  check_labels(h, labels);

  Eigen::MatrixXd delta = softmax_rows(h);
  for (Eigen::Index r = 0; r < delta.rows(); ++r) delta(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
  delta /= static_cast<double>(batch.rows());

  std::vector<Eigen::VectorXd> grads(layers);
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd grad_eff = delta.transpose() * inputs[l];  // out x in
    const Eigen::MatrixXd& theta_w = net.weights(static_cast<int>(l));
    const Eigen::Index in = theta_w.cols();
    Eigen::VectorXd g(theta_w.size());
    for (Eigen::Index o = 0; o < theta_w.rows(); ++o)
      for (Eigen::Index i = 0; i < in; ++i) g(o * in + i) = grad_eff(o, i) * theta_w(o, i);
    grads[l] = std::move(g);
    if (l > 0) {
      delta = delta * w[l];
      delta = delta.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return grads;
}

std::vector<Eigen::VectorXd> ep_train_scores(const Supernetwork& net, const Dataset& data, const TrainConfig& cfg,
                                             std::uint64_t shuffle_seed, TrainOptions opts) {
  cfg.validate();
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "client has no training samples");
  if (data.dims() != net.dims().front()) throw Error(ErrorCode::kDimensionMismatch, "data width vs network input");

  Rng rng(shuffle_seed);
  std::vector<Eigen::VectorXd> scores = net.all_scores();
  std::vector<Eigen::VectorXd> velocity;
  for (const auto& s : scores) velocity.push_back(Eigen::VectorXd::Zero(s.size()));
  bool first_step = true;

  std::vector<int> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);
  Supernetwork cur = net;
  const double sign = opts.ascend ? -1.0 : 1.0;

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const int> rows(order.data() + start, end - start);
      Eigen::MatrixXd xb(static_cast<Eigen::Index>(rows.size()), data.dims());
      std::vector<int> yb(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        xb.row(static_cast<Eigen::Index>(r)) = data.features.row(rows[r]);
        yb[r] = data.labels[static_cast<std::size_t>(rows[r])];
      }
      cur = cur.with_scores(scores);
      const auto grads = score_gradient(cur, xb, yb);
      for (std::size_t l = 0; l < scores.size(); ++l) {
        Eigen::VectorXd g = sign * grads[l] + cfg.weight_decay * scores[l];
        velocity[l] = first_step ? g : Eigen::VectorXd(cfg.momentum * velocity[l] + g);
        scores[l] -= cfg.learning_rate * velocity[l];
      }
      first_step = false;
    }
  }
  return scores;
}

LayerRankings ep_train(const Supernetwork& net, const Dataset& data, const TrainConfig& cfg,
                       std::uint64_t shuffle_seed, TrainOptions opts) {
  return net.with_scores(ep_train_scores(net, data, cfg, shuffle_seed, opts)).rankings();
}

Evaluation evaluate_full(const Supernetwork& net, std::span<const Ranking> r_g, const Dataset& test) {
  if (test.empty()) throw Error(ErrorCode::kEmptyDataset, "empty evaluation set");
  const auto placed = apply_global_ranking(net, r_g);
  const Eigen::MatrixXd logits = ep_forward(placed, test.features);
  int correct = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    if (arg == test.labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return {static_cast<double>(correct) / test.size(), cross_entropy(logits, test.labels)};
}

double evaluate(const Supernetwork& net, std::span<const Ranking> r_g, const Dataset& test) {
  return evaluate_full(net, r_g, test).accuracy;
}

}  // namespace rankgauntlet
