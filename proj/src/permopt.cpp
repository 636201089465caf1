#include "rankgauntlet/permopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include <Eigen/Cholesky>

#include "rankgauntlet/error.hpp"
#include "rankgauntlet/rng.hpp"

namespace rankgauntlet {

void SinkhornConfig::validate() const {
  if (iterations < 1) throw Error(ErrorCode::kInvalidConfig, "sinkhorn iterations must be >= 1");
  if (!(temperature > 0.0)) throw Error(ErrorCode::kInvalidConfig, "temperature must be > 0");
  if (epochs < 0) throw Error(ErrorCode::kInvalidConfig, "optimizer epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidConfig, "attack learning rate must be > 0");
  if (gumbel_scale < 0.0) throw Error(ErrorCode::kInvalidConfig, "gumbel_scale must be >= 0");
  if (tolerance < 0.0) throw Error(ErrorCode::kInvalidConfig, "sinkhorn tolerance must be >= 0");
  if (max_iterations < iterations) throw Error(ErrorCode::kInvalidConfig, "sinkhorn max_iterations must be >= iterations");
}

namespace {

void normalize_rows(Eigen::MatrixXd& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    const double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
    z.row(i).array() -= lse;
  }
}

void normalize_cols(Eigen::MatrixXd& z) {
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double mx = z.col(j).maxCoeff();
    const double lse = mx + std::log((z.col(j).array() - mx).exp().sum());
    z.col(j).array() -= lse;
  }
}

void require_square_finite(const Eigen::MatrixXd& x) {
  if (x.rows() != x.cols() || x.rows() == 0) throw Error(ErrorCode::kDimensionMismatch, "X must be square");
  if (!x.allFinite()) throw Error(ErrorCode::kNumericOverflow, "X has non-finite entries");
}

double row_error(const Eigen::MatrixXd& p) { return (p.rowwise().sum().array() - 1.0).abs().maxCoeff(); }

double marginal_error(const Eigen::MatrixXd& p) {
  return std::max(row_error(p), (p.colwise().sum().array() - 1.0).abs().maxCoeff());
}

// Newton system of f below at Q, with the last column scaling pinned to
// remove the (1, -1) gauge direction. Size 2d - 1.
Eigen::MatrixXd scaling_hessian(const Eigen::MatrixXd& q) {
  const Eigen::Index d = q.rows();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * d - 1, 2 * d - 1);
  h.topLeftCorner(d, d) = q.rowwise().sum().asDiagonal();
  h.topRightCorner(d, d - 1) = q.leftCols(d - 1);
  h.bottomLeftCorner(d - 1, d) = q.leftCols(d - 1).transpose();
  h.bottomRightCorner(d - 1, d - 1) = q.colwise().sum().head(d - 1).transpose().asDiagonal();
  return h;
}

// Newton steps on row/column log-scalings of P, minimizing the convex
// f(alpha, beta) = sum_ij P_ij exp(alpha_i + beta_j) - sum alpha - sum beta,
// whose stationary point is the doubly stochastic scaling of P.
Eigen::MatrixXd newton_polish(Eigen::MatrixXd p, double tolerance) {
  const Eigen::Index d = p.rows();
  const Eigen::Index k = 2 * d - 1;
  const auto scaled = [d](const Eigen::MatrixXd& q, const Eigen::VectorXd& step) {
    Eigen::VectorXd be = Eigen::VectorXd::Zero(d);
    be.head(d - 1) = step.tail(d - 1);
    return (step.head(d).array().exp().matrix().asDiagonal() * q * be.array().exp().matrix().asDiagonal()).eval();
  };
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd rs = p.rowwise().sum();
    const Eigen::VectorXd cs = p.colwise().sum().transpose();
    if (std::max((rs.array() - 1.0).abs().maxCoeff(), (cs.array() - 1.0).abs().maxCoeff()) <= tolerance) break;
    Eigen::VectorXd grad(k);
    grad << rs.array() - 1.0, cs.head(d - 1).array() - 1.0;
    const Eigen::VectorXd dir = -scaling_hessian(p).ldlt().solve(grad);
    if (!dir.allFinite()) break;
    // Backtracking on f, measured relative to the current P.
    const double f0 = p.sum();
    const double slope = grad.dot(dir);
    double t = 1.0;
    Eigen::MatrixXd next;
    bool accepted = false;
    for (int ls = 0; ls < 40 && !accepted; ++ls, t *= 0.5) {
      next = scaled(p, t * dir);
      accepted = next.allFinite() && next.sum() - t * dir.sum() <= f0 + 1e-4 * t * slope;
    }
    if (!accepted) break;
    p = next;
  }
  return p;
}

// VJP of the polish Q = diag(e^alpha) P diag(e^beta) through the scaling
// equations Q1 = 1, Q^T 1 = 1. Returns dL/dP elementwise times P.
Eigen::MatrixXd polish_backward(const Eigen::MatrixXd& q, const Eigen::MatrixXd& grad_q) {
  const Eigen::Index d = q.rows();
  const Eigen::MatrixXd gq = grad_q.cwiseProduct(q);
  Eigen::VectorXd rhs(2 * d - 1);
  rhs << gq.rowwise().sum(), gq.colwise().sum().head(d - 1).transpose();
  const Eigen::VectorXd w = scaling_hessian(q).ldlt().solve(rhs);
  Eigen::VectorXd wc = Eigen::VectorXd::Zero(d);
  wc.head(d - 1) = w.tail(d - 1);
  Eigen::MatrixXd adj = grad_q;
  adj.colwise() -= w.head(d);
  adj.rowwise() -= wc.transpose();
  return q.cwiseProduct(adj);
}

// Above this spread of X / tau, exp() of the row-shifted matrix can
// underflow to whole zero columns, so normalization stays in log space.
constexpr double kLinearDomainSpread = 600.0;

struct SinkhornTrace {
  // Normalized iterates exp(Z): steps[2l] after the row step of round l,
  // steps[2l+1] after its column step.
  std::vector<Eigen::MatrixXd> steps;
  std::optional<Eigen::MatrixXd> polished;
  bool hard = false;  // polished is a permutation; its gradient is zero
  const Eigen::MatrixXd& output() const { return polished ? *polished : steps.back(); }
};

// Runs L rounds, then keeps going while a row sum is off by more than the
// tolerance, up to max_iterations rounds.
SinkhornTrace sinkhorn_steps(const Eigen::MatrixXd& x, const SinkhornConfig& cfg) {
  require_square_finite(x);
  SinkhornTrace trace;
  auto& steps = trace.steps;
  steps.reserve(static_cast<std::size_t>(2 * cfg.iterations));
  Eigen::MatrixXd z = x / cfg.temperature;
  if (z.maxCoeff() - z.minCoeff() < kLinearDomainSpread) {
    // Same iterates as the log-domain loop, in linear arithmetic.
    for (Eigen::Index i = 0; i < z.rows(); ++i) z.row(i).array() -= z.row(i).maxCoeff();
    Eigen::MatrixXd p = z.array().exp().matrix();
    for (int l = 0; l < cfg.max_iterations; ++l) {
      if (l >= cfg.iterations && row_error(p) <= cfg.tolerance) break;
      p = p.array().colwise() / p.rowwise().sum().array();
      steps.push_back(p);
      p = p.array().rowwise() / p.colwise().sum().array();
      steps.push_back(p);
    }
  } else {
    for (int l = 0; l < cfg.max_iterations; ++l) {
      if (l >= cfg.iterations && row_error(steps.back()) <= cfg.tolerance) break;
      normalize_rows(z);
      steps.push_back(z.array().exp().matrix());
      normalize_cols(z);
      steps.push_back(z.array().exp().matrix());
    }
  }
  if (!steps.back().allFinite()) throw Error(ErrorCode::kNumericOverflow, "sinkhorn produced non-finite entries");
  // Nearly decomposable inputs converge too slowly for plain rounds; Newton
  // finishes the same limit. When exp() has underflowed to a support with no
  // doubly stochastic scaling, the limit is the hard matching of X.
  if (cfg.tolerance > 0.0 && row_error(steps.back()) > cfg.tolerance) {
    trace.polished = newton_polish(steps.back(), cfg.tolerance);
    if (!(marginal_error(*trace.polished) <= cfg.tolerance)) {
      trace.polished = to_dense(hungarian_round(x));
      trace.hard = true;
    }
  }
  return trace;
}

// Reverse pass through the iterates recorded by sinkhorn_steps().
Eigen::MatrixXd sinkhorn_backward(const SinkhornTrace& trace, double temperature, const Eigen::MatrixXd& grad_p) {
  if (trace.hard) return Eigen::MatrixXd::Zero(grad_p.rows(), grad_p.cols());
  const auto& steps = trace.steps;
  Eigen::MatrixXd g = trace.polished ? polish_backward(*trace.polished, grad_p) : grad_p.cwiseProduct(steps.back());
  for (std::size_t k = steps.size(); k-- > 0;) {
    const Eigen::MatrixXd& soft = steps[k];
    if (k % 2 == 1) {
      // Column step: z' = y - lse_col(y).
      const Eigen::RowVectorXd colsum = g.colwise().sum();
      g -= soft * colsum.asDiagonal();
    } else {
      const Eigen::VectorXd rowsum = g.rowwise().sum();
      g -= rowsum.asDiagonal() * soft;
    }
  }
  return g / temperature;
}

}  // namespace

Eigen::MatrixXd sinkhorn(const Eigen::MatrixXd& x, const SinkhornConfig& cfg) {
  cfg.validate();
  return sinkhorn_steps(x, cfg).output();
}

Eigen::MatrixXd sinkhorn_vjp(const Eigen::MatrixXd& x, const SinkhornConfig& cfg, const Eigen::MatrixXd& grad_p) {
  cfg.validate();
  return sinkhorn_backward(sinkhorn_steps(x, cfg), cfg.temperature, grad_p);
}

Eigen::RowVectorXd edge_weights(const VulnerableMatrix& rv, std::span<const std::int64_t> a) {
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(rv.size());
  for (std::size_t r = 0; r < rv.positions.size(); ++r) {
    const auto pos = static_cast<std::size_t>(rv.positions[r] - 1);
    if (pos >= a.size()) throw Error(ErrorCode::kDimensionMismatch, "position outside weight vector");
    b(rv.column_of_row[r]) = static_cast<double>(a[pos]);
  }
  return b;
}

namespace {

void require_consistent(std::span<const VulnerableMatrix> r_v, std::size_t n_mats, Eigen::Index d_expected) {
  if (r_v.size() != n_mats) throw Error(ErrorCode::kDimensionMismatch, "one matrix per malicious client");
  for (const auto& rv : r_v) {
    if (rv.size() != d_expected) throw Error(ErrorCode::kDimensionMismatch, "vulnerable matrices differ in size");
  }
}

Eigen::RowVectorXd displacement(std::span<const VulnerableMatrix> r_v, std::span<const Eigen::MatrixXd> perms,
                                std::span<const std::int64_t> a, std::vector<Eigen::RowVectorXd>* weights_out) {
  const Eigen::Index d = perms.front().rows();
  Eigen::RowVectorXd diff = Eigen::RowVectorXd::Zero(d);
  for (std::size_t u = 0; u < r_v.size(); ++u) {
    if (perms[u].rows() != d || perms[u].cols() != d) throw Error(ErrorCode::kDimensionMismatch, "P_u must be d x d");
    Eigen::RowVectorXd b = edge_weights(r_v[u], a);
    diff += b - b * perms[u];
    if (weights_out) weights_out->push_back(std::move(b));
  }
  return diff;
}

}  // namespace

double displacement_objective(std::span<const VulnerableMatrix> r_v, std::span<const Eigen::MatrixXd> perms,
                              std::span<const std::int64_t> a) {
  if (perms.empty()) throw Error(ErrorCode::kEmptyInput, "no permutations");
  require_consistent(r_v, perms.size(), perms.front().rows());
  return displacement(r_v, perms, a, nullptr).norm();
}

LossAndGradient attack_loss(std::span<const Eigen::MatrixXd> x_list, std::span<const VulnerableMatrix> r_v,
                            std::span<const std::int64_t> a, const SinkhornConfig& cfg) {
  if (x_list.empty()) throw Error(ErrorCode::kEmptyInput, "no X matrices");
  require_consistent(r_v, x_list.size(), x_list.front().rows());

  cfg.validate();
  // The relaxed objective unrolls exactly L rounds.
  SinkhornConfig unrolled = cfg;
  unrolled.tolerance = 0.0;
  unrolled.max_iterations = cfg.iterations;
  std::vector<SinkhornTrace> steps;
  std::vector<Eigen::MatrixXd> perms;
  steps.reserve(x_list.size());
  perms.reserve(x_list.size());
  for (const auto& x : x_list) {
    steps.push_back(sinkhorn_steps(x, unrolled));
    perms.push_back(steps.back().output());
  }

  std::vector<Eigen::RowVectorXd> weights;
  const Eigen::RowVectorXd diff = displacement(r_v, perms, a, &weights);
  const double norm = diff.norm();

  LossAndGradient out;
  out.loss = -norm;
  for (std::size_t u = 0; u < x_list.size(); ++u) {
    Eigen::MatrixXd grad_p = Eigen::MatrixXd::Zero(x_list[u].rows(), x_list[u].cols());
    // The norm is not differentiable at 0; use the zero subgradient there.
    if (norm > 0.0) grad_p = weights[u].transpose() * (diff / norm);
    out.gradients.push_back(sinkhorn_backward(steps[u], cfg.temperature, grad_p));
  }
  return out;
}

OptimizeResult optimize(std::span<const VulnerableMatrix> r_v, std::span<const std::int64_t> a,
                        const SinkhornConfig& cfg) {
  cfg.validate();
  if (r_v.empty() || r_v.front().size() == 0) throw Error(ErrorCode::kEmptyInput, "nothing to optimize");
  const Eigen::Index d = r_v.front().size();
  const std::size_t m = r_v.size();

  Rng rng(derive_seed(cfg.seed, {stream::kAttack}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::MatrixXd> x(m, Eigen::MatrixXd(d, d));
  for (auto& xu : x)
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) xu(i, j) = unit(rng);

  std::vector<Eigen::MatrixXd> m1(m, Eigen::MatrixXd::Zero(d, d));
  std::vector<Eigen::MatrixXd> m2(m, Eigen::MatrixXd::Zero(d, d));

  auto gumbel = [&](std::vector<Eigen::MatrixXd> base) {
    for (auto& xu : base)
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
          const double u = std::clamp(unit(rng), 1e-12, 1.0 - 1e-12);
          xu(i, j) += cfg.gumbel_scale * -std::log(-std::log(u));
        }
    return base;
  };

  OptimizeResult res;
  std::vector<Eigen::MatrixXd> best_x = x;
  double best = -std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    const bool noisy = cfg.gumbel_scale > 0.0;
    const auto clean = attack_loss(x, r_v, a, cfg);
    const double objective = -clean.loss;
    res.objective_trace.push_back(objective);
    if (objective > best) {
      best = objective;
      best_x = x;
    }
    if (epoch == cfg.epochs) break;

    const auto step = noisy ? attack_loss(gumbel(x), r_v, a, cfg) : clean;
    const double t = epoch + 1.0;
    for (std::size_t u = 0; u < m; ++u) {
      const Eigen::MatrixXd& g = step.gradients[u];
      m1[u] = cfg.beta1 * m1[u] + (1.0 - cfg.beta1) * g;
      m2[u] = cfg.beta2 * m2[u] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
      const Eigen::MatrixXd mhat = m1[u] / (1.0 - std::pow(cfg.beta1, t));
      const Eigen::MatrixXd vhat = m2[u] / (1.0 - std::pow(cfg.beta2, t));
      x[u].array() -= cfg.learning_rate * mhat.array() / (vhat.array().sqrt() + cfg.adam_epsilon);
    }
  }

  res.initial_objective = res.objective_trace.front();
  res.best_objective = best;
  for (const auto& xu : best_x) res.doubly_stochastic.push_back(sinkhorn(xu, cfg));
  return res;
}

namespace {

struct MinCostSolution {
  std::vector<int> col_of_row;
  std::vector<double> u;  // row potentials
  std::vector<double> v;  // column potentials
  double cost = 0.0;
};

// O(d^3) shortest augmenting path Hungarian method for square minimum cost.
MinCostSolution solve_min_cost(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<int>(cost.rows());
  MinCostSolution sol;
  if (n == 0) return sol;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  sol.col_of_row.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) sol.col_of_row[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  sol.u.assign(u.begin() + 1, u.end());
  sol.v.assign(v.begin() + 1, v.end());
  for (int i = 0; i < n; ++i) sol.cost += cost(i, sol.col_of_row[static_cast<std::size_t>(i)]);
  return sol;
}

}  // namespace

Assignment max_weight_assignment(const Eigen::MatrixXd& weight, double tol) {
  if (weight.rows() != weight.cols()) throw Error(ErrorCode::kDimensionMismatch, "assignment needs a square matrix");
  if (!weight.allFinite()) throw Error(ErrorCode::kNumericOverflow, "non-finite assignment weights");
  const auto n = static_cast<int>(weight.rows());
  const Eigen::MatrixXd cost = -weight;
  const auto base = solve_min_cost(cost);
  const double scaled_tol = tol * (1.0 + (n > 0 ? cost.cwiseAbs().maxCoeff() : 0.0));

  std::vector<int> assign = base.col_of_row;
  std::vector<char> col_used(static_cast<std::size_t>(n), 0);
  double fixed_cost = 0.0;

  // Lexicographic refinement: an edge can appear in an optimal assignment
  // only if its reduced cost under the optimal duals is ~0, so the re-solve
  // runs only on genuine ties.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < assign[static_cast<std::size_t>(i)]; ++j) {
      if (col_used[static_cast<std::size_t>(j)]) continue;
      const double reduced = cost(i, j) - base.u[static_cast<std::size_t>(i)] - base.v[static_cast<std::size_t>(j)];
      if (reduced > scaled_tol) continue;

      std::vector<int> rest_cols;
      for (int c = 0; c < n; ++c)
        if (!col_used[static_cast<std::size_t>(c)] && c != j) rest_cols.push_back(c);
      const int rest = n - i - 1;
      Eigen::MatrixXd sub(rest, rest);
      for (int r = 0; r < rest; ++r)
        for (int c = 0; c < rest; ++c) sub(r, c) = cost(i + 1 + r, rest_cols[static_cast<std::size_t>(c)]);
      const auto tail = solve_min_cost(sub);
      const double total = fixed_cost + cost(i, j) + tail.cost;
      if (total <= base.cost + scaled_tol) {
        assign[static_cast<std::size_t>(i)] = j;
        for (int r = 0; r < rest; ++r)
          assign[static_cast<std::size_t>(i + 1 + r)] =
              rest_cols[static_cast<std::size_t>(tail.col_of_row[static_cast<std::size_t>(r)])];
        break;
      }
    }
    col_used[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] = 1;
    fixed_cost += cost(i, assign[static_cast<std::size_t>(i)]);
  }

  Assignment out;
  out.column_of_row = std::move(assign);
  for (int i = 0; i < n; ++i) out.value += weight(i, out.column_of_row[static_cast<std::size_t>(i)]);
  return out;
}

PermutationMatrix hungarian_round(const Eigen::MatrixXd& p_b) {
  const auto assignment = max_weight_assignment(p_b);
  std::vector<int> cols;
  cols.reserve(assignment.column_of_row.size());
  for (int c : assignment.column_of_row) cols.push_back(c + 1);
  return PermutationMatrix(std::move(cols));
}

Eigen::MatrixXd to_dense(const PermutationMatrix& p) { return p.dense().cast<double>(); }

Ranking apply_vulnerable_permutation(const Ranking& ranking, const VulnerableMatrix& rv, const PermutationMatrix& perm) {
  if (perm.size() != rv.size()) throw Error(ErrorCode::kDimensionMismatch, "permutation size vs vulnerable set");
  std::vector<int> order = ranking.order();
  for (std::size_t r = 0; r < rv.positions.size(); ++r) {
    const int col = rv.column_of_row[r];
    const int new_col = perm.column_of(col + 1) - 1;
    order[static_cast<std::size_t>(rv.positions[r] - 1)] = rv.edges[static_cast<std::size_t>(new_col)];
  }
  return Ranking(ranking.layer_id(), std::move(order));
}

}  // namespace rankgauntlet
