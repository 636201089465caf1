#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rankgauntlet/error.hpp"
#include "rankgauntlet/permopt.hpp"

using namespace rankgauntlet;

namespace {

double max_marginal_error(const Eigen::MatrixXd& p) {
  return std::max((p.rowwise().sum().array() - 1.0).abs().maxCoeff(),
                  (p.colwise().sum().array() - 1.0).abs().maxCoeff());
}

}  // namespace

TEST_CASE("sinkhorn output is doubly stochastic") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double scale : {1.0, 10.0, 1000.0}) {
    for (double tau : {1.0, 0.1, 0.01}) {
      for (int d = 1; d <= 8; ++d) {
        Eigen::MatrixXd x(d, d);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = scale * normal(rng);
        SinkhornConfig cfg;
        cfg.temperature = tau;
        const auto p = sinkhorn(x, cfg);
        CHECK(p.allFinite());
        CHECK(p.minCoeff() >= 0.0);
        CHECK(max_marginal_error(p) <= 1e-6);
      }
    }
  }
  CHECK(oracle::sinkhorn_contract(100, 43).passed());
}

TEST_CASE("sinkhorn limits") {
  SinkhornConfig cfg;
  cfg.temperature = 0.05;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 3);
  x(1, 2) = 50.0;
  CHECK(sinkhorn(x, cfg)(1, 2) > 0.999);
  // Constant input gives the uniform matrix.
  const auto u = sinkhorn(Eigen::MatrixXd::Constant(4, 4, 2.5), cfg);
  CHECK((u.array() - 0.25).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(sinkhorn(Eigen::MatrixXd::Zero(2, 3), cfg), Error);
  Eigen::MatrixXd nan = Eigen::MatrixXd::Zero(2, 2);
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(sinkhorn(nan, cfg), Error);
  SinkhornConfig bad;
  bad.temperature = 0.0;
  CHECK_THROWS_AS(sinkhorn(x, bad), Error);
}

TEST_CASE("lower temperature moves toward the hard matching") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 2 + trial % 5;
    Eigen::MatrixXd x(d, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = unit(rng);
    double prev = -1.0;
    for (double tau : {1.0, 0.5, 0.1}) {
      SinkhornConfig cfg;
      cfg.temperature = tau;
      const double v = (sinkhorn(x, cfg).array() * x.array()).sum();
      CHECK(v >= prev - 1e-9);
      prev = v;
    }
    CHECK(prev <= oracle::best_assignment_value(x) + 1e-9);
  }
}

TEST_CASE("loss is zero at the identity and gradients match finite differences") {
  const Ranking r(0, {3, 1, 4, 2});
  const std::vector<int> edges{1, 2, 3};
  const std::vector<VulnerableMatrix> rv{extract_vulnerable(r, edges)};
  const auto a = default_scale(4);
  SinkhornConfig cfg;
  cfg.temperature = 0.05;
  // A sharp identity keeps every edge where it was.
  const std::vector<Eigen::MatrixXd> x{Eigen::MatrixXd::Identity(3, 3) * 20.0};
  CHECK(std::abs(attack_loss(x, rv, a, cfg).loss) < 1e-6);
  CHECK(oracle::gradient_check(20, 53).passed());
}

TEST_CASE("optimizer never ends below its start") {
  std::mt19937_64 rng(59);
  std::vector<double> initial, final_;
  for (int run = 0; run < 20; ++run) {
    const int n = 6;
    std::vector<int> order{1, 2, 3, 4, 5, 6};
    std::vector<VulnerableMatrix> rv;
    for (int u = 0; u < 2; ++u) {
      std::shuffle(order.begin(), order.end(), rng);
      rv.push_back(extract_vulnerable(Ranking(0, order), std::vector<int>{1, 3, 4, 6}));
    }
    SinkhornConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(run);
    const auto res = optimize(rv, default_scale(n), cfg);
    CHECK(res.best_objective >= res.initial_objective);
    CHECK(res.objective_trace.size() == static_cast<std::size_t>(cfg.epochs + 1));
    initial.push_back(res.initial_objective);
    final_.push_back(res.best_objective);
  }
  std::sort(initial.begin(), initial.end());
  std::sort(final_.begin(), final_.end());
  CHECK(final_[10] > initial[10]);
}

TEST_CASE("zero epochs return the initial sinkhorn") {
  const std::vector<VulnerableMatrix> rv{extract_vulnerable(Ranking(0, {2, 1, 3}), std::vector<int>{1, 2})};
  SinkhornConfig cfg;
  cfg.epochs = 0;
  const auto res = optimize(rv, default_scale(3), cfg);
  CHECK(res.objective_trace.size() == 1);
  CHECK(res.best_objective == res.initial_objective);
}

TEST_CASE("d=2 optimum is the swap") {
  const std::vector<VulnerableMatrix> rv{extract_vulnerable(Ranking(0, {1, 2, 3, 4}), std::vector<int>{1, 4})};
  const auto a = default_scale(4);
  const auto res = optimize(rv, a, SinkhornConfig{});
  const auto perm = hungarian_round(res.doubly_stochastic[0]);
  CHECK(perm.columns() == std::vector<int>{2, 1});
  const std::vector<Eigen::MatrixXd> dense{to_dense(perm)};
  CHECK(displacement_objective(rv, dense, a) == doctest::Approx(oracle::best_displacement(rv, a)));
}

TEST_CASE("optimizer quality and hungarian oracles") {
  CHECK(oracle::optimizer_quality(20, 18, 61).passed());
  CHECK(oracle::hungarian_bruteforce(50, 67).passed());
}

TEST_CASE("hungarian prefers the lexicographically smallest optimum") {
  const auto res = max_weight_assignment(Eigen::MatrixXd::Ones(3, 3));
  CHECK(res.column_of_row == std::vector<int>{0, 1, 2});
  CHECK(res.value == doctest::Approx(3.0));
}

TEST_CASE("splicing a permutation into the vulnerable positions") {
  const Ranking r(0, {3, 4, 5, 1, 6, 2});
  const auto rv = extract_vulnerable(r, std::vector<int>{1, 2, 5});
  CHECK(apply_vulnerable_permutation(r, rv, PermutationMatrix(std::vector<int>{1, 2, 3})) == r);
  // Slots 3, 4, 6 hold columns 2, 0, 1; the map sends column c to 2 - c.
  const Ranking out = apply_vulnerable_permutation(r, rv, PermutationMatrix(std::vector<int>{3, 2, 1}));
  CHECK(out.order() == std::vector<int>{3, 4, 1, 5, 6, 2});
}
