#pragma once

// Independent brute-force references for the core algorithms. Shared by the
// `verify` subcommand and the acceptance tests. Nothing here reuses the code
// path it checks: enumeration replaces optimization, loops replace matrices.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rankgauntlet/ranking.hpp"
#include "rankgauntlet/vulnid.hpp"

namespace rankgauntlet::oracle {

struct Result {
  std::string family;
  std::string check;
  int instances = 0;
  int failures = 0;
  double worst = 0.0;  // largest observed error, where meaningful
  std::string detail;
  bool passed() const { return failures == 0 && instances > 0; }
};

// Reference VOTE: per-edge sum of 0-based positions, stable argsort,
// ties to the smaller edge ID.
std::vector<int> vote(const std::vector<std::vector<int>>& rankings);

// Every permutation of [0, d).
std::vector<std::vector<int>> all_permutations(int d);

// Max over all d! assignments of sum_r w(r, sigma(r)).
double best_assignment_value(const Eigen::MatrixXd& w);

// Exhaustive max of the displacement objective over all (d!)^m choices.
double best_displacement(const std::vector<VulnerableMatrix>& r_v, const std::vector<std::int64_t>& a);

// Top right-singular vector by power iteration on M^T M.
Eigen::VectorXd top_right_singular_vector(const Eigen::MatrixXd& m, int iterations = 500);

Result theorem1_enumeration(int instances, std::uint64_t seed);
Result vote_equivalence(int instances, std::uint64_t seed);
Result sinkhorn_contract(int instances, std::uint64_t seed);
Result gradient_check(int instances, std::uint64_t seed);
Result hungarian_bruteforce(int instances, std::uint64_t seed);
// Passes when at least `required` of `instances` reach 90% of the exhaustive best.
Result optimizer_quality(int instances, int required, std::uint64_t seed);

std::vector<Result> run_suite(std::uint64_t seed);

}  // namespace rankgauntlet::oracle
