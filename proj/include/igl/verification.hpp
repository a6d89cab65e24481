#pragma once

#include <string>
#include <vector>

#include "igl/env.hpp"
#include "igl/rng.hpp"

namespace igl {

/// Outcome of one oracle verification suite.
struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Sequential-product identity on random outcome sequences (S' <= 5, B <= 50);
/// requires relative agreement within 1e-12.
CheckResult check_dirichlet_identity(long long sequences, Rng& rng);

/// |J(v,a) - J(v',a)| <= L ||v - v'||_inf + 1e-9 over random posterior pairs,
/// for both the benchmark and the illustration constant sets.
CheckResult check_lipschitz(long long pairs_per_set, Rng& rng);

/// Monte-Carlo action frequencies at each terminal state of the environment
/// against the closed-form posterior, L-infinity within `tolerance`.
CheckResult check_posterior_monte_carlo(const Env& env, long long samples,
                                        double tolerance, Rng& rng);

/// Laplace-estimator log-loss regret under its S^2 K log(TH+S) guarantee on random
/// layered MDPs (S <= 8, K <= 4, H <= 4) driven by uniform policies.
CheckResult check_logloss_bound(int mdps, long long episodes, Rng& rng);

std::vector<CheckResult> run_all_checks(Rng& rng);

} // namespace igl
