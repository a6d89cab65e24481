#pragma once

#include <vector>

#include "igl/env.hpp"

namespace igl {

/// One executed policy of the homing learner: a deterministic action per
/// non-terminal state. Terminal-layer rows are uniform by construction.
struct HomingMember {
    std::vector<int> action; // indexed by global state id; -1 on terminal states
};

/// Uniform mixture over the policies executed while learning to reach
/// `target`: one member is drawn per episode start.
struct HomingPolicy {
    int target = -1;
    std::vector<HomingMember> members;
    long long learning_hits = 0; // episodes that ended at target while learning

    /// Materializes member i as a tabular policy (uniform at the last layer).
    TabularPolicy member_policy(const Env& env, int i) const;
    /// Exact mixture reach probability: mean of the members' reach probabilities.
    double exact_reach(const Env& env) const;
    /// Draws a member uniformly and runs one episode.
    Trajectory sample_episode(const Env& env, Rng& rng) const;
};

struct VisitationStats {
    double p_hat = 0.0;
    long long episodes = 0;
    double beta = 0.0;
    double delta = 0.0;
};

enum class ReachabilityClass { AboveThreshold, BelowThreshold, Indeterminate };

struct ReachableSet {
    std::vector<int> states; // global ids, ascending
    double epsilon = 0.0;

    bool contains(int s) const;
    bool empty() const { return states.empty(); }
};

struct HomingOptions {
    long long episodes = 1; // N
    double delta = 0.05;
    /// Scale on the Hoeffding optimism bonus. The unscaled bonus
    /// sqrt(2 log(2SKHN/delta) / n) over-explores badly at desk-scale budgets
    /// (thousands of episodes); 0.3 keeps optimism but converges in time.
    double bonus_scale = 0.3;
};

/// Concentration width of the visitation estimate: sqrt(log(SKH/delta) / 2N).
double visitation_beta(int S, int K, int H, double delta, long long episodes);

/// Optimistic tabular value-iteration learner on the dummy reward
/// 1{terminal state == target}. Access is interaction-only; the kernel is
/// never read. Returns the uniform mixture over the executed policies.
HomingPolicy learn_homing_policy(const Env& env, int target, const HomingOptions& opt,
                                 Rng& rng);

/// Runs the mixture for `episodes` fresh episodes and reports the empirical
/// visitation frequency of the target with its concentration width.
VisitationStats estimate_visitation(const Env& env, const HomingPolicy& homing,
                                    long long episodes, double delta, Rng& rng);

/// Stats from the learning episodes themselves (no extra interaction).
VisitationStats learning_visitation(const Env& env, const HomingPolicy& homing,
                                    double delta);

ReachabilityClass classify_reachability(const VisitationStats& stats, double tau,
                                        double epsilon);

/// Keeps the states whose empirical visitation clears 4 * epsilon.
/// `stats[i]` must describe `terminal_states[i]`.
ReachableSet build_reachable_set(const std::vector<int>& terminal_states,
                                 const std::vector<VisitationStats>& stats,
                                 double epsilon);

} // namespace igl
