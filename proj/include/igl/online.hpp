#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "igl/decoder.hpp"
#include "igl/env.hpp"
#include "igl/reachability.hpp"

namespace igl {

/// Visit counters N_t(s,a) and N_t(s,a,s'); successor index is the position
/// within the next layer.
struct TransitionCounts {
    std::vector<std::vector<long long>> visits;
    std::vector<std::vector<std::vector<long long>>> successors;

    static TransitionCounts zeros(const LayeredMdp& mdp);
    long long total_visits() const;
};

/// Adds the H-1 transitions of one trajectory.
void update_counts(TransitionCounts& counts, const LayeredMdp& mdp, const Trajectory& traj);

/// Laplace-smoothed rows (N(s,a,s') + 1) / (N(s,a) + |next layer|);
/// strictly positive, exactly normalized.
struct SmoothedTransition {
    std::vector<std::vector<Vec>> rows; // same shape as LayeredMdp::transition
};

SmoothedTransition estimate_transition(const TransitionCounts& counts, const LayeredMdp& mdp);

/// Both sides of the sequential-product identity for one (s,a) pair: the
/// product of pre-update predictive probabilities of the observed outcomes,
/// and the closed form (S'-1)! prod n! / (S'+B-1)!.
struct SequentialProduct {
    double sequential = 1.0;
    double closed_form = 1.0;
};

SequentialProduct sequential_product_identity(const std::vector<int>& outcomes,
                                              int successor_count);

/// Cumulative log-loss of the running Laplace estimator minus that of the
/// true kernel, replayed over a trajectory stream. Throws NumericalError if
/// the true kernel assigns zero probability to an observed transition.
double logloss_regret(const LayeredMdp& mdp, const std::vector<Trajectory>& stream);

/// The guarantee the estimator satisfies: S^2 K log(TH + S).
double logloss_regret_bound(int S, int K, int H, long long T);

/// Online squared-loss regression oracle over (context, state, action).
class RegressionOracle {
public:
    virtual ~RegressionOracle() = default;
    virtual double predict(int context, int state, int action) const = 0;
    /// Target must lie in [0,1]; throws std::invalid_argument otherwise.
    virtual void update(int context, int state, int action, double target) = 0;
    virtual std::unique_ptr<RegressionOracle> clone() const = 0;
};

/// Exponentially weighted aggregation over a finite candidate list with
/// weighted-mean predictions; eta = 1/2 gives squared-loss regret <= 2 ln |F|.
class AggregationOracle : public RegressionOracle {
public:
    AggregationOracle(std::vector<RewardCandidate> candidates, double eta = 0.5);

    double predict(int context, int state, int action) const override;
    void update(int context, int state, int action, double target) override;
    std::unique_ptr<RegressionOracle> clone() const override;

    const Vec& weights() const { return weights_; }
    int candidate_count() const { return static_cast<int>(candidates_.size()); }

private:
    std::vector<RewardCandidate> candidates_;
    Vec weights_;
    double eta_;
};

/// Tabular online gradient descent on the squared loss, clipped to [0,1].
class OgdOracle : public RegressionOracle {
public:
    OgdOracle(int contexts, int states, int actions, double learning_rate = 0.05,
              double initial = 0.5);

    double predict(int context, int state, int action) const override;
    void update(int context, int state, int action, double target) override;
    std::unique_ptr<RegressionOracle> clone() const override;

    const std::vector<std::vector<Vec>>& table() const { return table_; }

private:
    std::vector<std::vector<Vec>> table_;
    double learning_rate_;
};

/// Occupancy measure q[h][pos-in-layer][action]; strictly positive inside
/// the flow polytope of the kernel it was solved under.
struct OccupancyMeasure {
    std::vector<std::vector<Vec>> q;
    double objective = 0.0;
    int newton_iterations = 0;
    double newton_decrement = 0.0;
};

struct OccupancySolverOptions {
    double decrement_tol = 1e-10;
    int max_iterations = 200;
};

/// Maximizes sum q . reward + (1/gamma) sum log q over the occupancy polytope
/// of `kernel` by equality-constrained Newton with backtracking, starting
/// from the uniform-policy occupancy. Throws NumericalError when the
/// iteration cap is hit before the decrement tolerance.
OccupancyMeasure solve_occupancy(const LayeredMdp& mdp, const SmoothedTransition& kernel,
                                 const std::vector<Vec>& reward, double gamma,
                                 const OccupancySolverOptions& opt = {});

/// Occupancy induced by per-state action distributions under a kernel.
OccupancyMeasure occupancy_of_policy(const LayeredMdp& mdp, const SmoothedTransition& kernel,
                                     const std::vector<Vec>& policy_rows);

double occupancy_objective(const LayeredMdp& mdp, const std::vector<Vec>& reward,
                           double gamma, const OccupancyMeasure& q);

/// L-infinity violation of the start-mass and flow-conservation constraints.
double flow_residual(const LayeredMdp& mdp, const SmoothedTransition& kernel,
                     const OccupancyMeasure& q);

/// Euclidean norm of the objective gradient projected onto the constraint
/// tangent space at q (optimality certificate).
double occupancy_kkt_residual(const LayeredMdp& mdp, const SmoothedTransition& kernel,
                              const std::vector<Vec>& reward, double gamma,
                              const OccupancyMeasure& q);

/// Row-normalizes the occupancy into per-state action distributions.
std::vector<Vec> extract_policy(const LayeredMdp& mdp, const OccupancyMeasure& q);

/// Per-state fitted posteriors, keyed by terminal state id.
struct FittedDecoder {
    std::map<int, PosteriorHypothesis> by_state;
};

/// J(h^(x,y,s), a) when s is in the reachable set, absent otherwise.
std::optional<double> proxy_reward(const FittedDecoder& decoder,
                                   const IdentifiabilityConstants& cst, int context,
                                   int symbol, int terminal_state, int action,
                                   const ReachableSet& reachable);

struct GammaSchedule {
    enum class Mode { HSqrtKT, Constant };
    Mode mode = Mode::HSqrtKT;
    double constant = 0.0;

    static GammaSchedule schedule() { return {Mode::HSqrtKT, 0.0}; }
    static GammaSchedule fixed(double value) { return {Mode::Constant, value}; }
    double value(int H, int K, long long t) const;
};

struct EpisodeMetric {
    long long episode = 0; // 1-based online episode index
    int context = -1;
    int terminal_state = -1;
    int true_reward = 0;
    std::optional<double> decoded_reward; // absent when filtered
    double policy_value = 0.0;            // exact value of pi_t under f*
    double cumulative_regret = 0.0;       // sum of V* - value(pi_t)
};

struct OnlineResult {
    TransitionCounts counts;
    long long oracle_updates = 0;
    double optimal_value = 0.0;
};

/// The online loop: per episode, predict rewards, smooth the kernel, solve
/// the barrier-regularized occupancy for every context, play the induced
/// policy, decode the feedback through the reachable-set filter, and update
/// the oracle and counters. Metrics are appended to `metrics` as they are
/// produced so callers keep partial rows when a solver error aborts the run.
OnlineResult run_online_loop(const Env& env, const ReachableSet& reachable,
                             const FittedDecoder& decoder,
                             const IdentifiabilityConstants& cst, RegressionOracle& oracle,
                             const GammaSchedule& gamma, long long episodes, Rng& rng,
                             std::vector<EpisodeMetric>& metrics,
                             const TransitionCounts* warm_start = nullptr);

struct TheoryParams {
    double gamma = 0.0;
    double n0 = 0.0;
    double epsilon = 0.0;
};

/// Closed-form parameter schedules from the regret analysis: gamma as a
/// minimum of three terms, N0 and epsilon as maxima of two.
TheoryParams compute_theory_params(double T, double S, double K, double H, double L,
                                   double reg_sq);

} // namespace igl
