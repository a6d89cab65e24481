#pragma once

#include <string>
#include <vector>

#include "igl/env.hpp"
#include "igl/reachability.hpp"

namespace igl {

/// Known constants (K, M, c, theta) together with the derived identifiability
/// quantities: kappa = (K theta - M) / (K (K - M)), xi = (theta/M - 1/(K-M))/2,
/// and the surrogate's Lipschitz constant L = 4/kappa + 1/xi.
struct IdentifiabilityConstants {
    int K = 0;
    double M = 0.0;
    double c = 0.0;
    double theta = 0.0;
    double kappa = 0.0;
    double xi = 0.0;
    double L = 0.0;
};

/// Throws EnvSpecError when M >= K/2, theta outside (0,1), or the separation
/// ratio sigma = theta (K - M) / M is not > 1.
IdentifiabilityConstants derive_constants(int K, double M, double c, double theta);

IdentifiabilityConstants constants_of(const Env& env);

/// Ramp G(alpha, beta, lambda): 0 below beta, linear up to beta + lambda, then 1.
double ramp(double alpha, double beta, double lambda);

/// Lipschitz reward surrogate J(v, a): the known constant c near the uniform
/// posterior, the ramp of v_a in the separated regime, and a linear bridge
/// between the two.
double decode_reward(const Vec& v, int action, const IdentifiabilityConstants& cst);

/// Posterior of the action given (context, feedback, terminal state) under
/// uniform action choice, from the true (f*, phi*). Throws std::domain_error
/// on zero-probability conditioning (phi* = 1 with sum f* = 0, or phi* = 0
/// with sum f* = K).
Vec true_posterior(const Env& env, int context, int symbol, int terminal_state);

struct TupleRecord {
    int context = 0;
    int state = 0;
    int action = 0;
    int feedback = 0;
};

struct TupleDataset {
    int state = -1;
    std::vector<TupleRecord> records;
    long long episodes_consumed = 0;
};

/// Columnar text form: one "context state action feedback" line per record.
std::string dataset_to_text(const TupleDataset& dataset);
TupleDataset dataset_from_text(const std::string& text);

/// Runs each state's homing policy until N0 episodes ended at that state,
/// discarding the rest. A hard cap of (20/eps)(N0 + log(S/delta)) episodes
/// per state turns a wrong reachable set into a NumericalError instead of a
/// hang. `homing[i]` must target `reachable.states[i]`.
std::vector<TupleDataset> collect_tuples(const Env& env, const ReachableSet& reachable,
                                         const std::vector<HomingPolicy>& homing,
                                         long long tuples_per_state, double delta,
                                         Rng& rng);

/// A reward candidate f: (context, state, action) -> [0,1], dense like
/// FeedbackModel::reward_fn.
struct RewardCandidate {
    std::string name;
    std::vector<std::vector<Vec>> table;
};

/// A per-state decoder candidate phi_s: (context, symbol) -> {0,1}.
struct DecoderCandidate {
    std::string name;
    std::vector<std::vector<int>> bit;
};

/// The induced posterior map of one (f, phi_s) pair at a fixed state:
/// h_a(x,y) = f(x,a) phi(x,y) / Q + (1-f(x,a))(1-phi(x,y)) / (K-Q).
/// Degenerate branches (phi = 1 with Q = 0, phi = 0 with Q = K) take the
/// algebraic limit, the uniform vector, so every hypothesis is total.
struct PosteriorHypothesis {
    int state = -1;
    int reward_index = -1;
    int decoder_index = -1;
    std::vector<std::vector<Vec>> table; // [context][symbol] -> simplex over actions

    const Vec& at(int context, int symbol) const { return table[context][symbol]; }
};

struct StateHypothesisClass {
    int state = -1;
    int reward_count = 0;
    int decoder_count = 0;
    std::vector<PosteriorHypothesis> hypotheses; // index = reward * decoders + decoder

    int size() const { return static_cast<int>(hypotheses.size()); }
};

StateHypothesisClass build_hypothesis_class(int state, int n_contexts, int n_symbols,
                                            int n_actions,
                                            const std::vector<RewardCandidate>& rewards,
                                            const std::vector<DecoderCandidate>& decoders);

struct ErmFit {
    int hypothesis_index = -1;
    double empirical_loss = 0.0;
};

/// Least squared loss against one-hot action targets; ties break toward the
/// lowest enumeration index.
ErmFit erm_fit(const TupleDataset& dataset, const StateHypothesisClass& cls);

/// Default finite classes for the synthetic benchmark: the true pair plus a
/// permuted-reward distractor, the reward lower bound induced by the decoder,
/// a shell of near-truth perturbations, and the context-flipped decoder.
struct SyntheticClassOptions {
    int near_distractors = 24;
    double near_scale = 0.04;
};

struct CandidateClasses {
    std::vector<RewardCandidate> rewards;
    /// Shared decoder candidate list, applied to every terminal state.
    std::vector<DecoderCandidate> decoders;
};

CandidateClasses build_synthetic_classes(const Env& env, const SyntheticClassOptions& opt = {});

/// Expected surrogate reward under the true posterior,
/// E_y[J(h*(x,y,s), a)]: the reward function the online regression oracle is
/// measured against. Computable whenever the feedback alphabet is finite.
std::vector<std::vector<Vec>> decoder_lower_bound_table(const Env& env,
                                                        const IdentifiabilityConstants& cst);

} // namespace igl
