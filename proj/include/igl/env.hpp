#pragma once

#include <array>
#include <string>
#include <vector>

#include "igl/rng.hpp"

namespace igl {

using Vec = std::vector<double>;

/// Layered episodic MDP: H disjoint layers, singleton start layer, transitions
/// only between consecutive layers, context-independent dynamics.
struct LayeredMdp {
    int horizon = 0;      // H
    int action_count = 0; // K
    /// Global state ids per layer; layers[0] has exactly one entry.
    std::vector<std::vector<int>> layers;
    std::vector<int> layer_of;     // state -> 0-based layer
    std::vector<int> pos_in_layer; // state -> index within its layer
    /// transition[s][a]: probability row over layers[layer_of[s]+1].
    /// Empty rows for terminal-layer states.
    std::vector<std::vector<Vec>> transition;

    int state_count() const { return static_cast<int>(layer_of.size()); }
    const std::vector<int>& terminal_layer() const { return layers.back(); }
    bool is_terminal(int s) const { return layer_of[s] == horizon - 1; }

    /// Fills layer_of / pos_in_layer from layers.
    void index_layers();
    void validate() const;
};

struct ContextModel {
    std::vector<std::string> labels;
    Vec distribution;

    int count() const { return static_cast<int>(labels.size()); }
    void validate() const;
};

/// Known identifiability constants: every (context, terminal state) pair is
/// either heterogeneous (sum f* <= M, max f* >= theta, separation sigma > 1)
/// or homogeneous (f* identically c).
struct IdentConstants {
    double M = 0.0;
    double c = 0.0;
    double theta = 0.0;
};

/// Latent reward plus the feedback channel. The channel conditions only on
/// (context, terminal state, realized reward), which enforces conditional
/// independence of the feedback from the trajectory prefix and final action.
struct FeedbackModel {
    int alphabet_size = 0;
    std::vector<std::string> alphabet_labels;
    /// f*: [context][state][action] -> [0,1]; only terminal-state rows are used.
    std::vector<std::vector<Vec>> reward_fn;
    /// phi*: [context][symbol][state] -> {0,1}.
    std::vector<std::vector<std::vector<int>>> decoder;
    /// channel[context][state][r]: distribution over symbols.
    std::vector<std::vector<std::array<Vec, 2>>> channel;
};

struct Env {
    LayeredMdp mdp;
    ContextModel contexts;
    FeedbackModel feedback;
    IdentConstants ident;
    std::vector<std::string> state_labels;
    std::vector<std::string> action_labels;
    std::string name;

    /// heterogeneous[x][pos-in-terminal-layer], filled by validate().
    std::vector<std::vector<bool>> heterogeneous;

    int state_index(const std::string& label) const;
    int context_index(const std::string& label) const;
    bool is_heterogeneous(int context, int terminal_state) const;

    /// Structural checks plus the feedback-consistency and identifiability
    /// audits. Throws EnvSpecError; must be called once after construction.
    void validate();
};

struct Trajectory {
    int context = -1;
    std::vector<int> states;  // one per step h = 1..H
    std::vector<int> actions; // one per step h = 1..H
    int reward = 0;           // realized terminal reward bit
    int feedback = 0;         // observed symbol
};

/// Stochastic tabular policy: rows[context][state] is a distribution over
/// actions, defined for every state.
struct TabularPolicy {
    std::vector<std::vector<Vec>> rows;

    const Vec& row(int context, int state) const { return rows[context][state]; }
    void validate(int n_contexts, int n_states, int n_actions) const;
};

TabularPolicy uniform_policy(const Env& env);

/// Runs one episode under the policy. Throws std::invalid_argument when a
/// policy row it touches is not a probability vector.
Trajectory sample_episode(const Env& env, const TabularPolicy& policy, Rng& rng);

/// Exact policy value under an arbitrary terminal reward table (same shape as
/// FeedbackModel::reward_fn), by backward induction over layers and contexts.
double exact_value(const Env& env, const TabularPolicy& policy,
                   const std::vector<std::vector<Vec>>& reward);

/// Exact value under the environment's own latent reward f*.
double exact_value(const Env& env, const TabularPolicy& policy);

/// Probability that an episode under the policy ends in `terminal_state`.
double reach_probability(const Env& env, const TabularPolicy& policy, int terminal_state);

struct OptimalValue {
    double value = 0.0;
    TabularPolicy policy;
};

/// V* and a maximizing deterministic policy via backward induction per context.
OptimalValue optimal_value(const Env& env);

/// The two-context, five-action, three-layer benchmark environment with the
/// context-flip feedback rule. Throws ConfigError when p or p_reward is
/// outside (0, 0.5); identifiability violations surface from validate().
Env build_synthetic_env(double p, double p_reward);

} // namespace igl
