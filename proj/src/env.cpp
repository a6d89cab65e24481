#include "igl/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "igl/errors.hpp"

namespace igl {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kHomogeneousTol = 1e-9;

bool is_prob_row(const Vec& row, double tol) {
    double sum = 0.0;
    for (double v : row) {
        if (v < 0.0 || !std::isfinite(v)) return false;
        sum += v;
    }
    return std::abs(sum - 1.0) <= tol;
}

} // namespace

void LayeredMdp::index_layers() {
    int total = 0;
    for (const auto& layer : layers) total += static_cast<int>(layer.size());
    layer_of.assign(total, -1);
    pos_in_layer.assign(total, -1);
    for (int h = 0; h < static_cast<int>(layers.size()); ++h) {
        for (int i = 0; i < static_cast<int>(layers[h].size()); ++i) {
            int s = layers[h][i];
            layer_of[s] = h;
            pos_in_layer[s] = i;
        }
    }
}

void LayeredMdp::validate() const {
    if (horizon < 1) throw EnvSpecError("horizon must be positive");
    if (action_count < 1) throw EnvSpecError("action count must be positive");
    if (static_cast<int>(layers.size()) != horizon)
        throw EnvSpecError("layer list does not match horizon");
    if (layers.front().size() != 1) throw EnvSpecError("start layer must be a singleton");

    std::vector<int> seen(state_count(), 0);
    for (const auto& layer : layers)
        for (int s : layer) {
            if (s < 0 || s >= state_count() || seen[s]++)
                throw EnvSpecError("layers must partition the state ids");
        }

    for (int s = 0; s < state_count(); ++s) {
        int h = layer_of[s];
        bool terminal = h == horizon - 1;
        if (static_cast<int>(transition[s].size()) != (terminal ? 0 : action_count))
            throw EnvSpecError("transition rows missing for state " + std::to_string(s));
        if (terminal) continue;
        std::size_t next_size = layers[h + 1].size();
        for (int a = 0; a < action_count; ++a) {
            const Vec& row = transition[s][a];
            if (row.size() != next_size)
                throw EnvSpecError("transition row connects non-consecutive layers");
            if (!is_prob_row(row, kRowSumTol))
                throw EnvSpecError("transition row of state " + std::to_string(s) +
                                   " action " + std::to_string(a) +
                                   " is not a probability vector");
        }
    }
}

void ContextModel::validate() const {
    if (labels.empty()) throw EnvSpecError("context set must be nonempty");
    if (distribution.size() != labels.size())
        throw EnvSpecError("context distribution size mismatch");
    if (!is_prob_row(distribution, kRowSumTol))
        throw EnvSpecError("context distribution is not a probability vector");
}

int Env::state_index(const std::string& label) const {
    auto it = std::find(state_labels.begin(), state_labels.end(), label);
    if (it == state_labels.end()) throw ConfigError("unknown state label: " + label);
    return static_cast<int>(it - state_labels.begin());
}

int Env::context_index(const std::string& label) const {
    auto it = std::find(contexts.labels.begin(), contexts.labels.end(), label);
    if (it == contexts.labels.end()) throw ConfigError("unknown context label: " + label);
    return static_cast<int>(it - contexts.labels.begin());
}

bool Env::is_heterogeneous(int context, int terminal_state) const {
    return heterogeneous[context][mdp.pos_in_layer[terminal_state]];
}

void Env::validate() {
    mdp.index_layers();
    mdp.validate();
    contexts.validate();

    const int C = contexts.count();
    const int S = mdp.state_count();
    const int K = mdp.action_count;
    const int Y = feedback.alphabet_size;
    if (Y < 1) throw EnvSpecError("feedback alphabet must be nonempty");

    if (static_cast<int>(feedback.reward_fn.size()) != C ||
        static_cast<int>(feedback.decoder.size()) != C ||
        static_cast<int>(feedback.channel.size()) != C)
        throw EnvSpecError("feedback tables must cover every context");

    for (int x = 0; x < C; ++x) {
        if (static_cast<int>(feedback.reward_fn[x].size()) != S ||
            static_cast<int>(feedback.channel[x].size()) != S)
            throw EnvSpecError("feedback tables must cover every state");
        if (static_cast<int>(feedback.decoder[x].size()) != Y)
            throw EnvSpecError("decoder table must cover every symbol");
        for (int y = 0; y < Y; ++y)
            if (static_cast<int>(feedback.decoder[x][y].size()) != S)
                throw EnvSpecError("decoder table must cover every state");
    }

    for (int x = 0; x < C; ++x)
        for (int s : mdp.terminal_layer()) {
            const Vec& f = feedback.reward_fn[x][s];
            if (static_cast<int>(f.size()) != K)
                throw EnvSpecError("reward row must have one entry per action");
            for (double v : f)
                if (v < 0.0 || v > 1.0 || !std::isfinite(v))
                    throw EnvSpecError("reward values must lie in [0,1]");
            for (int r = 0; r < 2; ++r) {
                const Vec& ch = feedback.channel[x][s][r];
                if (static_cast<int>(ch.size()) != Y)
                    throw EnvSpecError("channel row must cover the alphabet");
                if (!is_prob_row(ch, kRowSumTol))
                    throw EnvSpecError("channel row is not a probability vector");
                // Decoder consistency: every symbol the channel can emit for
                // (x, s, r) must decode back to r.
                for (int y = 0; y < Y; ++y)
                    if (ch[y] > 0.0 && feedback.decoder[x][y][s] != r)
                        throw EnvSpecError(
                            "decoder inconsistent with channel at context " +
                            contexts.labels[x] + ", state " + state_labels[s] +
                            ", reward " + std::to_string(r));
            }
        }

    // Identifiability constants and the per-(context, state) branch audit.
    const double M = ident.M;
    const double theta = ident.theta;
    if (!(M > 0.0 && M < K / 2.0))
        throw EnvSpecError("identifiability requires 0 < M < K/2");
    if (!(theta > 0.0 && theta < 1.0))
        throw EnvSpecError("identifiability requires theta in (0,1)");
    if (ident.c < 0.0 || ident.c > 1.0)
        throw EnvSpecError("homogeneous constant c must lie in [0,1]");
    const double sigma = theta * (K - M) / M;
    if (!(sigma > 1.0))
        throw EnvSpecError("identifiability requires sigma = theta(K-M)/M > 1");

    heterogeneous.assign(C, std::vector<bool>(mdp.terminal_layer().size(), false));
    for (int x = 0; x < C; ++x)
        for (int s : mdp.terminal_layer()) {
            const Vec& f = feedback.reward_fn[x][s];
            double sum = std::accumulate(f.begin(), f.end(), 0.0);
            double fmax = *std::max_element(f.begin(), f.end());
            bool homogeneous = true;
            for (double v : f)
                if (std::abs(v - ident.c) > kHomogeneousTol) homogeneous = false;
            if (homogeneous) continue;
            if (sum > M + kHomogeneousTol || fmax < theta - kHomogeneousTol) {
                std::ostringstream msg;
                msg << "state " << state_labels[s] << " under context "
                    << contexts.labels[x]
                    << " is neither homogeneous nor heterogeneous (sum=" << sum
                    << ", max=" << fmax << ")";
                throw EnvSpecError(msg.str());
            }
            heterogeneous[x][mdp.pos_in_layer[s]] = true;
        }
}

TabularPolicy uniform_policy(const Env& env) {
    TabularPolicy policy;
    Vec row(env.mdp.action_count, 1.0 / env.mdp.action_count);
    policy.rows.assign(env.contexts.count(),
                       std::vector<Vec>(env.mdp.state_count(), row));
    return policy;
}

void TabularPolicy::validate(int n_contexts, int n_states, int n_actions) const {
    if (static_cast<int>(rows.size()) != n_contexts)
        throw std::invalid_argument("policy must cover every context");
    for (const auto& per_state : rows) {
        if (static_cast<int>(per_state.size()) != n_states)
            throw std::invalid_argument("policy must cover every state");
        for (const Vec& row : per_state) {
            if (static_cast<int>(row.size()) != n_actions || !is_prob_row(row, 1e-9))
                throw std::invalid_argument("policy row is not a probability vector");
        }
    }
}

Trajectory sample_episode(const Env& env, const TabularPolicy& policy, Rng& rng) {
    const int H = env.mdp.horizon;
    Trajectory traj;
    traj.context = rng.categorical(env.contexts.distribution);
    traj.states.reserve(H);
    traj.actions.reserve(H);

    int s = env.mdp.layers[0][0];
    for (int h = 0; h < H; ++h) {
        const Vec& row = policy.row(traj.context, s);
        if (!is_prob_row(row, 1e-9))
            throw std::invalid_argument("policy row at state " +
                                        env.state_labels[s] +
                                        " is not a probability vector");
        int a = rng.categorical(row);
        traj.states.push_back(s);
        traj.actions.push_back(a);
        if (h + 1 < H) s = env.mdp.layers[h + 1][rng.categorical(env.mdp.transition[s][a])];
    }

    int s_H = traj.states.back();
    int a_H = traj.actions.back();
    traj.reward = rng.bernoulli(env.feedback.reward_fn[traj.context][s_H][a_H]) ? 1 : 0;
    traj.feedback = rng.categorical(env.feedback.channel[traj.context][s_H][traj.reward]);
    return traj;
}

namespace {

// Backward induction for one context; reward only at the terminal step.
double context_value(const Env& env, const TabularPolicy& policy, int x,
                     const std::vector<std::vector<Vec>>& reward) {
    const auto& mdp = env.mdp;
    const int H = mdp.horizon;
    std::vector<double> value(mdp.state_count(), 0.0);
    for (int s : mdp.terminal_layer()) {
        const Vec& row = policy.row(x, s);
        double v = 0.0;
        for (int a = 0; a < mdp.action_count; ++a) v += row[a] * reward[x][s][a];
        value[s] = v;
    }
    for (int h = H - 2; h >= 0; --h)
        for (int s : mdp.layers[h]) {
            const Vec& row = policy.row(x, s);
            double v = 0.0;
            for (int a = 0; a < mdp.action_count; ++a) {
                const Vec& tr = mdp.transition[s][a];
                double next = 0.0;
                for (std::size_t i = 0; i < tr.size(); ++i)
                    next += tr[i] * value[mdp.layers[h + 1][i]];
                v += row[a] * next;
            }
            value[s] = v;
        }
    return value[mdp.layers[0][0]];
}

} // namespace

double exact_value(const Env& env, const TabularPolicy& policy,
                   const std::vector<std::vector<Vec>>& reward) {
    double total = 0.0;
    for (int x = 0; x < env.contexts.count(); ++x)
        total += env.contexts.distribution[x] * context_value(env, policy, x, reward);
    return total;
}

double exact_value(const Env& env, const TabularPolicy& policy) {
    return exact_value(env, policy, env.feedback.reward_fn);
}

double reach_probability(const Env& env, const TabularPolicy& policy, int terminal_state) {
    if (!env.mdp.is_terminal(terminal_state))
        throw std::invalid_argument("reach_probability target must be terminal");
    const auto& mdp = env.mdp;
    double total = 0.0;
    for (int x = 0; x < env.contexts.count(); ++x) {
        std::vector<double> dist(mdp.state_count(), 0.0);
        dist[mdp.layers[0][0]] = 1.0;
        for (int h = 0; h + 1 < mdp.horizon; ++h) {
            std::vector<double> next(mdp.state_count(), 0.0);
            for (int s : mdp.layers[h]) {
                if (dist[s] == 0.0) continue;
                const Vec& row = policy.row(x, s);
                for (int a = 0; a < mdp.action_count; ++a) {
                    double w = dist[s] * row[a];
                    if (w == 0.0) continue;
                    const Vec& tr = mdp.transition[s][a];
                    for (std::size_t i = 0; i < tr.size(); ++i)
                        next[mdp.layers[h + 1][i]] += w * tr[i];
                }
            }
            dist.swap(next);
        }
        total += env.contexts.distribution[x] * dist[terminal_state];
    }
    return total;
}

OptimalValue optimal_value(const Env& env) {
    const auto& mdp = env.mdp;
    const int H = mdp.horizon;
    const int K = mdp.action_count;

    OptimalValue result;
    result.policy.rows.assign(env.contexts.count(),
                              std::vector<Vec>(mdp.state_count(), Vec(K, 0.0)));

    for (int x = 0; x < env.contexts.count(); ++x) {
        std::vector<double> value(mdp.state_count(), 0.0);
        for (int s : mdp.terminal_layer()) {
            const Vec& f = env.feedback.reward_fn[x][s];
            int best = 0;
            for (int a = 1; a < K; ++a)
                if (f[a] > f[best]) best = a;
            value[s] = f[best];
            result.policy.rows[x][s][best] = 1.0;
        }
        for (int h = H - 2; h >= 0; --h)
            for (int s : mdp.layers[h]) {
                int best = 0;
                double best_v = -1.0;
                for (int a = 0; a < K; ++a) {
                    const Vec& tr = mdp.transition[s][a];
                    double v = 0.0;
                    for (std::size_t i = 0; i < tr.size(); ++i)
                        v += tr[i] * value[mdp.layers[h + 1][i]];
                    if (v > best_v) {
                        best_v = v;
                        best = a;
                    }
                }
                value[s] = best_v;
                result.policy.rows[x][s][best] = 1.0;
            }
        result.value += env.contexts.distribution[x] * value[mdp.layers[0][0]];
    }
    return result;
}

Env build_synthetic_env(double p, double p_reward) {
    if (!(p > 0.0 && p < 0.5) || !(p_reward > 0.0 && p_reward < 0.5))
        throw ConfigError("synthetic env requires p and p_reward in (0, 0.5)");

    Env env;
    env.name = "synthetic-v1";
    env.state_labels = {"s1g", "s2g", "s2b", "s3g", "s3b"};
    env.action_labels = {"a1", "a2", "a3", "a4", "a5"};

    auto& mdp = env.mdp;
    mdp.horizon = 3;
    mdp.action_count = 5;
    mdp.layers = {{0}, {1, 2}, {3, 4}};
    mdp.transition.assign(5, {});

    // From a good state, a1 keeps the good branch w.p. 1-p; the other actions
    // reverse it. Bad states absorb.
    auto good_rows = [&](int /*s*/) {
        std::vector<Vec> rows(5);
        rows[0] = {1.0 - p, p};
        for (int a = 1; a < 5; ++a) rows[a] = {p, 1.0 - p};
        return rows;
    };
    mdp.transition[0] = good_rows(0);
    mdp.transition[1] = good_rows(1);
    mdp.transition[2].assign(5, Vec{0.0, 1.0});

    env.contexts.labels = {"True", "False"};
    env.contexts.distribution = {0.7, 0.3};

    auto& fb = env.feedback;
    fb.alphabet_size = 2;
    fb.alphabet_labels = {"0", "1"};

    const int C = 2, S = 5;
    fb.reward_fn.assign(C, std::vector<Vec>(S, Vec(5, 0.0)));
    for (int x = 0; x < C; ++x) {
        fb.reward_fn[x][3] = {1.0 - p_reward, p_reward, p_reward, p_reward, p_reward};
        fb.reward_fn[x][4] = {0.0, 0.0, 0.0, 0.0, 0.0};
    }

    // y = r when the context is True, y = 1-r when it is False.
    fb.decoder.assign(C, std::vector<std::vector<int>>(2, std::vector<int>(S, 0)));
    fb.channel.assign(C, std::vector<std::array<Vec, 2>>(
                             S, {Vec{1.0, 0.0}, Vec{1.0, 0.0}}));
    for (int s = 0; s < S; ++s) {
        fb.decoder[0][0][s] = 0;
        fb.decoder[0][1][s] = 1;
        fb.decoder[1][0][s] = 1;
        fb.decoder[1][1][s] = 0;
        fb.channel[0][s][0] = {1.0, 0.0};
        fb.channel[0][s][1] = {0.0, 1.0};
        fb.channel[1][s][0] = {0.0, 1.0};
        fb.channel[1][s][1] = {1.0, 0.0};
    }

    env.ident.M = 1.0 + 3.0 * p_reward;
    env.ident.theta = 1.0 - p_reward;
    env.ident.c = 0.0;

    env.validate();
    return env;
}

} // namespace igl
