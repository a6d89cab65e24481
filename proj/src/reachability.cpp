#include "igl/reachability.hpp"

#include <algorithm>
#include <cmath>

#include "igl/errors.hpp"

namespace igl {

TabularPolicy HomingPolicy::member_policy(const Env& env, int i) const {
    const auto& mdp = env.mdp;
    const int K = mdp.action_count;
    TabularPolicy pol;
    pol.rows.assign(env.contexts.count(),
                    std::vector<Vec>(mdp.state_count(), Vec(K, 0.0)));
    for (int s = 0; s < mdp.state_count(); ++s) {
        if (mdp.is_terminal(s)) {
            for (auto& per_state : pol.rows) per_state[s].assign(K, 1.0 / K);
        } else {
            for (auto& per_state : pol.rows) per_state[s][members[i].action[s]] = 1.0;
        }
    }
    return pol;
}

double HomingPolicy::exact_reach(const Env& env) const {
    double total = 0.0;
    for (std::size_t i = 0; i < members.size(); ++i)
        total += reach_probability(env, member_policy(env, static_cast<int>(i)), target);
    return members.empty() ? 0.0 : total / static_cast<double>(members.size());
}

namespace {

// Episode under one homing member: context and dynamics follow the real
// protocol; reward and feedback are drawn so downstream consumers see full
// trajectories.
Trajectory run_member(const Env& env, const HomingMember& member, Rng& rng) {
    const auto& mdp = env.mdp;
    Trajectory traj;
    traj.context = rng.categorical(env.contexts.distribution);
    int s = mdp.layers[0][0];
    for (int h = 0; h < mdp.horizon; ++h) {
        int a = mdp.is_terminal(s) ? rng.uniform_int(mdp.action_count)
                                   : member.action[s];
        traj.states.push_back(s);
        traj.actions.push_back(a);
        if (h + 1 < mdp.horizon)
            s = mdp.layers[h + 1][rng.categorical(mdp.transition[s][a])];
    }
    int s_H = traj.states.back();
    int a_H = traj.actions.back();
    traj.reward = rng.bernoulli(env.feedback.reward_fn[traj.context][s_H][a_H]) ? 1 : 0;
    traj.feedback = rng.categorical(env.feedback.channel[traj.context][s_H][traj.reward]);
    return traj;
}

} // namespace

Trajectory HomingPolicy::sample_episode(const Env& env, Rng& rng) const {
    int i = rng.uniform_int(static_cast<int>(members.size()));
    return run_member(env, members[i], rng);
}

double visitation_beta(int S, int K, int H, double delta, long long episodes) {
    return std::sqrt(std::log(static_cast<double>(S) * K * H / delta) /
                     (2.0 * static_cast<double>(episodes)));
}

HomingPolicy learn_homing_policy(const Env& env, int target, const HomingOptions& opt,
                                 Rng& rng) {
    const auto& mdp = env.mdp;
    if (!mdp.is_terminal(target))
        throw std::invalid_argument("homing target must be a terminal state");
    if (opt.episodes < 1) throw std::invalid_argument("homing budget must be >= 1");

    const int S = mdp.state_count();
    const int K = mdp.action_count;
    const int H = mdp.horizon;

    // Interaction counts; the true kernel is never consulted.
    std::vector<std::vector<long long>> visits(S, std::vector<long long>(K, 0));
    std::vector<std::vector<std::vector<long long>>> transitions(S);
    for (int s = 0; s < S; ++s)
        if (!mdp.is_terminal(s))
            transitions[s].assign(K, std::vector<long long>(mdp.layers[mdp.layer_of[s] + 1].size(), 0));

    const double log_term =
        std::log(2.0 * S * K * H * static_cast<double>(opt.episodes) / opt.delta);

    HomingPolicy homing;
    homing.target = target;
    homing.members.reserve(opt.episodes);

    std::vector<double> value(S, 0.0);
    std::vector<double> q(K, 0.0);
    std::vector<int> argmax_pool(K);

    for (long long episode = 0; episode < opt.episodes; ++episode) {
        // Optimistic backward induction under the empirical kernel.
        HomingMember member;
        member.action.assign(S, -1);
        for (int s : mdp.terminal_layer()) value[s] = s == target ? 1.0 : 0.0;
        for (int h = H - 2; h >= 0; --h)
            for (int s : mdp.layers[h]) {
                const auto& next_layer = mdp.layers[h + 1];
                for (int a = 0; a < K; ++a) {
                    double mean = 0.0;
                    if (visits[s][a] > 0) {
                        for (std::size_t i = 0; i < next_layer.size(); ++i)
                            mean += static_cast<double>(transitions[s][a][i]) /
                                    static_cast<double>(visits[s][a]) * value[next_layer[i]];
                    }
                    double bonus = opt.bonus_scale *
                                   std::sqrt(2.0 * log_term /
                                             std::max<long long>(1, visits[s][a]));
                    q[a] = std::min(1.0, mean + bonus);
                }
                double best = *std::max_element(q.begin(), q.begin() + K);
                int pool = 0;
                for (int a = 0; a < K; ++a)
                    if (q[a] >= best - 1e-12) argmax_pool[pool++] = a;
                member.action[s] = argmax_pool[rng.uniform_int(pool)];
                value[s] = best;
            }

        // Execute greedily and record the observed transitions.
        Trajectory traj = run_member(env, member, rng);
        for (int h = 0; h + 1 < H; ++h) {
            int s = traj.states[h];
            int a = traj.actions[h];
            ++visits[s][a];
            ++transitions[s][a][mdp.pos_in_layer[traj.states[h + 1]]];
        }
        if (traj.states.back() == target) ++homing.learning_hits;
        homing.members.push_back(std::move(member));
    }
    return homing;
}

VisitationStats estimate_visitation(const Env& env, const HomingPolicy& homing,
                                    long long episodes, double delta, Rng& rng) {
    if (episodes < 1) throw std::invalid_argument("visitation budget must be >= 1");
    long long hits = 0;
    for (long long i = 0; i < episodes; ++i)
        hits += homing.sample_episode(env, rng).states.back() == homing.target;
    VisitationStats stats;
    stats.p_hat = static_cast<double>(hits) / static_cast<double>(episodes);
    stats.episodes = episodes;
    stats.delta = delta;
    stats.beta = visitation_beta(env.mdp.state_count(), env.mdp.action_count,
                                 env.mdp.horizon, delta, episodes);
    return stats;
}

VisitationStats learning_visitation(const Env& env, const HomingPolicy& homing,
                                    double delta) {
    VisitationStats stats;
    stats.episodes = static_cast<long long>(homing.members.size());
    stats.p_hat = stats.episodes == 0
                      ? 0.0
                      : static_cast<double>(homing.learning_hits) /
                            static_cast<double>(stats.episodes);
    stats.delta = delta;
    stats.beta = visitation_beta(env.mdp.state_count(), env.mdp.action_count,
                                 env.mdp.horizon, delta, std::max<long long>(1, stats.episodes));
    return stats;
}

ReachabilityClass classify_reachability(const VisitationStats& stats, double tau,
                                        double epsilon) {
    if (!(tau > 0.0 && tau < 1.0))
        throw std::invalid_argument("threshold tau must lie in (0,1)");
    if (stats.p_hat >= tau + stats.beta) return ReachabilityClass::AboveThreshold;
    if (stats.p_hat <= tau - (stats.beta + epsilon)) return ReachabilityClass::BelowThreshold;
    return ReachabilityClass::Indeterminate;
}

bool ReachableSet::contains(int s) const {
    return std::binary_search(states.begin(), states.end(), s);
}

ReachableSet build_reachable_set(const std::vector<int>& terminal_states,
                                 const std::vector<VisitationStats>& stats,
                                 double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 0.25))
        throw std::invalid_argument("epsilon must lie in (0, 1/4)");
    if (terminal_states.size() != stats.size())
        throw std::invalid_argument("one VisitationStats entry per terminal state");
    ReachableSet set;
    set.epsilon = epsilon;
    for (std::size_t i = 0; i < terminal_states.size(); ++i)
        if (stats[i].p_hat >= 4.0 * epsilon) set.states.push_back(terminal_states[i]);
    std::sort(set.states.begin(), set.states.end());
    return set;
}

} // namespace igl
