#pragma once

// Shared test fixtures and independent brute-force oracles. Everything here
// is deliberately written as plain enumeration so it cannot share a failure
// mode with the dynamic-programming code under test.

#include <cmath>
#include <functional>
#include <vector>

#include "igl/env.hpp"
#include "igl/rng.hpp"

namespace igl::testing {

/// Policy value by full path enumeration: sums probability times terminal
/// reward over every (context, action sequence, state sequence) combination.
inline double path_enum_value(const Env& env, const TabularPolicy& policy,
                              const std::vector<std::vector<Vec>>& reward) {
    const auto& mdp = env.mdp;
    double total = 0.0;
    for (int x = 0; x < env.contexts.count(); ++x) {
        std::function<double(int, int, double)> walk =
            [&](int h, int s, double weight) -> double {
            double acc = 0.0;
            for (int a = 0; a < mdp.action_count; ++a) {
                double w = weight * policy.row(x, s)[a];
                if (w == 0.0) continue;
                if (h == mdp.horizon - 1) {
                    acc += w * reward[x][s][a];
                    continue;
                }
                const Vec& tr = mdp.transition[s][a];
                for (std::size_t i = 0; i < tr.size(); ++i)
                    if (tr[i] > 0.0)
                        acc += walk(h + 1, mdp.layers[h + 1][i], w * tr[i]);
            }
            return acc;
        };
        total += env.contexts.distribution[x] * walk(0, mdp.layers[0][0], 1.0);
    }
    return total;
}

inline double path_enum_value(const Env& env, const TabularPolicy& policy) {
    return path_enum_value(env, policy, env.feedback.reward_fn);
}

/// Best value over all deterministic context-wise policies, by exhaustive
/// enumeration (K^S per context). Only sane for tiny environments.
inline double best_deterministic_value(const Env& env) {
    const auto& mdp = env.mdp;
    const int S = mdp.state_count();
    const int K = mdp.action_count;
    double total = 0.0;
    for (int x = 0; x < env.contexts.count(); ++x) {
        long combos = 1;
        for (int s = 0; s < S; ++s) combos *= K;
        double best = -1.0;
        TabularPolicy pol;
        pol.rows.assign(env.contexts.count(),
                        std::vector<Vec>(S, Vec(K, 1.0 / K)));
        for (long code = 0; code < combos; ++code) {
            long rest = code;
            for (int s = 0; s < S; ++s) {
                pol.rows[x][s].assign(K, 0.0);
                pol.rows[x][s][rest % K] = 1.0;
                rest /= K;
            }
            // Evaluate only context x; fix other contexts to anything by
            // restricting the context distribution weighting below.
            Env single = env;
            single.contexts.labels = {env.contexts.labels[x]};
            single.contexts.distribution = {1.0};
            TabularPolicy proj;
            proj.rows = {pol.rows[x]};
            std::vector<std::vector<Vec>> reward = {env.feedback.reward_fn[x]};
            best = std::max(best, path_enum_value(single, proj, reward));
        }
        total += env.contexts.distribution[x] * best;
    }
    return total;
}

/// Random layered environment whose rewards respect the identifiability
/// constants (theta, M, c fixed; every (context, state) drawn heterogeneous
/// or homogeneous). The feedback channel uses a 4-symbol alphabet with two
/// symbols per reward bit so it can be noisy yet exactly decodable.
inline Env make_random_env(Rng& rng, const std::vector<int>& layer_sizes, int K,
                           double theta = 0.8, double M = 1.1, double c = 0.3,
                           double channel_noise = 0.35) {
    Env env;
    env.name = "random";
    auto& mdp = env.mdp;
    mdp.horizon = static_cast<int>(layer_sizes.size());
    mdp.action_count = K;
    int id = 0;
    for (int n : layer_sizes) {
        std::vector<int> layer;
        for (int i = 0; i < n; ++i) layer.push_back(id++);
        mdp.layers.push_back(layer);
    }
    const int S = id;
    for (int s = 0; s < S; ++s) env.state_labels.push_back("s" + std::to_string(s));
    for (int a = 0; a < K; ++a) env.action_labels.push_back("a" + std::to_string(a));

    mdp.transition.assign(S, {});
    for (int h = 0; h + 1 < mdp.horizon; ++h)
        for (int s : mdp.layers[h]) {
            mdp.transition[s].assign(K, Vec(layer_sizes[h + 1], 0.0));
            for (int a = 0; a < K; ++a) {
                double sum = 0.0;
                for (double& v : mdp.transition[s][a]) {
                    v = 0.05 + rng.uniform();
                    sum += v;
                }
                for (double& v : mdp.transition[s][a]) v /= sum;
            }
        }

    env.contexts.labels = {"ctx0", "ctx1"};
    double w = 0.3 + 0.4 * rng.uniform();
    env.contexts.distribution = {w, 1.0 - w};

    auto& fb = env.feedback;
    fb.alphabet_size = 4;
    fb.alphabet_labels = {"neg_a", "neg_b", "pos_a", "pos_b"};
    const int C = 2;
    fb.reward_fn.assign(C, std::vector<Vec>(S, Vec(K, 0.0)));
    for (int x = 0; x < C; ++x)
        for (int s : mdp.terminal_layer()) {
            if (rng.bernoulli(0.3)) {
                fb.reward_fn[x][s].assign(K, c);
            } else {
                int best = rng.uniform_int(K);
                double top = theta + rng.uniform() * (std::min(1.0, M * 0.99) - theta);
                double budget = (M * 0.99 - top) / std::max(1, K - 1);
                for (int a = 0; a < K; ++a)
                    fb.reward_fn[x][s][a] =
                        a == best ? top : rng.uniform() * budget;
            }
        }

    fb.decoder.assign(C, std::vector<std::vector<int>>(4, std::vector<int>(S, 0)));
    fb.channel.assign(C, std::vector<std::array<Vec, 2>>(
                             S, {Vec(4, 0.0), Vec(4, 0.0)}));
    for (int x = 0; x < C; ++x)
        for (int s = 0; s < S; ++s) {
            for (int y = 0; y < 4; ++y) fb.decoder[x][y][s] = y >= 2 ? 1 : 0;
            double q = 0.5 + (rng.uniform() - 0.5) * channel_noise;
            fb.channel[x][s][0] = {q, 1.0 - q, 0.0, 0.0};
            double q2 = 0.5 + (rng.uniform() - 0.5) * channel_noise;
            fb.channel[x][s][1] = {0.0, 0.0, q2, 1.0 - q2};
        }

    env.ident = {M, c, theta};
    env.validate();
    return env;
}

/// Random stochastic policy with full support.
inline TabularPolicy random_policy(const Env& env, Rng& rng) {
    TabularPolicy pol;
    pol.rows.assign(env.contexts.count(),
                    std::vector<Vec>(env.mdp.state_count(),
                                     Vec(env.mdp.action_count, 0.0)));
    for (auto& per_state : pol.rows)
        for (auto& row : per_state) {
            double sum = 0.0;
            for (double& v : row) {
                v = 0.02 + rng.uniform();
                sum += v;
            }
            for (double& v : row) v /= sum;
        }
    return pol;
}

} // namespace igl::testing
