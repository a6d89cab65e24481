#include "igl/verification.hpp"

#include <cmath>
#include <sstream>

#include "igl/decoder.hpp"
#include "igl/harness.hpp"
#include "igl/online.hpp"

namespace igl {

namespace {

Vec random_simplex(int k, Rng& rng) {
    Vec v(k);
    double sum = 0.0;
    for (double& x : v) {
        x = -std::log(1.0 - rng.uniform() + 1e-300);
        sum += x;
    }
    for (double& x : v) x /= sum;
    return v;
}

} // namespace

CheckResult check_dirichlet_identity(long long sequences, Rng& rng) {
    CheckResult result;
    result.name = "dirichlet-product-identity";
    double worst = 0.0;
    for (long long i = 0; i < sequences; ++i) {
        int sprime = 1 + rng.uniform_int(5);
        int b = rng.uniform_int(51);
        std::vector<int> seq(b);
        for (int& z : seq) z = rng.uniform_int(sprime);
        SequentialProduct p = sequential_product_identity(seq, sprime);
        worst = std::max(worst, std::abs(p.sequential - p.closed_form) /
                                    std::abs(p.closed_form));
    }
    result.pass = worst <= 1e-12;
    std::ostringstream detail;
    detail << sequences << " sequences, worst relative error " << worst;
    result.detail = detail.str();
    return result;
}

CheckResult check_lipschitz(long long pairs_per_set, Rng& rng) {
    CheckResult result;
    result.name = "lipschitz-surrogate";
    const std::vector<IdentifiabilityConstants> sets = {
        derive_constants(5, 1.3, 0.0, 0.9), derive_constants(3, 1.0, 0.2, 0.6)};
    double worst_excess = -1.0;
    for (const auto& cst : sets) {
        for (long long i = 0; i < pairs_per_set; ++i) {
            Vec v = random_simplex(cst.K, rng);
            Vec w;
            if (i % 2 == 0) {
                w = random_simplex(cst.K, rng);
            } else {
                w = v;
                int from = rng.uniform_int(cst.K), to = rng.uniform_int(cst.K);
                double t = std::min(w[from], 0.2 * rng.uniform());
                w[from] -= t;
                w[to] += t;
            }
            double dist = 0.0;
            for (int j = 0; j < cst.K; ++j) dist = std::max(dist, std::abs(v[j] - w[j]));
            int a = rng.uniform_int(cst.K);
            double gap = std::abs(decode_reward(v, a, cst) - decode_reward(w, a, cst)) -
                         cst.L * dist;
            worst_excess = std::max(worst_excess, gap);
        }
    }
    result.pass = worst_excess <= 1e-9;
    std::ostringstream detail;
    detail << 2 * pairs_per_set << " pairs, worst |dJ| - L*dist = " << worst_excess;
    result.detail = detail.str();
    return result;
}

CheckResult check_posterior_monte_carlo(const Env& env, long long samples,
                                        double tolerance, Rng& rng) {
    CheckResult result;
    result.name = "posterior-monte-carlo";
    double worst = 0.0;
    for (int s : env.mdp.terminal_layer()) {
        PosteriorTable table = monte_carlo_posterior(env, s, samples, rng);
        for (int x = 0; x < env.contexts.count(); ++x)
            for (int y = 0; y < env.feedback.alphabet_size; ++y) {
                if (table.cell_counts[x][y] == 0) continue;
                Vec truth = true_posterior(env, x, y, s);
                for (int a = 0; a < env.mdp.action_count; ++a)
                    worst = std::max(worst,
                                     std::abs(table.frequency[x][y][a] - truth[a]));
            }
    }
    result.pass = worst <= tolerance;
    std::ostringstream detail;
    detail << samples << " samples per state, worst |freq - posterior| = " << worst;
    result.detail = detail.str();
    return result;
}

CheckResult check_logloss_bound(int mdps, long long episodes, Rng& rng) {
    CheckResult result;
    result.name = "logloss-regret-bound";
    double worst_margin = 1e300; // bound minus measured, want > 0
    for (int trial = 0; trial < mdps; ++trial) {
        int H = 2 + rng.uniform_int(3); // <= 4
        std::vector<int> sizes{1};
        int budget = 7; // total states <= 8
        for (int h = 1; h < H; ++h) {
            int most = budget - (H - 1 - h);
            int n = 1 + rng.uniform_int(std::min(3, most));
            sizes.push_back(n);
            budget -= n;
        }
        int K = 2 + rng.uniform_int(3); // <= 4

        LayeredMdp mdp;
        mdp.horizon = H;
        mdp.action_count = K;
        int id = 0;
        for (int n : sizes) {
            std::vector<int> layer;
            for (int i = 0; i < n; ++i) layer.push_back(id++);
            mdp.layers.push_back(layer);
        }
        mdp.transition.assign(id, {});
        for (int h = 0; h + 1 < H; ++h)
            for (int s : mdp.layers[h]) {
                mdp.transition[s].assign(K, Vec(sizes[h + 1], 0.0));
                for (int a = 0; a < K; ++a) {
                    double sum = 0.0;
                    for (double& v : mdp.transition[s][a]) {
                        v = 0.05 + rng.uniform();
                        sum += v;
                    }
                    for (double& v : mdp.transition[s][a]) v /= sum;
                }
            }
        mdp.index_layers();

        // Uniform-policy trajectory stream.
        std::vector<Trajectory> stream;
        stream.reserve(episodes);
        for (long long e = 0; e < episodes; ++e) {
            Trajectory t;
            int s = 0;
            for (int h = 0; h < H; ++h) {
                int a = rng.uniform_int(K);
                t.states.push_back(s);
                t.actions.push_back(a);
                if (h + 1 < H)
                    s = mdp.layers[h + 1][rng.categorical(mdp.transition[s][a])];
            }
            stream.push_back(std::move(t));
        }
        double measured = logloss_regret(mdp, stream);
        double bound = logloss_regret_bound(id, K, H, episodes);
        worst_margin = std::min(worst_margin, bound - measured);
    }
    result.pass = worst_margin >= 0.0;
    std::ostringstream detail;
    detail << mdps << " random MDPs, smallest bound margin " << worst_margin;
    result.detail = detail.str();
    return result;
}

std::vector<CheckResult> run_all_checks(Rng& rng) {
    std::vector<CheckResult> results;
    Rng r1 = rng.split("dirichlet");
    results.push_back(check_dirichlet_identity(10000, r1));
    Rng r2 = rng.split("lipschitz");
    results.push_back(check_lipschitz(100000, r2));
    Rng r3 = rng.split("posterior");
    Env env = build_synthetic_env(0.1, 0.1);
    results.push_back(check_posterior_monte_carlo(env, 1000000, 0.01, r3));
    Rng r4 = rng.split("logloss");
    results.push_back(check_logloss_bound(20, 10000, r4));
    return results;
}

} // namespace igl
