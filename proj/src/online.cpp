#include "igl/online.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "igl/errors.hpp"

namespace igl {

TransitionCounts TransitionCounts::zeros(const LayeredMdp& mdp) {
    TransitionCounts counts;
    const int S = mdp.state_count();
    counts.visits.assign(S, std::vector<long long>(mdp.action_count, 0));
    counts.successors.assign(S, {});
    for (int s = 0; s < S; ++s)
        if (!mdp.is_terminal(s))
            counts.successors[s].assign(
                mdp.action_count,
                std::vector<long long>(mdp.layers[mdp.layer_of[s] + 1].size(), 0));
    return counts;
}

long long TransitionCounts::total_visits() const {
    long long total = 0;
    for (const auto& per_state : visits)
        for (long long v : per_state) total += v;
    return total;
}

void update_counts(TransitionCounts& counts, const LayeredMdp& mdp, const Trajectory& traj) {
    for (int h = 0; h + 1 < mdp.horizon; ++h) {
        int s = traj.states[h];
        int a = traj.actions[h];
        if (mdp.layer_of[traj.states[h + 1]] != h + 1)
            throw std::invalid_argument("trajectory is not layer-consistent");
        ++counts.visits[s][a];
        ++counts.successors[s][a][mdp.pos_in_layer[traj.states[h + 1]]];
    }
}

SmoothedTransition estimate_transition(const TransitionCounts& counts, const LayeredMdp& mdp) {
    SmoothedTransition est;
    est.rows.assign(mdp.state_count(), {});
    for (int s = 0; s < mdp.state_count(); ++s) {
        if (mdp.is_terminal(s)) continue;
        int next_size = static_cast<int>(mdp.layers[mdp.layer_of[s] + 1].size());
        est.rows[s].assign(mdp.action_count, Vec(next_size, 0.0));
        for (int a = 0; a < mdp.action_count; ++a) {
            double denom = static_cast<double>(counts.visits[s][a]) + next_size;
            for (int i = 0; i < next_size; ++i)
                est.rows[s][a][i] =
                    (static_cast<double>(counts.successors[s][a][i]) + 1.0) / denom;
        }
    }
    return est;
}

SequentialProduct sequential_product_identity(const std::vector<int>& outcomes,
                                              int successor_count) {
    if (successor_count < 1)
        throw std::invalid_argument("successor count must be positive");
    SequentialProduct out;
    std::vector<long long> n(successor_count, 0);
    long long seen = 0;
    for (int z : outcomes) {
        if (z < 0 || z >= successor_count)
            throw std::invalid_argument("outcome outside the successor range");
        out.sequential *= (static_cast<double>(n[z]) + 1.0) /
                          (static_cast<double>(seen) + successor_count);
        ++n[z];
        ++seen;
    }
    // (S'-1)! * prod_i n_i! / (S'+B-1)!
    auto factorial = [](long long k) {
        double f = 1.0;
        for (long long j = 2; j <= k; ++j) f *= static_cast<double>(j);
        return f;
    };
    double numer = factorial(successor_count - 1);
    for (long long ni : n) numer *= factorial(ni);
    out.closed_form = numer / factorial(successor_count + seen - 1);
    return out;
}

double logloss_regret(const LayeredMdp& mdp, const std::vector<Trajectory>& stream) {
    TransitionCounts counts = TransitionCounts::zeros(mdp);
    double regret = 0.0;
    for (const Trajectory& traj : stream) {
        SmoothedTransition est = estimate_transition(counts, mdp);
        for (int h = 0; h + 1 < mdp.horizon; ++h) {
            int s = traj.states[h];
            int a = traj.actions[h];
            int next = mdp.pos_in_layer[traj.states[h + 1]];
            double truth = mdp.transition[s][a][next];
            if (truth <= 0.0)
                throw NumericalError(
                    "observed transition has zero probability under the true kernel");
            regret += -std::log(est.rows[s][a][next]) + std::log(truth);
        }
        update_counts(counts, mdp, traj);
    }
    return regret;
}

double logloss_regret_bound(int S, int K, int H, long long T) {
    return static_cast<double>(S) * S * K *
           std::log(static_cast<double>(T) * H + S);
}

AggregationOracle::AggregationOracle(std::vector<RewardCandidate> candidates, double eta)
    : candidates_(std::move(candidates)), eta_(eta) {
    if (candidates_.empty())
        throw std::invalid_argument("aggregation needs at least one candidate");
    weights_.assign(candidates_.size(), 1.0 / static_cast<double>(candidates_.size()));
}

double AggregationOracle::predict(int context, int state, int action) const {
    double out = 0.0;
    for (std::size_t i = 0; i < candidates_.size(); ++i)
        out += weights_[i] * candidates_[i].table[context][state][action];
    return std::clamp(out, 0.0, 1.0);
}

void AggregationOracle::update(int context, int state, int action, double target) {
    if (!(target >= 0.0 && target <= 1.0))
        throw std::invalid_argument("regression target must lie in [0,1]");
    double total = 0.0;
    for (std::size_t i = 0; i < candidates_.size(); ++i) {
        double diff = candidates_[i].table[context][state][action] - target;
        weights_[i] *= std::exp(-eta_ * diff * diff);
        total += weights_[i];
    }
    for (double& w : weights_) w /= total;
}

std::unique_ptr<RegressionOracle> AggregationOracle::clone() const {
    return std::make_unique<AggregationOracle>(*this);
}

OgdOracle::OgdOracle(int contexts, int states, int actions, double learning_rate,
                     double initial)
    : learning_rate_(learning_rate) {
    table_.assign(contexts, std::vector<Vec>(states, Vec(actions, initial)));
}

double OgdOracle::predict(int context, int state, int action) const {
    return table_[context][state][action];
}

void OgdOracle::update(int context, int state, int action, double target) {
    if (!(target >= 0.0 && target <= 1.0))
        throw std::invalid_argument("regression target must lie in [0,1]");
    double& theta = table_[context][state][action];
    theta -= learning_rate_ * 2.0 * (theta - target);
    theta = std::clamp(theta, 0.0, 1.0);
}

std::unique_ptr<RegressionOracle> OgdOracle::clone() const {
    return std::make_unique<OgdOracle>(*this);
}

namespace {

struct Layout {
    std::vector<int> layer_offset; // variable offset of each layer
    int variables = 0;
    int constraints = 0;
};

Layout make_layout(const LayeredMdp& mdp) {
    Layout lay;
    lay.layer_offset.resize(mdp.horizon);
    int offset = 0;
    for (int h = 0; h < mdp.horizon; ++h) {
        lay.layer_offset[h] = offset;
        offset += static_cast<int>(mdp.layers[h].size()) * mdp.action_count;
    }
    lay.variables = offset;
    lay.constraints = 1;
    for (int h = 1; h < mdp.horizon; ++h)
        lay.constraints += static_cast<int>(mdp.layers[h].size());
    return lay;
}

int var_index(const Layout& lay, const LayeredMdp& mdp, int h, int pos, int a) {
    return lay.layer_offset[h] + pos * mdp.action_count + a;
}

// Constraint matrix of the occupancy polytope: start mass plus one flow row
// per non-initial state.
Eigen::MatrixXd constraint_matrix(const LayeredMdp& mdp, const SmoothedTransition& kernel,
                                  const Layout& lay) {
    const int K = mdp.action_count;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(lay.constraints, lay.variables);
    for (int a = 0; a < K; ++a) A(0, var_index(lay, mdp, 0, 0, a)) = 1.0;
    int row = 1;
    for (int h = 1; h < mdp.horizon; ++h)
        for (int j = 0; j < static_cast<int>(mdp.layers[h].size()); ++j, ++row) {
            for (int a = 0; a < K; ++a) A(row, var_index(lay, mdp, h, j, a)) = 1.0;
            for (int i = 0; i < static_cast<int>(mdp.layers[h - 1].size()); ++i) {
                int s = mdp.layers[h - 1][i];
                for (int a = 0; a < K; ++a)
                    A(row, var_index(lay, mdp, h - 1, i, a)) = -kernel.rows[s][a][j];
            }
        }
    return A;
}

Eigen::VectorXd flatten_reward(const LayeredMdp& mdp, const std::vector<Vec>& reward,
                               const Layout& lay) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(lay.variables);
    for (int h = 0; h < mdp.horizon; ++h)
        for (int pos = 0; pos < static_cast<int>(mdp.layers[h].size()); ++pos) {
            int s = mdp.layers[h][pos];
            for (int a = 0; a < mdp.action_count; ++a)
                c(var_index(lay, mdp, h, pos, a)) = reward[s][a];
        }
    return c;
}

OccupancyMeasure unflatten(const LayeredMdp& mdp, const Layout& lay,
                           const Eigen::VectorXd& x) {
    OccupancyMeasure q;
    q.q.resize(mdp.horizon);
    for (int h = 0; h < mdp.horizon; ++h) {
        q.q[h].assign(mdp.layers[h].size(), Vec(mdp.action_count, 0.0));
        for (int pos = 0; pos < static_cast<int>(mdp.layers[h].size()); ++pos)
            for (int a = 0; a < mdp.action_count; ++a)
                q.q[h][pos][a] = x(var_index(lay, mdp, h, pos, a));
    }
    return q;
}

} // namespace

OccupancyMeasure occupancy_of_policy(const LayeredMdp& mdp, const SmoothedTransition& kernel,
                                     const std::vector<Vec>& policy_rows) {
    OccupancyMeasure out;
    out.q.resize(mdp.horizon);
    std::vector<double> dist{1.0};
    for (int h = 0; h < mdp.horizon; ++h) {
        const auto& layer = mdp.layers[h];
        out.q[h].assign(layer.size(), Vec(mdp.action_count, 0.0));
        for (int pos = 0; pos < static_cast<int>(layer.size()); ++pos)
            for (int a = 0; a < mdp.action_count; ++a)
                out.q[h][pos][a] = dist[pos] * policy_rows[layer[pos]][a];
        if (h + 1 < mdp.horizon) {
            std::vector<double> next(mdp.layers[h + 1].size(), 0.0);
            for (int pos = 0; pos < static_cast<int>(layer.size()); ++pos) {
                int s = layer[pos];
                for (int a = 0; a < mdp.action_count; ++a) {
                    double w = out.q[h][pos][a];
                    const Vec& row = kernel.rows[s][a];
                    for (std::size_t j = 0; j < next.size(); ++j) next[j] += w * row[j];
                }
            }
            dist.swap(next);
        }
    }
    return out;
}

double occupancy_objective(const LayeredMdp& mdp, const std::vector<Vec>& reward,
                           double gamma, const OccupancyMeasure& q) {
    double obj = 0.0;
    for (int h = 0; h < mdp.horizon; ++h)
        for (int pos = 0; pos < static_cast<int>(mdp.layers[h].size()); ++pos) {
            int s = mdp.layers[h][pos];
            for (int a = 0; a < mdp.action_count; ++a) {
                double v = q.q[h][pos][a];
                obj += v * reward[s][a] + std::log(v) / gamma;
            }
        }
    return obj;
}

double flow_residual(const LayeredMdp& mdp, const SmoothedTransition& kernel,
                     const OccupancyMeasure& q) {
    double worst = 0.0;
    double start = 0.0;
    for (double v : q.q[0][0]) start += v;
    worst = std::abs(start - 1.0);
    for (int h = 1; h < mdp.horizon; ++h)
        for (int j = 0; j < static_cast<int>(mdp.layers[h].size()); ++j) {
            double inflow = 0.0;
            for (int i = 0; i < static_cast<int>(mdp.layers[h - 1].size()); ++i) {
                int s = mdp.layers[h - 1][i];
                for (int a = 0; a < mdp.action_count; ++a)
                    inflow += q.q[h - 1][i][a] * kernel.rows[s][a][j];
            }
            double mass = 0.0;
            for (double v : q.q[h][j]) mass += v;
            worst = std::max(worst, std::abs(mass - inflow));
        }
    return worst;
}

OccupancyMeasure solve_occupancy(const LayeredMdp& mdp, const SmoothedTransition& kernel,
                                 const std::vector<Vec>& reward, double gamma,
                                 const OccupancySolverOptions& opt) {
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
    Layout lay = make_layout(mdp);
    Eigen::MatrixXd A = constraint_matrix(mdp, kernel, lay);
    Eigen::VectorXd c = flatten_reward(mdp, reward, lay);

    // Strictly feasible start: the uniform-policy occupancy.
    std::vector<Vec> uniform_rows(mdp.state_count(),
                                  Vec(mdp.action_count, 1.0 / mdp.action_count));
    OccupancyMeasure init = occupancy_of_policy(mdp, kernel, uniform_rows);
    Eigen::VectorXd x(lay.variables);
    for (int h = 0; h < mdp.horizon; ++h)
        for (int pos = 0; pos < static_cast<int>(mdp.layers[h].size()); ++pos)
            for (int a = 0; a < mdp.action_count; ++a)
                x(var_index(lay, mdp, h, pos, a)) = init.q[h][pos][a];

    auto objective = [&](const Eigen::VectorXd& v) {
        double obj = 0.0;
        for (int i = 0; i < lay.variables; ++i) obj += v(i) * c(i) + std::log(v(i)) / gamma;
        return obj;
    };

    bool converged = false;
    int iterations = 0;
    double decrement = 0.0;
    for (int iter = 0; iter < opt.max_iterations && !converged; ++iter) {
        iterations = iter + 1;
        Eigen::VectorXd g(lay.variables), dinv(lay.variables);
        for (int i = 0; i < lay.variables; ++i) {
            g(i) = c(i) + 1.0 / (gamma * x(i));
            dinv(i) = gamma * x(i) * x(i); // inverse Hessian diagonal
        }
        // Null-space Newton step via the Schur complement A D^-1 A^T.
        Eigen::MatrixXd schur = A * dinv.asDiagonal() * A.transpose();
        Eigen::VectorXd rhs = -A * (dinv.asDiagonal() * g);
        Eigen::VectorXd nu = schur.ldlt().solve(rhs);
        Eigen::VectorXd step = dinv.asDiagonal() * (g + A.transpose() * nu);

        double lambda_sq = 0.0;
        for (int i = 0; i < lay.variables; ++i)
            lambda_sq += step(i) * step(i) / dinv(i);
        decrement = std::sqrt(std::max(0.0, lambda_sq));
        if (decrement <= opt.decrement_tol) {
            converged = true;
            break;
        }

        // Largest step keeping the iterate interior, shrunk slightly.
        double t_max = 1.0 / 0.99;
        for (int i = 0; i < lay.variables; ++i)
            if (step(i) < 0.0) t_max = std::min(t_max, -x(i) / step(i));
        double t = std::min(1.0, 0.99 * t_max);

        if (decrement > 0.25) {
            // Damped phase: backtrack on the objective. Inside the quadratic
            // basin the full step is taken as is; objective comparisons there
            // sit below double granularity and would stall the search.
            double base = objective(x);
            double slope = g.dot(step);
            int backtracks = 0;
            while (objective(x + t * step) < base + 0.25 * t * slope && backtracks < 80) {
                t *= 0.5;
                ++backtracks;
            }
            if (backtracks >= 80)
                throw NumericalError(
                    "occupancy line search failed in the damped phase; "
                    "Newton decrement = " +
                    std::to_string(decrement));
        }
        x += t * step;
    }

    if (!converged)
        throw NumericalError("occupancy solver did not reach the decrement tolerance; "
                             "last Newton decrement = " +
                             std::to_string(decrement));

    OccupancyMeasure out = unflatten(mdp, lay, x);
    out.objective = objective(x);
    out.newton_iterations = iterations;
    out.newton_decrement = decrement;
    return out;
}

double occupancy_kkt_residual(const LayeredMdp& mdp, const SmoothedTransition& kernel,
                              const std::vector<Vec>& reward, double gamma,
                              const OccupancyMeasure& q) {
    Layout lay = make_layout(mdp);
    Eigen::MatrixXd A = constraint_matrix(mdp, kernel, lay);
    Eigen::VectorXd c = flatten_reward(mdp, reward, lay);
    Eigen::VectorXd g(lay.variables);
    for (int h = 0; h < mdp.horizon; ++h)
        for (int pos = 0; pos < static_cast<int>(mdp.layers[h].size()); ++pos)
            for (int a = 0; a < mdp.action_count; ++a) {
                int i = var_index(lay, mdp, h, pos, a);
                g(i) = c(i) + 1.0 / (gamma * q.q[h][pos][a]);
            }
    // Project out the row space of A: g - A^T (A A^T)^-1 A g.
    Eigen::VectorXd mult = (A * A.transpose()).ldlt().solve(A * g);
    return (g - A.transpose() * mult).norm();
}

std::vector<Vec> extract_policy(const LayeredMdp& mdp, const OccupancyMeasure& q) {
    std::vector<Vec> rows(mdp.state_count(), Vec(mdp.action_count, 0.0));
    for (int h = 0; h < mdp.horizon; ++h)
        for (int pos = 0; pos < static_cast<int>(mdp.layers[h].size()); ++pos) {
            double mass = 0.0;
            for (double v : q.q[h][pos]) mass += v;
            if (!(mass > 0.0))
                throw NumericalError("occupancy row with nonpositive mass; "
                                     "barrier solutions must be interior");
            for (int a = 0; a < mdp.action_count; ++a)
                rows[mdp.layers[h][pos]][a] = q.q[h][pos][a] / mass;
        }
    return rows;
}

std::optional<double> proxy_reward(const FittedDecoder& decoder,
                                   const IdentifiabilityConstants& cst, int context,
                                   int symbol, int terminal_state, int action,
                                   const ReachableSet& reachable) {
    if (!reachable.contains(terminal_state)) return std::nullopt;
    auto it = decoder.by_state.find(terminal_state);
    if (it == decoder.by_state.end()) return std::nullopt;
    return decode_reward(it->second.at(context, symbol), action, cst);
}

double GammaSchedule::value(int H, int K, long long t) const {
    switch (mode) {
        case Mode::HSqrtKT:
            return static_cast<double>(H) * std::sqrt(static_cast<double>(K) * t);
        case Mode::Constant:
            return constant;
    }
    return constant;
}

OnlineResult run_online_loop(const Env& env, const ReachableSet& reachable,
                             const FittedDecoder& decoder,
                             const IdentifiabilityConstants& cst, RegressionOracle& oracle,
                             const GammaSchedule& gamma, long long episodes, Rng& rng,
                             std::vector<EpisodeMetric>& metrics,
                             const TransitionCounts* warm_start) {
    if (episodes < 1) throw std::invalid_argument("online episode budget must be >= 1");
    const auto& mdp = env.mdp;
    const int C = env.contexts.count();
    const int S = mdp.state_count();
    const int K = mdp.action_count;

    OnlineResult result;
    result.counts = warm_start ? *warm_start : TransitionCounts::zeros(mdp);
    result.optimal_value = optimal_value(env).value;

    double cumulative_regret = metrics.empty() ? 0.0 : metrics.back().cumulative_regret;
    std::vector<Vec> reward(S, Vec(K, 0.0));

    for (long long t = 1; t <= episodes; ++t) {
        double gamma_t = gamma.value(mdp.horizon, K, t);
        if (!(gamma_t > 0.0)) throw std::invalid_argument("gamma schedule must be positive");
        SmoothedTransition kernel = estimate_transition(result.counts, mdp);

        // One occupancy solve per context (memoized within the episode by
        // construction); the full policy is kept for exact evaluation.
        TabularPolicy policy;
        policy.rows.assign(C, std::vector<Vec>(S, Vec(K, 0.0)));
        for (int x = 0; x < C; ++x) {
            for (int s : mdp.terminal_layer())
                for (int a = 0; a < K; ++a)
                    reward[s][a] = std::clamp(oracle.predict(x, s, a), 0.0, 1.0);
            OccupancyMeasure q = solve_occupancy(mdp, kernel, reward, gamma_t);
            policy.rows[x] = extract_policy(mdp, q);
        }

        Trajectory traj = sample_episode(env, policy, rng);
        int s_H = traj.states.back();
        int a_H = traj.actions.back();
        std::optional<double> decoded =
            proxy_reward(decoder, cst, traj.context, traj.feedback, s_H, a_H, reachable);
        if (decoded) {
            oracle.update(traj.context, s_H, a_H, *decoded);
            ++result.oracle_updates;
        }
        update_counts(result.counts, mdp, traj);

        EpisodeMetric metric;
        metric.episode = t;
        metric.context = traj.context;
        metric.terminal_state = s_H;
        metric.true_reward = traj.reward;
        metric.decoded_reward = decoded;
        metric.policy_value = exact_value(env, policy);
        cumulative_regret += result.optimal_value - metric.policy_value;
        metric.cumulative_regret = cumulative_regret;
        metrics.push_back(metric);
    }
    return result;
}

TheoryParams compute_theory_params(double T, double S, double K, double H, double L,
                                   double reg_sq) {
    if (!(T > 0 && S > 0 && K > 0 && H > 0 && L > 0 && reg_sq > 0))
        throw std::invalid_argument("theory parameters must be positive");
    TheoryParams p;
    double g1 = std::sqrt(T * S * K * H / reg_sq);
    double g2 = std::sqrt(T / (S * K * H * H * H));
    double g3 = std::pow(T, 0.25) * std::pow(S, 0.25) * std::sqrt(K) *
                std::pow(L, -0.5) * std::pow(H, 0.75);
    p.gamma = std::min({g1, g2, g3});

    double n1 = L * std::sqrt(T * K * H) / S;
    double n2 = std::pow(p.gamma, 2.0 / 3.0) * std::pow(T, 1.0 / 3.0) *
                std::pow(S, -2.0 / 3.0) * std::pow(K, 2.0 / 3.0) * std::pow(L, 4.0 / 3.0);
    p.n0 = std::max(n1, n2);

    double e1 = std::sqrt(p.n0 / T);
    double e2 = std::pow(T, -1.0 / 3.0) * std::pow(S, 1.0 / 3.0) * std::pow(K, 1.0 / 3.0) *
                std::pow(H, 1.0 / 3.0);
    p.epsilon = std::max(e1, e2);
    return p;
}

} // namespace igl
