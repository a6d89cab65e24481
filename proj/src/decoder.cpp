#include "igl/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "igl/errors.hpp"

namespace igl {

namespace {

constexpr double kDegenerateTol = 1e-12;

// Compensated summation. The reward sum feeds a denominator that is compared
// against the known constant M through the ramp threshold; a naive
// accumulation drifts a couple of ulps and breaks the exact-equality cases.
double neumaier_sum(const Vec& values) {
    double sum = 0.0, comp = 0.0;
    for (double v : values) {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            comp += (sum - t) + v;
        else
            comp += (v - t) + sum;
        sum = t;
    }
    return sum + comp;
}

} // namespace

IdentifiabilityConstants derive_constants(int K, double M, double c, double theta) {
    if (K < 2) throw EnvSpecError("identifiability needs at least two actions");
    if (!(M > 0.0 && M < K / 2.0))
        throw EnvSpecError("identifiability violation: need 0 < M < K/2");
    if (!(theta > 0.0 && theta < 1.0))
        throw EnvSpecError("identifiability violation: need theta in (0,1)");
    if (c < 0.0 || c > 1.0) throw EnvSpecError("homogeneous constant c must lie in [0,1]");
    double sigma = theta * (K - M) / M;
    if (!(sigma > 1.0))
        throw EnvSpecError("identifiability violation: sigma = theta(K-M)/M must exceed 1");

    IdentifiabilityConstants cst;
    cst.K = K;
    cst.M = M;
    cst.c = c;
    cst.theta = theta;
    cst.kappa = (K * theta - M) / (K * (K - M));
    cst.xi = 0.5 * (theta / M - 1.0 / (K - M));
    cst.L = 4.0 / cst.kappa + 1.0 / cst.xi;
    return cst;
}

IdentifiabilityConstants constants_of(const Env& env) {
    return derive_constants(env.mdp.action_count, env.ident.M, env.ident.c,
                            env.ident.theta);
}

double ramp(double alpha, double beta, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("ramp width must be positive");
    if (alpha >= beta + lambda) return 1.0;
    if (alpha < beta) return 0.0;
    return (alpha - beta) / lambda;
}

double decode_reward(const Vec& v, int action, const IdentifiabilityConstants& cst) {
    double delta = 0.0;
    for (double x : v) delta = std::max(delta, std::abs(x - 1.0 / cst.K));
    double g = ramp(v[action], cst.theta / cst.M - cst.xi, cst.xi);
    if (delta <= cst.kappa / 2.0) return cst.c;
    if (delta >= cst.kappa) return g;
    return (2.0 * cst.c * (cst.kappa - delta) + (2.0 * delta - cst.kappa) * g) / cst.kappa;
}

Vec true_posterior(const Env& env, int context, int symbol, int terminal_state) {
    if (!env.mdp.is_terminal(terminal_state))
        throw std::invalid_argument("posterior is defined at terminal states only");
    const int K = env.mdp.action_count;
    const Vec& f = env.feedback.reward_fn[context][terminal_state];
    int phi = env.feedback.decoder[context][symbol][terminal_state];
    double q = neumaier_sum(f);

    Vec h(K, 0.0);
    if (phi == 1) {
        if (q <= kDegenerateTol)
            throw std::domain_error(
                "zero-probability conditioning: phi* = 1 with sum f* = 0");
        for (int a = 0; a < K; ++a) h[a] = f[a] / q;
    } else {
        if (q >= K - kDegenerateTol)
            throw std::domain_error(
                "zero-probability conditioning: phi* = 0 with sum f* = K");
        for (int a = 0; a < K; ++a) h[a] = (1.0 - f[a]) / (K - q);
    }
    return h;
}

std::string dataset_to_text(const TupleDataset& dataset) {
    std::ostringstream out;
    for (const TupleRecord& r : dataset.records)
        out << r.context << ' ' << r.state << ' ' << r.action << ' ' << r.feedback
            << '\n';
    return out.str();
}

TupleDataset dataset_from_text(const std::string& text) {
    TupleDataset dataset;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        TupleRecord r;
        if (!(row >> r.context >> r.state >> r.action >> r.feedback))
            throw IoError("malformed tuple record: " + line);
        dataset.records.push_back(r);
    }
    if (!dataset.records.empty()) dataset.state = dataset.records.front().state;
    return dataset;
}

std::vector<TupleDataset> collect_tuples(const Env& env, const ReachableSet& reachable,
                                         const std::vector<HomingPolicy>& homing,
                                         long long tuples_per_state, double delta,
                                         Rng& rng) {
    if (reachable.states.size() != homing.size())
        throw std::invalid_argument("one homing policy per reachable state");
    if (!reachable.empty() && tuples_per_state < 1)
        throw std::invalid_argument("tuple budget must be >= 1");

    const double cap_raw =
        (20.0 / reachable.epsilon) *
        (static_cast<double>(tuples_per_state) +
         std::log(static_cast<double>(env.mdp.state_count()) / delta));
    const long long cap = static_cast<long long>(std::ceil(cap_raw));

    std::vector<TupleDataset> datasets;
    for (std::size_t i = 0; i < reachable.states.size(); ++i) {
        int target = reachable.states[i];
        if (homing[i].target != target)
            throw std::invalid_argument("homing policy order must match the reachable set");
        TupleDataset data;
        data.state = target;
        data.records.reserve(tuples_per_state);
        while (static_cast<long long>(data.records.size()) < tuples_per_state) {
            if (data.episodes_consumed >= cap)
                throw NumericalError(
                    "tuple collection for state " + env.state_labels[target] +
                    " exceeded its episode cap (" + std::to_string(cap) +
                    "); the reachable set looks wrong");
            Trajectory traj = homing[i].sample_episode(env, rng);
            ++data.episodes_consumed;
            if (traj.states.back() != target) continue;
            data.records.push_back(TupleRecord{traj.context, target,
                                               traj.actions.back(), traj.feedback});
        }
        datasets.push_back(std::move(data));
    }
    return datasets;
}

StateHypothesisClass build_hypothesis_class(int state, int n_contexts, int n_symbols,
                                            int n_actions,
                                            const std::vector<RewardCandidate>& rewards,
                                            const std::vector<DecoderCandidate>& decoders) {
    if (rewards.empty() || decoders.empty())
        throw std::invalid_argument("hypothesis class factors must be nonempty");

    StateHypothesisClass cls;
    cls.state = state;
    cls.reward_count = static_cast<int>(rewards.size());
    cls.decoder_count = static_cast<int>(decoders.size());
    cls.hypotheses.reserve(rewards.size() * decoders.size());

    for (int ri = 0; ri < cls.reward_count; ++ri)
        for (int di = 0; di < cls.decoder_count; ++di) {
            PosteriorHypothesis hyp;
            hyp.state = state;
            hyp.reward_index = ri;
            hyp.decoder_index = di;
            hyp.table.assign(n_contexts, std::vector<Vec>(n_symbols, Vec(n_actions, 0.0)));
            for (int x = 0; x < n_contexts; ++x) {
                const Vec& f = rewards[ri].table[x][state];
                double q = neumaier_sum(f);
                for (int y = 0; y < n_symbols; ++y) {
                    int phi = decoders[di].bit[x][y];
                    Vec& row = hyp.table[x][y];
                    if (phi == 1) {
                        if (q <= kDegenerateTol)
                            row.assign(n_actions, 1.0 / n_actions);
                        else
                            for (int a = 0; a < n_actions; ++a) row[a] = f[a] / q;
                    } else {
                        if (q >= n_actions - kDegenerateTol)
                            row.assign(n_actions, 1.0 / n_actions);
                        else
                            for (int a = 0; a < n_actions; ++a)
                                row[a] = (1.0 - f[a]) / (n_actions - q);
                    }
                }
            }
            cls.hypotheses.push_back(std::move(hyp));
        }
    return cls;
}

ErmFit erm_fit(const TupleDataset& dataset, const StateHypothesisClass& cls) {
    if (dataset.records.empty()) throw std::invalid_argument("ERM needs a nonempty dataset");
    if (cls.hypotheses.empty()) throw std::invalid_argument("ERM needs a nonempty class");

    ErmFit best;
    for (int i = 0; i < cls.size(); ++i) {
        const PosteriorHypothesis& hyp = cls.hypotheses[i];
        double loss = 0.0;
        for (const TupleRecord& r : dataset.records) {
            const Vec& row = hyp.at(r.context, r.feedback);
            for (int a = 0; a < static_cast<int>(row.size()); ++a) {
                double diff = row[a] - (a == r.action ? 1.0 : 0.0);
                loss += diff * diff;
            }
        }
        if (best.hypothesis_index < 0 || loss < best.empirical_loss) {
            best.hypothesis_index = i;
            best.empirical_loss = loss;
        }
    }
    return best;
}

std::vector<std::vector<Vec>> decoder_lower_bound_table(const Env& env,
                                                        const IdentifiabilityConstants& cst) {
    const int C = env.contexts.count();
    const int K = env.mdp.action_count;
    const int Y = env.feedback.alphabet_size;
    std::vector<std::vector<Vec>> table(C, std::vector<Vec>(env.mdp.state_count(),
                                                            Vec(K, 0.0)));
    for (int x = 0; x < C; ++x)
        for (int s : env.mdp.terminal_layer())
            for (int a = 0; a < K; ++a) {
                const Vec& f = env.feedback.reward_fn[x][s];
                double expect = 0.0;
                for (int r = 0; r < 2; ++r) {
                    double pr = r == 1 ? f[a] : 1.0 - f[a];
                    if (pr == 0.0) continue;
                    for (int y = 0; y < Y; ++y) {
                        double py = env.feedback.channel[x][s][r][y];
                        if (py == 0.0) continue;
                        expect += pr * py *
                                  decode_reward(true_posterior(env, x, y, s), a, cst);
                    }
                }
                table[x][s][a] = expect;
            }
    return table;
}

CandidateClasses build_synthetic_classes(const Env& env, const SyntheticClassOptions& opt) {
    const int C = env.contexts.count();
    const int K = env.mdp.action_count;
    const int Y = env.feedback.alphabet_size;
    const auto& terminal = env.mdp.terminal_layer();

    CandidateClasses out;

    RewardCandidate truth{"truth", env.feedback.reward_fn};
    out.rewards.push_back(truth);

    // Reward mass moved to the second action at every heterogeneous state.
    RewardCandidate permuted{"permuted", env.feedback.reward_fn};
    for (int x = 0; x < C; ++x)
        for (int s : terminal)
            if (env.is_heterogeneous(x, s))
                std::swap(permuted.table[x][s][0], permuted.table[x][s][1]);
    out.rewards.push_back(permuted);

    // The decoder-induced lower bound: expected surrogate reward under the
    // true posterior. For the context-flip benchmark this keeps only the
    // argmax action's mass.
    IdentifiabilityConstants cst = constants_of(env);
    out.rewards.push_back(
        RewardCandidate{"decoded-lower-bound", decoder_lower_bound_table(env, cst)});

    // Near-truth perturbation shell on the heterogeneous rows: +/- scale
    // patterns indexed by the bits of j. Small enough to confuse tiny sample
    // sizes, large enough that honest budgets separate them.
    for (int j = 1; j <= opt.near_distractors; ++j) {
        RewardCandidate near{"near-" + std::to_string(j), env.feedback.reward_fn};
        for (int x = 0; x < C; ++x)
            for (int s : terminal) {
                if (!env.is_heterogeneous(x, s)) continue;
                for (int a = 0; a < K; ++a) {
                    double sign = ((j >> (a % 16)) & 1) ? 1.0 : -1.0;
                    double v = near.table[x][s][a] + sign * opt.near_scale;
                    near.table[x][s][a] = std::clamp(v, 0.0, 1.0);
                }
            }
        out.rewards.push_back(near);
    }

    // Decoder candidates: the truth and the context-flipped variant.
    for (int which = 0; which < 2; ++which) {
        DecoderCandidate cand;
        cand.name = which == 0 ? "truth" : "context-flipped";
        cand.bit.assign(C, std::vector<int>(Y, 0));
        for (int x = 0; x < C; ++x)
            for (int y = 0; y < Y; ++y) {
                int src = which == 0 ? x : (C - 1 - x);
                cand.bit[x][y] = env.feedback.decoder[src][y][terminal.front()];
            }
        out.decoders.push_back(cand);
    }
    return out;
}

} // namespace igl
