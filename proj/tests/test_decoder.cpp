#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "igl/decoder.hpp"
#include "igl/env.hpp"
#include "igl/errors.hpp"

using namespace igl;

namespace {

// Direct draw of one tuple at a terminal state: uniform action, Bernoulli
// reward, channel feedback. Equivalent to filtering episodes that end at s.
TupleRecord draw_tuple(const Env& env, int s, Rng& rng) {
    TupleRecord r;
    r.context = rng.categorical(env.contexts.distribution);
    r.state = s;
    r.action = rng.uniform_int(env.mdp.action_count);
    int reward = rng.bernoulli(env.feedback.reward_fn[r.context][s][r.action]) ? 1 : 0;
    r.feedback = rng.categorical(env.feedback.channel[r.context][s][reward]);
    return r;
}

TupleDataset draw_dataset(const Env& env, int s, int n, Rng& rng) {
    TupleDataset d;
    d.state = s;
    for (int i = 0; i < n; ++i) d.records.push_back(draw_tuple(env, s, rng));
    return d;
}

double holdout_risk(const Env& env, const PosteriorHypothesis& hyp, int s, int n,
                    Rng& rng) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        TupleRecord r = draw_tuple(env, s, rng);
        Vec truth = true_posterior(env, r.context, r.feedback, s);
        const Vec& est = hyp.at(r.context, r.feedback);
        for (std::size_t a = 0; a < truth.size(); ++a)
            total += (est[a] - truth[a]) * (est[a] - truth[a]);
    }
    return total / n;
}

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

TEST_SUITE_BEGIN("decoder");

TEST_CASE("derived constants match the closed forms") {
    IdentifiabilityConstants c5 = derive_constants(5, 1.3, 0.0, 0.9);
    CHECK(c5.kappa == doctest::Approx(0.17297297297297298).epsilon(1e-12));
    CHECK(c5.xi == doctest::Approx(0.21101871101871103).epsilon(1e-12));
    CHECK(c5.L == doctest::Approx(27.863916256157637).epsilon(1e-12));

    IdentifiabilityConstants c3 = derive_constants(3, 1.0, 0.2, 0.6);
    CHECK(c3.kappa == doctest::Approx(2.0 / 15.0).epsilon(1e-12));
    CHECK(c3.xi == doctest::Approx(0.05).epsilon(1e-12));

    // kappa = 0 boundary: theta = M/K.
    CHECK_THROWS_AS(derive_constants(5, 1.3, 0.0, 1.3 / 5.0), EnvSpecError);
    CHECK_THROWS_AS(derive_constants(4, 2.0, 0.0, 0.9), EnvSpecError);
    CHECK_THROWS_AS(derive_constants(5, 1.3, 0.0, 1.2), EnvSpecError);
}

TEST_CASE("ramp values") {
    CHECK(ramp(0.5, 0.4, 0.2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ramp(0.3, 0.4, 0.2) == 0.0);
    CHECK_THROWS_AS(ramp(0.5, 0.4, 0.0), std::invalid_argument);

    // The top of the ramp is exactly 1 at alpha = beta + lambda; with the
    // benchmark constants the a1 posterior lands exactly there.
    IdentifiabilityConstants c5 = derive_constants(5, 1.3, 0.0, 0.9);
    double top = c5.theta / c5.M;
    CHECK(ramp(top, top - c5.xi, c5.xi) == 1.0);
}

TEST_CASE("true posterior on the benchmark env") {
    Env env = build_synthetic_env(0.1, 0.1);
    int s3g = env.state_index("s3g");
    int s3b = env.state_index("s3b");
    int x_true = env.context_index("True");
    int x_false = env.context_index("False");

    // phi* = 1: (x=True, y=1).
    Vec h1 = true_posterior(env, x_true, 1, s3g);
    CHECK(h1[0] == doctest::Approx(0.6923076923076923).epsilon(1e-12));
    for (int a = 1; a < 5; ++a)
        CHECK(h1[a] == doctest::Approx(0.07692307692307693).epsilon(1e-12));

    // phi* = 0: (x=True, y=0).
    Vec h0 = true_posterior(env, x_true, 0, s3g);
    CHECK(h0[0] == doctest::Approx(0.02702702702702703).epsilon(1e-12));
    for (int a = 1; a < 5; ++a)
        CHECK(h0[a] == doctest::Approx(0.24324324324324326).epsilon(1e-12));

    // Flipped context reproduces the same pair through phi*.
    CHECK(true_posterior(env, x_false, 0, s3g) == h1);

    // Homogeneous state: uniform for any observable symbol.
    Vec hb = true_posterior(env, x_true, 0, s3b);
    for (double v : hb) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));

    // Zero-probability conditioning: phi*(True, 1, s3b) = 1 while f* sums to 0.
    CHECK_THROWS_AS(true_posterior(env, x_true, 1, s3b), std::domain_error);
    CHECK_THROWS_AS(true_posterior(env, x_true, 1, 0), std::invalid_argument);
}

TEST_CASE("posterior rows always sum to one") {
    Env env = build_synthetic_env(0.1, 0.1);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int s : env.mdp.terminal_layer()) {
                if (env.feedback.decoder[x][y][s] == 1 && !env.is_heterogeneous(x, s))
                    continue; // undefined branch tested above
                Vec h = true_posterior(env, x, y, s);
                double sum = 0.0;
                for (double v : h) {
                    CHECK(v >= 0.0);
                    sum += v;
                }
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
            }
}

TEST_CASE("surrogate decoder values") {
    IdentifiabilityConstants fig1 = derive_constants(3, 1.0, 0.2, 0.6);
    CHECK(decode_reward({1.0 / 3, 1.0 / 3, 1.0 / 3}, 0, fig1) ==
          doctest::Approx(0.2).epsilon(1e-15));
    CHECK(decode_reward({1.0 / 3, 1.0 / 3, 1.0 / 3}, 2, fig1) ==
          doctest::Approx(0.2).epsilon(1e-15));
    CHECK(decode_reward({2.0 / 3, 0.0, 1.0 / 3}, 0, fig1) == 1.0);

    Env env = build_synthetic_env(0.1, 0.1);
    IdentifiabilityConstants c5 = constants_of(env);
    Vec h1 = true_posterior(env, 0, 1, env.state_index("s3g"));
    CHECK(decode_reward(h1, 0, c5) == 1.0);
    CHECK(decode_reward(h1, 1, c5) == 0.0);
}

TEST_CASE("heterogeneous posteriors separate from uniform by kappa") {
    Env synth = build_synthetic_env(0.1, 0.1);
    Rng rng(331);
    Env rand_env = igl::testing::make_random_env(rng, {1, 2, 3}, 3);
    for (const Env& env : {synth, rand_env}) {
        IdentifiabilityConstants cst = constants_of(env);
        for (int x = 0; x < env.contexts.count(); ++x)
            for (int s : env.mdp.terminal_layer()) {
                if (!env.is_heterogeneous(x, s)) continue;
                for (int phi_value : {0, 1}) {
                    // find a symbol with this decoder value
                    for (int y = 0; y < env.feedback.alphabet_size; ++y) {
                        if (env.feedback.decoder[x][y][s] != phi_value) continue;
                        Vec h = true_posterior(env, x, y, s);
                        double delta = 0.0;
                        for (double v : h)
                            delta = std::max(delta, std::abs(v - 1.0 / cst.K));
                        CHECK(delta >= cst.kappa - 1e-12);
                        break;
                    }
                }
            }
    }
}

TEST_CASE("surrogate underestimates the realized reward exactly") {
    Env env = build_synthetic_env(0.1, 0.1);
    IdentifiabilityConstants cst = constants_of(env);
    int s3g = env.state_index("s3g");
    int s3b = env.state_index("s3b");

    for (int x = 0; x < 2; ++x) {
        for (int r = 0; r < 2; ++r) {
            // The channel is deterministic: one symbol per (x, r).
            int y = env.feedback.channel[x][s3g][r][1] == 1.0 ? 1 : 0;
            Vec h = true_posterior(env, x, y, s3g);
            for (int a = 0; a < 5; ++a) {
                double j = decode_reward(h, a, cst);
                CHECK(r >= j); // underestimator
                if (a == 0) CHECK(j == static_cast<double>(r)); // equality at argmax
            }
        }
        // Homogeneous state: J is exactly c for every observable symbol.
        int y = env.feedback.channel[x][s3b][0][1] == 1.0 ? 1 : 0;
        Vec hb = true_posterior(env, x, y, s3b);
        for (int a = 0; a < 5; ++a) CHECK(decode_reward(hb, a, cst) == cst.c);
    }
}

TEST_CASE("surrogate is L-Lipschitz in the posterior") {
    std::vector<IdentifiabilityConstants> sets = {derive_constants(5, 1.3, 0.0, 0.9),
                                                  derive_constants(3, 1.0, 0.2, 0.6)};
    Rng rng(337);
    for (const auto& cst : sets) {
        for (int trial = 0; trial < 100000; ++trial) {
            Vec v = random_simplex(cst.K, rng);
            Vec w;
            if (trial % 2 == 0) {
                w = random_simplex(cst.K, rng);
            } else {
                // local perturbation, stays in the simplex
                w = v;
                int i = rng.uniform_int(cst.K), j = rng.uniform_int(cst.K);
                double t = std::min(w[i], 0.2 * rng.uniform());
                w[i] -= t;
                w[j] += t;
            }
            double dist = 0.0;
            for (int i = 0; i < cst.K; ++i) dist = std::max(dist, std::abs(v[i] - w[i]));
            int a = rng.uniform_int(cst.K);
            CHECK(std::abs(decode_reward(v, a, cst) - decode_reward(w, a, cst)) <=
                  cst.L * dist + 1e-9);
        }
    }
}

TEST_CASE("hypothesis classes are row-stochastic products") {
    Env env = build_synthetic_env(0.1, 0.1);
    CandidateClasses classes = build_synthetic_classes(env);
    CHECK(classes.rewards.size() == 27);
    CHECK(classes.decoders.size() == 2);

    for (int s : env.mdp.terminal_layer()) {
        StateHypothesisClass cls =
            build_hypothesis_class(s, 2, 2, 5, classes.rewards, classes.decoders);
        CHECK(cls.size() == 54); // |F| * |Phi_s|
        for (const auto& hyp : cls.hypotheses)
            for (int x = 0; x < 2; ++x)
                for (int y = 0; y < 2; ++y) {
                    double sum = 0.0;
                    for (double v : hyp.at(x, y)) {
                        CHECK(v >= 0.0);
                        sum += v;
                    }
                    CHECK(std::abs(sum - 1.0) <= 1e-12);
                }
    }

    // The class contains the true posterior at index 0.
    int s3g = env.state_index("s3g");
    StateHypothesisClass cls =
        build_hypothesis_class(s3g, 2, 2, 5, classes.rewards, classes.decoders);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
            Vec h = true_posterior(env, x, y, s3g);
            for (int a = 0; a < 5; ++a)
                CHECK(cls.hypotheses[0].at(x, y)[a] == doctest::Approx(h[a]).epsilon(1e-14));
        }
}

TEST_CASE("tuple collection consumes the expected number of episodes") {
    Env env = build_synthetic_env(0.1, 0.1);
    int s3g = env.state_index("s3g");

    HomingPolicy always_a1;
    always_a1.target = s3g;
    always_a1.members = {HomingMember{{0, 0, 0, -1, -1}}};

    SUBCASE("reach probability one consumes exactly N0") {
        // Degenerate kernel: a1 always stays on the good branch.
        Env det = env;
        det.mdp.transition[0][0] = {1.0, 0.0};
        det.mdp.transition[1][0] = {1.0, 0.0};
        det.validate();
        ReachableSet set{{s3g}, 0.05};
        Rng rng(401);
        auto data = collect_tuples(det, set, {always_a1}, 500, 0.05, rng);
        CHECK(data.size() == 1);
        CHECK(data[0].records.size() == 500);
        CHECK(data[0].episodes_consumed == 500);
        for (const auto& r : data[0].records) CHECK(r.state == s3g);
    }

    SUBCASE("consumption concentrates at N0 / reach probability") {
        ReachableSet set{{s3g}, 0.05};
        int ok = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            Rng rng(seed * 31 + 7);
            auto data = collect_tuples(env, set, {always_a1}, 5000, 0.05, rng);
            double ratio = static_cast<double>(data[0].episodes_consumed) / 5000.0;
            ok += ratio >= 1.0 && ratio <= 1.35;
        }
        CHECK(ok >= 95);
    }

    SUBCASE("empty reachable set consumes nothing") {
        ReachableSet set{{}, 0.05};
        Rng rng(403);
        CHECK(collect_tuples(env, set, {}, 5000, 0.05, rng).empty());
    }

    SUBCASE("the episode cap guards an impossible target") {
        HomingPolicy wrong;
        wrong.target = env.state_index("s3b");
        wrong.members = always_a1.members; // mostly reaches s3g instead
        Env det = env;
        det.mdp.transition[0][0] = {1.0, 0.0};
        det.mdp.transition[1][0] = {1.0, 0.0};
        det.validate();
        ReachableSet set{{env.state_index("s3b")}, 0.1};
        Rng rng(407);
        CHECK_THROWS_AS(collect_tuples(det, set, {wrong}, 10, 0.05, rng), NumericalError);
    }
}

TEST_CASE("tuple datasets round-trip through the columnar format") {
    Env env = build_synthetic_env(0.1, 0.1);
    Rng rng(409);
    TupleDataset data = draw_dataset(env, env.state_index("s3g"), 200, rng);
    TupleDataset back = dataset_from_text(dataset_to_text(data));
    REQUIRE(back.records.size() == data.records.size());
    for (std::size_t i = 0; i < data.records.size(); ++i) {
        CHECK(back.records[i].context == data.records[i].context);
        CHECK(back.records[i].state == data.records[i].state);
        CHECK(back.records[i].action == data.records[i].action);
        CHECK(back.records[i].feedback == data.records[i].feedback);
    }
    CHECK_THROWS_AS(dataset_from_text("1 2 x\n"), IoError);
}

TEST_CASE("ERM selects the separated truth and a singleton class trivially") {
    Env env = build_synthetic_env(0.1, 0.1);
    int s3g = env.state_index("s3g");
    CandidateClasses classes = build_synthetic_classes(env);

    SUBCASE("singleton class") {
        StateHypothesisClass cls = build_hypothesis_class(
            s3g, 2, 2, 5, {classes.rewards[1]}, {classes.decoders[0]});
        Rng rng(419);
        TupleDataset data = draw_dataset(env, s3g, 50, rng);
        CHECK(erm_fit(data, cls).hypothesis_index == 0);
    }

    SUBCASE("0.3-separated pair is resolved with 200 tuples") {
        // truth vs permuted rewards: the posteriors differ by >= 0.3 in L2
        // at every (x, y).
        StateHypothesisClass cls = build_hypothesis_class(
            s3g, 2, 2, 5, {classes.rewards[0], classes.rewards[1]},
            {classes.decoders[0]});
        for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y) {
                double d2 = 0.0;
                for (int a = 0; a < 5; ++a) {
                    double diff = cls.hypotheses[0].at(x, y)[a] - cls.hypotheses[1].at(x, y)[a];
                    d2 += diff * diff;
                }
                CHECK(std::sqrt(d2) >= 0.3);
            }
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            Rng rng(seed * 101 + 3);
            TupleDataset data = draw_dataset(env, s3g, 200, rng);
            CHECK(erm_fit(data, cls).hypothesis_index == 0);
        }
    }

    SUBCASE("empty dataset is rejected") {
        StateHypothesisClass cls = build_hypothesis_class(
            s3g, 2, 2, 5, {classes.rewards[0]}, {classes.decoders[0]});
        CHECK_THROWS_AS(erm_fit(TupleDataset{}, cls), std::invalid_argument);
    }
}

TEST_CASE("ERM risk shrinks with the tuple budget") {
    Env env = build_synthetic_env(0.1, 0.1);
    int s3g = env.state_index("s3g");
    CandidateClasses classes = build_synthetic_classes(env);
    StateHypothesisClass cls =
        build_hypothesis_class(s3g, 2, 2, 5, classes.rewards, classes.decoders);

    SUBCASE("held-out risk at N0=5000 is small in 95 of 100 seeds") {
        int ok = 0;
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            Rng rng(seed * 7 + 1);
            TupleDataset data = draw_dataset(env, s3g, 5000, rng);
            ErmFit fit = erm_fit(data, cls);
            ok += holdout_risk(env, cls.hypotheses[fit.hypothesis_index], s3g, 2000, rng) <=
                  0.01;
        }
        CHECK(ok >= 95);
    }

    SUBCASE("average held-out risk is non-increasing in N0") {
        const std::vector<int> budgets = {100, 1000, 10000};
        std::vector<double> avg(budgets.size(), 0.0);
        for (std::uint64_t seed = 0; seed < 20; ++seed)
            for (std::size_t b = 0; b < budgets.size(); ++b) {
                Rng rng(seed * 13 + b * 1009 + 5);
                TupleDataset data = draw_dataset(env, s3g, budgets[b], rng);
                ErmFit fit = erm_fit(data, cls);
                avg[b] +=
                    holdout_risk(env, cls.hypotheses[fit.hypothesis_index], s3g, 2000, rng);
            }
        CHECK(avg[0] / 20 >= avg[1] / 20 - 1e-9);
        CHECK(avg[1] / 20 >= avg[2] / 20 - 1e-9);
    }
}

TEST_SUITE_END();
