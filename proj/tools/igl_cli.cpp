// Command-line harness: `run` executes the full pipeline over the configured
// seeds, `decode` stops after the decoder phases and dumps diagnostics,
// `verify` runs the numerical oracle suites, and `theory-params` prints the
// closed-form parameter schedules.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "igl/decoder.hpp"
#include "igl/errors.hpp"
#include "igl/harness.hpp"
#include "igl/verification.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;
constexpr int kExitOther = 1;

struct CommonOverrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<long long> episodes;
    std::optional<double> epsilon;
    std::optional<std::string> gamma_mode;
    std::optional<std::string> out;
};

igl::ExperimentConfig resolve_config(const CommonOverrides& o) {
    igl::ExperimentConfig cfg;
    if (!o.config_path.empty()) cfg = igl::ExperimentConfig::from_file(o.config_path);
    if (o.seed) cfg.seeds = {*o.seed};
    if (o.episodes) {
        if (cfg.total_episodes)
            cfg.total_episodes = *o.episodes;
        else
            cfg.online_episodes = *o.episodes;
    }
    if (o.epsilon) cfg.epsilon = *o.epsilon;
    if (o.gamma_mode) {
        if (*o.gamma_mode == "schedule")
            cfg.gamma_mode = igl::GammaMode::Schedule;
        else if (*o.gamma_mode == "constant")
            cfg.gamma_mode = igl::GammaMode::Constant;
        else if (*o.gamma_mode == "theory")
            cfg.gamma_mode = igl::GammaMode::Theory;
        else
            throw igl::ConfigError("unknown gamma mode '" + *o.gamma_mode + "'");
    }
    if (o.out) cfg.out_dir = *o.out;
    cfg.validate();
    return cfg;
}

int cmd_run(const CommonOverrides& overrides) {
    igl::ExperimentConfig cfg = resolve_config(overrides);
    std::vector<igl::RunReport> reports = igl::run_experiment(cfg);
    double mean_true = 0.0, mean_regret = 0.0;
    for (const igl::RunReport& r : reports) {
        std::printf("seed %llu: online %lld episodes, final-window true %.4f, "
                    "decoded %.4f, regret %.2f\n",
                    static_cast<unsigned long long>(r.seed), r.phases.online,
                    r.summary.final_window_true_mean,
                    r.summary.final_window_decoded_mean, r.summary.cumulative_regret);
        for (const std::string& w : r.warnings)
            std::printf("  warning: %s\n", w.c_str());
        mean_true += r.summary.final_window_true_mean;
        mean_regret += r.summary.cumulative_regret;
    }
    std::printf("mean over %zu seed(s): final-window true reward %.4f, regret %.2f\n",
                reports.size(), mean_true / static_cast<double>(reports.size()),
                mean_regret / static_cast<double>(reports.size()));
    std::printf("outputs under %s\n", cfg.out_dir.c_str());
    return kExitOk;
}

int cmd_decode(const CommonOverrides& overrides) {
    igl::ExperimentConfig cfg = resolve_config(overrides);
    std::uint64_t seed = cfg.seeds.front();
    igl::DecodeResult d = igl::run_decoder_phases(cfg, seed);
    const igl::Env& env = d.env;

    std::filesystem::create_directories(cfg.out_dir);
    std::printf("decoder phases on %s, seed %llu\n", env.name.c_str(),
                static_cast<unsigned long long>(seed));
    std::printf("episodes: homing %lld, collection %lld\n", d.phases.homing,
                d.phases.collection);
    const auto& terminal = env.mdp.terminal_layer();
    for (std::size_t i = 0; i < terminal.size(); ++i) {
        const auto& stats = d.visitation[i];
        std::printf("  %s: p_hat %.4f (beta %.4f) -> %s\n",
                    env.state_labels[terminal[i]].c_str(), stats.p_hat, stats.beta,
                    d.reachable.contains(terminal[i]) ? "reachable" : "excluded");
    }
    for (const igl::ErmSelection& sel : d.selections) {
        std::printf("  ERM at %s: reward '%s', decoder '%s' (loss %.4f)\n",
                    env.state_labels[sel.state].c_str(), sel.reward_name.c_str(),
                    sel.decoder_name.c_str(), sel.empirical_loss);
        const igl::PosteriorHypothesis& hyp = d.decoder.by_state.at(sel.state);
        for (int x = 0; x < env.contexts.count(); ++x)
            for (int y = 0; y < env.feedback.alphabet_size; ++y) {
                std::printf("    h(%s, %s) =", env.contexts.labels[x].c_str(),
                            env.feedback.alphabet_labels[y].c_str());
                for (double v : hyp.at(x, y)) std::printf(" %.4f", v);
                std::printf("\n");
            }
    }
    for (const std::string& w : d.warnings) std::printf("warning: %s\n", w.c_str());

    for (const igl::TupleDataset& data : d.datasets) {
        std::string path = cfg.out_dir + "/tuples_" +
                           env.state_labels[data.state] + ".txt";
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw igl::IoError("cannot open " + path + " for writing");
        out << igl::dataset_to_text(data);
        std::printf("wrote %zu records to %s\n", data.records.size(), path.c_str());
    }
    return kExitOk;
}

int cmd_verify(std::uint64_t seed) {
    igl::Rng rng(seed);
    bool all_pass = true;
    for (const igl::CheckResult& check : igl::run_all_checks(rng)) {
        std::printf("[%s] %s: %s\n", check.pass ? "PASS" : "FAIL", check.name.c_str(),
                    check.detail.c_str());
        all_pass = all_pass && check.pass;
    }
    return all_pass ? kExitOk : kExitNumerical;
}

int cmd_theory_params(double T, double S, double K, double H, double L, double reg_sq) {
    if (L <= 0.0) {
        igl::Env env = igl::build_synthetic_env(0.1, 0.1);
        L = igl::constants_of(env).L;
    }
    igl::TheoryParams p = igl::compute_theory_params(T, S, K, H, L, reg_sq);
    std::printf("T = %.0f, S = %.0f, K = %.0f, H = %.0f, L = %.6f, RegSq = %.6f\n", T, S,
                K, H, L, reg_sq);
    std::printf("gamma   = %.10g\n", p.gamma);
    std::printf("N0      = %.10g\n", p.n0);
    std::printf("epsilon = %.10g\n", p.epsilon);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent-reward episodic MDP learner: decoder phases plus "
                 "occupancy-measure policy optimization"};
    app.require_subcommand(1);

    CommonOverrides overrides;
    auto add_common = [&](CLI::App* sub, bool with_episodes = true) {
        sub->add_option("--config", overrides.config_path,
                        "experiment config file (defaults to the built-in benchmark)");
        sub->add_option("--seed", overrides.seed, "single seed override");
        if (with_episodes)
            sub->add_option("--episodes", overrides.episodes, "episode budget override");
        sub->add_option("--epsilon", overrides.epsilon, "reachability threshold override");
        sub->add_option("--gamma-mode", overrides.gamma_mode,
                        "schedule | constant | theory");
        sub->add_option("--out", overrides.out, "output directory override");
    };

    CLI::App* run = app.add_subcommand("run", "full pipeline over all configured seeds");
    add_common(run);

    CLI::App* decode =
        app.add_subcommand("decode", "decoder phases only, with diagnostics");
    add_common(decode);

    std::uint64_t verify_seed = 12345;
    CLI::App* verify = app.add_subcommand("verify", "numerical oracle suites");
    verify->add_option("--seed", verify_seed, "seed for the randomized checks");

    double tp_T = 40000, tp_S = 5, tp_K = 5, tp_H = 3, tp_L = -1.0;
    double tp_reg = 2.0 * std::log(15.0);
    CLI::App* theory = app.add_subcommand("theory-params",
                                          "closed-form gamma / N0 / epsilon schedules");
    theory->add_option("--episodes", tp_T, "total episode count T");
    theory->add_option("--states", tp_S, "state count S");
    theory->add_option("--actions", tp_K, "action count K");
    theory->add_option("--horizon", tp_H, "horizon H");
    theory->add_option("--lipschitz", tp_L,
                       "decoder Lipschitz constant (default: benchmark constants)");
    theory->add_option("--regsq", tp_reg, "regression oracle regret bound");

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(overrides);
        if (decode->parsed()) return cmd_decode(overrides);
        if (verify->parsed()) return cmd_verify(verify_seed);
        if (theory->parsed())
            return cmd_theory_params(tp_T, tp_S, tp_K, tp_H, tp_L, tp_reg);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    } catch (const igl::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "argument error: %s\n", e.what());
        return kExitConfig;
    } catch (const igl::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kExitNumerical;
    } catch (const igl::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitOther;
    }
    return kExitOther;
}
