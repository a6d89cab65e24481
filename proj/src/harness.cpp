#include "igl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include <json.hpp>

#include "igl/errors.hpp"
#include "igl/reachability.hpp"

namespace igl {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

ConfigValue number_value(double v) {
    ConfigValue out;
    out.kind = ConfigValue::Kind::Number;
    out.number = v;
    return out;
}

ConfigValue string_value(const std::string& s) {
    ConfigValue out;
    out.kind = ConfigValue::Kind::String;
    out.text = s;
    return out;
}

std::string gamma_mode_name(GammaMode mode) {
    switch (mode) {
        case GammaMode::Schedule: return "schedule";
        case GammaMode::Constant: return "constant";
        case GammaMode::Theory: return "theory";
    }
    return "schedule";
}

std::string oracle_name(OracleVariant oracle) {
    return oracle == OracleVariant::Aggregation ? "aggregation" : "ogd";
}

} // namespace

ExperimentConfig ExperimentConfig::from_doc(const ConfigDoc& doc) {
    ExperimentConfig cfg;
    cfg.preset = doc.get_string("env", "preset", cfg.preset);
    cfg.env_file = doc.get_string("env", "file", "");
    cfg.p = doc.get_number("env", "p", cfg.p);
    cfg.p_reward = doc.get_number("env", "p_reward", cfg.p_reward);

    cfg.epsilon = doc.get_number("decoder", "epsilon", cfg.epsilon);
    if (doc.has("decoder", "delta")) cfg.delta = doc.get_number("decoder", "delta");
    cfg.homing_episodes =
        doc.get_int("decoder", "homing_episodes", cfg.homing_episodes);
    cfg.tuples_per_state =
        doc.get_int("decoder", "tuples_per_state", cfg.tuples_per_state);
    cfg.use_lemma1_budget =
        doc.get_bool("decoder", "use_lemma1_budget", cfg.use_lemma1_budget);
    cfg.budget_constant = doc.get_number("decoder", "budget_constant", cfg.budget_constant);
    cfg.bonus_scale = doc.get_number("decoder", "bonus_scale", cfg.bonus_scale);
    cfg.near_distractors =
        static_cast<int>(doc.get_int("decoder", "near_distractors", cfg.near_distractors));
    cfg.near_scale = doc.get_number("decoder", "near_scale", cfg.near_scale);

    if (doc.has("online", "episodes")) cfg.online_episodes = doc.get_int("online", "episodes");
    if (doc.has("online", "total_episodes"))
        cfg.total_episodes = doc.get_int("online", "total_episodes");
    std::string mode = doc.get_string("online", "gamma_mode", "schedule");
    if (mode == "schedule")
        cfg.gamma_mode = GammaMode::Schedule;
    else if (mode == "constant")
        cfg.gamma_mode = GammaMode::Constant;
    else if (mode == "theory")
        cfg.gamma_mode = GammaMode::Theory;
    else
        throw ConfigError("unknown gamma_mode '" + mode + "'");
    cfg.gamma_constant = doc.get_number("online", "gamma_constant", cfg.gamma_constant);
    std::string oracle = doc.get_string("online", "oracle", "aggregation");
    if (oracle == "aggregation")
        cfg.oracle = OracleVariant::Aggregation;
    else if (oracle == "ogd")
        cfg.oracle = OracleVariant::Ogd;
    else
        throw ConfigError("unknown oracle variant '" + oracle + "'");
    cfg.eta = doc.get_number("online", "eta", cfg.eta);
    cfg.ogd_learning_rate =
        doc.get_number("online", "ogd_learning_rate", cfg.ogd_learning_rate);
    cfg.final_window = doc.get_int("online", "final_window", cfg.final_window);

    if (doc.has("run", "seeds")) {
        cfg.seeds.clear();
        for (double s : doc.get_number_list("run", "seeds"))
            cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    cfg.out_dir = doc.get_string("run", "out", cfg.out_dir);
    cfg.jobs = static_cast<int>(doc.get_int("run", "jobs", cfg.jobs));
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_doc(ConfigDoc::parse_file(path));
}

void ExperimentConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon < 0.25))
        throw ConfigError("epsilon must lie in (0, 1/4)");
    if (homing_episodes < 1) throw ConfigError("homing_episodes must be >= 1");
    if (tuples_per_state < 1) throw ConfigError("tuples_per_state must be >= 1");
    if (budget_constant <= 0.0) throw ConfigError("budget_constant must be positive");
    if (bonus_scale <= 0.0) throw ConfigError("bonus_scale must be positive");
    if (near_distractors < 0) throw ConfigError("near_distractors must be >= 0");
    if (delta && !(*delta > 0.0 && *delta < 1.0))
        throw ConfigError("delta must lie in (0, 1)");
    if (online_episodes && total_episodes)
        throw ConfigError("set either online.episodes or online.total_episodes, not both");
    if (online_episodes && *online_episodes < 1)
        throw ConfigError("online.episodes must be >= 1");
    if (gamma_mode == GammaMode::Constant && !(gamma_constant > 0.0))
        throw ConfigError("gamma_constant must be positive in constant mode");
    if (eta < 0.0) throw ConfigError("eta must be nonnegative");
    if (ogd_learning_rate <= 0.0) throw ConfigError("ogd_learning_rate must be positive");
    if (final_window < 1) throw ConfigError("final_window must be >= 1");
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

void ExperimentConfig::validate_budgets(std::size_t terminal_states) const {
    if (!total_episodes) return;
    long long exploration =
        homing_episodes * static_cast<long long>(terminal_states) +
        tuples_per_state * static_cast<long long>(terminal_states);
    if (*total_episodes <= exploration)
        throw ConfigError(
            "total episode budget " + std::to_string(*total_episodes) +
            " does not exceed the exploration budget " + std::to_string(exploration));
}

long long ExperimentConfig::effective_homing_episodes(int S, int K, int H) const {
    if (!use_lemma1_budget) return homing_episodes;
    // The failure probability enters only through a log; when delta is left
    // to its 1/T^2 default the budget itself shapes T, so this seeds the
    // formula with delta = 0.05 rather than chasing the fixed point.
    double d = delta.value_or(0.05);
    double skh = static_cast<double>(S) * K * H;
    double n = budget_constant * skh * std::log(skh / d) / (epsilon * epsilon);
    return static_cast<long long>(std::ceil(n));
}

double ExperimentConfig::effective_delta(std::size_t terminal_states) const {
    if (delta) return *delta;
    long long t = total_episodes.value_or(
        (homing_episodes + tuples_per_state) * static_cast<long long>(terminal_states) +
        online_episodes.value_or(40000));
    return 1.0 / (static_cast<double>(t) * static_cast<double>(t));
}

ConfigDoc ExperimentConfig::echo() const {
    ConfigDoc doc;
    doc.set("env", "preset", string_value(preset));
    if (!env_file.empty()) doc.set("env", "file", string_value(env_file));
    doc.set("env", "p", number_value(p));
    doc.set("env", "p_reward", number_value(p_reward));

    doc.set("decoder", "epsilon", number_value(epsilon));
    if (delta) doc.set("decoder", "delta", number_value(*delta));
    doc.set("decoder", "homing_episodes", number_value(static_cast<double>(homing_episodes)));
    doc.set("decoder", "tuples_per_state",
            number_value(static_cast<double>(tuples_per_state)));
    ConfigValue lemma1;
    lemma1.kind = ConfigValue::Kind::Bool;
    lemma1.boolean = use_lemma1_budget;
    doc.set("decoder", "use_lemma1_budget", lemma1);
    doc.set("decoder", "budget_constant", number_value(budget_constant));
    doc.set("decoder", "bonus_scale", number_value(bonus_scale));
    doc.set("decoder", "near_distractors", number_value(near_distractors));
    doc.set("decoder", "near_scale", number_value(near_scale));

    if (online_episodes)
        doc.set("online", "episodes", number_value(static_cast<double>(*online_episodes)));
    if (total_episodes)
        doc.set("online", "total_episodes",
                number_value(static_cast<double>(*total_episodes)));
    doc.set("online", "gamma_mode", string_value(gamma_mode_name(gamma_mode)));
    if (gamma_mode == GammaMode::Constant)
        doc.set("online", "gamma_constant", number_value(gamma_constant));
    doc.set("online", "oracle", string_value(oracle_name(oracle)));
    doc.set("online", "eta", number_value(eta));
    doc.set("online", "ogd_learning_rate", number_value(ogd_learning_rate));
    doc.set("online", "final_window", number_value(static_cast<double>(final_window)));

    ConfigValue seed_list;
    seed_list.kind = ConfigValue::Kind::Array;
    for (std::uint64_t s : seeds)
        seed_list.items.push_back(number_value(static_cast<double>(s)));
    doc.set("run", "seeds", seed_list);
    doc.set("run", "out", string_value(out_dir));
    doc.set("run", "jobs", number_value(jobs));
    return doc;
}

Env load_env(const ExperimentConfig& cfg) {
    if (!cfg.env_file.empty()) return env_from_config(ConfigDoc::parse_file(cfg.env_file));
    if (cfg.preset == "synthetic-v1") return build_synthetic_env(cfg.p, cfg.p_reward);
    throw ConfigError("unknown environment preset '" + cfg.preset + "'");
}

DecodeResult run_decoder_phases(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    DecodeResult out;
    out.env = load_env(cfg);
    cfg.validate_budgets(out.env.mdp.terminal_layer().size());
    out.constants = constants_of(out.env);
    out.classes = build_synthetic_classes(
        out.env, SyntheticClassOptions{cfg.near_distractors, cfg.near_scale});

    const Env& env = out.env;
    const auto& terminal = env.mdp.terminal_layer();
    const double delta = cfg.effective_delta(terminal.size());
    const long long homing_budget = cfg.effective_homing_episodes(
        env.mdp.state_count(), env.mdp.action_count, env.mdp.horizon);
    Rng root(seed);

    // Phase 1: homing policies; visitation statistics come from the learning
    // episodes themselves, so the phase consumes exactly N per state.
    std::vector<HomingPolicy> homing;
    for (int s : terminal) {
        Rng child = root.split("homing", static_cast<std::uint64_t>(s));
        HomingOptions opt;
        opt.episodes = homing_budget;
        opt.delta = delta;
        opt.bonus_scale = cfg.bonus_scale;
        homing.push_back(learn_homing_policy(env, s, opt, child));
        out.visitation.push_back(learning_visitation(env, homing.back(), delta));
        out.phases.homing += homing_budget;
    }

    // Phase 2: the reliably reachable set.
    out.reachable = build_reachable_set(terminal, out.visitation, cfg.epsilon);
    if (out.reachable.empty())
        out.warnings.push_back(
            "reachable set is empty: no decoder was fit and every online episode "
            "will be skipped for oracle updates");

    // Phase 3: tuple collection and per-state ERM.
    std::vector<HomingPolicy> in_set_order;
    for (int s : out.reachable.states)
        for (std::size_t i = 0; i < homing.size(); ++i)
            if (terminal[i] == s) in_set_order.push_back(homing[i]);
    Rng collect_rng = root.split("collect");
    out.datasets = collect_tuples(env, out.reachable, in_set_order, cfg.tuples_per_state,
                                  delta, collect_rng);
    for (const TupleDataset& d : out.datasets) out.phases.collection += d.episodes_consumed;

    for (const TupleDataset& d : out.datasets) {
        StateHypothesisClass cls = build_hypothesis_class(
            d.state, env.contexts.count(), env.feedback.alphabet_size,
            env.mdp.action_count, out.classes.rewards, out.classes.decoders);
        ErmFit fit = erm_fit(d, cls);
        const PosteriorHypothesis& chosen = cls.hypotheses[fit.hypothesis_index];
        out.decoder.by_state[d.state] = chosen;
        ErmSelection sel;
        sel.state = d.state;
        sel.hypothesis_index = fit.hypothesis_index;
        sel.reward_index = chosen.reward_index;
        sel.decoder_index = chosen.decoder_index;
        sel.empirical_loss = fit.empirical_loss;
        sel.reward_name = out.classes.rewards[chosen.reward_index].name;
        sel.decoder_name = out.classes.decoders[chosen.decoder_index].name;
        out.selections.push_back(sel);
    }

    // Assumption audit: the decoder-induced lower bound should be one of the
    // supplied reward candidates (finite alphabet makes it enumerable).
    auto lower = decoder_lower_bound_table(env, out.constants);
    for (const RewardCandidate& cand : out.classes.rewards) {
        double gap = 0.0;
        for (int x = 0; x < env.contexts.count(); ++x)
            for (int s : terminal)
                for (int a = 0; a < env.mdp.action_count; ++a)
                    gap = std::max(gap,
                                   std::abs(cand.table[x][s][a] - lower[x][s][a]));
        if (gap <= 1e-12) {
            out.lower_bound_in_class = true;
            break;
        }
    }
    if (!out.lower_bound_in_class)
        out.warnings.push_back(
            "the decoder-induced reward lower bound is not in the candidate class; "
            "the regression oracle's comparator premise fails");
    return out;
}

RunReport run_full_pipeline(const ExperimentConfig& cfg, std::uint64_t seed) {
    DecodeResult d = run_decoder_phases(cfg, seed);
    const Env& env = d.env;

    RunReport report;
    report.seed = seed;
    report.phases = d.phases;
    report.visitation = d.visitation;
    report.reachable_states = d.reachable.states;
    report.selections = d.selections;
    report.lower_bound_in_class = d.lower_bound_in_class;
    report.warnings = d.warnings;

    long long online_budget;
    if (cfg.total_episodes) {
        online_budget = *cfg.total_episodes - d.phases.homing - d.phases.collection;
        if (online_budget < 1)
            throw ConfigError("exploration consumed " +
                              std::to_string(d.phases.homing + d.phases.collection) +
                              " episodes, leaving no online budget");
    } else {
        online_budget = cfg.online_episodes.value_or(40000);
    }

    std::unique_ptr<RegressionOracle> oracle;
    if (cfg.oracle == OracleVariant::Aggregation)
        oracle = std::make_unique<AggregationOracle>(d.classes.rewards, cfg.eta);
    else
        oracle = std::make_unique<OgdOracle>(env.contexts.count(), env.mdp.state_count(),
                                             env.mdp.action_count, cfg.ogd_learning_rate);

    GammaSchedule gamma;
    switch (cfg.gamma_mode) {
        case GammaMode::Schedule:
            gamma = GammaSchedule::schedule();
            break;
        case GammaMode::Constant:
            gamma = GammaSchedule::fixed(cfg.gamma_constant);
            break;
        case GammaMode::Theory: {
            double T = static_cast<double>(cfg.total_episodes.value_or(
                d.phases.homing + d.phases.collection + online_budget));
            double reg_sq =
                2.0 * std::log(static_cast<double>(d.classes.rewards.size()));
            TheoryParams params = compute_theory_params(
                T, env.mdp.state_count(), env.mdp.action_count, env.mdp.horizon,
                d.constants.L, reg_sq);
            gamma = GammaSchedule::fixed(params.gamma);
            break;
        }
    }

    Rng online_rng = Rng(seed).split("online");
    OnlineResult online =
        run_online_loop(env, d.reachable, d.decoder, d.constants, *oracle, gamma,
                        online_budget, online_rng, report.metrics);
    report.phases.online = online_budget;

    RunSummary& summary = report.summary;
    summary.optimal_value = online.optimal_value;
    summary.final_window =
        std::min<long long>(cfg.final_window, static_cast<long long>(report.metrics.size()));
    double true_sum = 0.0, decoded_sum = 0.0;
    for (std::size_t i = report.metrics.size() - summary.final_window;
         i < report.metrics.size(); ++i) {
        true_sum += report.metrics[i].true_reward;
        decoded_sum += report.metrics[i].decoded_reward.value_or(0.0);
    }
    summary.final_window_true_mean = true_sum / static_cast<double>(summary.final_window);
    summary.final_window_decoded_mean =
        decoded_sum / static_cast<double>(summary.final_window);
    summary.cumulative_regret = report.metrics.back().cumulative_regret;
    return report;
}

PosteriorTable monte_carlo_posterior(const Env& env, int terminal_state, long long samples,
                                     Rng& rng) {
    if (samples < 1) throw std::invalid_argument("posterior sampling needs samples >= 1");
    if (!env.mdp.is_terminal(terminal_state))
        throw std::invalid_argument("posterior sampling target must be terminal");

    const int C = env.contexts.count();
    const int Y = env.feedback.alphabet_size;
    const int K = env.mdp.action_count;

    PosteriorTable table;
    table.samples = samples;
    table.cell_counts.assign(C, std::vector<long long>(Y, 0));
    std::vector<std::vector<Vec>> counts(C, std::vector<Vec>(Y, Vec(K, 0.0)));

    for (long long i = 0; i < samples; ++i) {
        int x = rng.categorical(env.contexts.distribution);
        int a = rng.uniform_int(K);
        int r = rng.bernoulli(env.feedback.reward_fn[x][terminal_state][a]) ? 1 : 0;
        int y = rng.categorical(env.feedback.channel[x][terminal_state][r]);
        counts[x][y][a] += 1.0;
        ++table.cell_counts[x][y];
    }

    table.frequency.assign(C, std::vector<Vec>(Y, Vec(K, 0.0)));
    for (int x = 0; x < C; ++x)
        for (int y = 0; y < Y; ++y)
            if (table.cell_counts[x][y] > 0)
                for (int a = 0; a < K; ++a)
                    table.frequency[x][y][a] =
                        counts[x][y][a] / static_cast<double>(table.cell_counts[x][y]);
    return table;
}

void emit_metrics(const RunReport& report, const ExperimentConfig& cfg, const Env& env,
                  const std::string& directory) {
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) throw IoError("cannot create output directory " + directory);

    const std::string csv_path = directory + "/metrics.csv";
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw IoError("cannot open " + csv_path + " for writing");
    csv << "episode,context,terminal_state,true_reward,decoded_reward,policy_value,"
           "cumulative_regret\n";
    for (const EpisodeMetric& m : report.metrics) {
        csv << m.episode << ',' << m.context << ',' << m.terminal_state << ','
            << m.true_reward << ',';
        if (m.decoded_reward)
            csv << format_double(*m.decoded_reward);
        else
            csv << "NA";
        csv << ',' << format_double(m.policy_value) << ','
            << format_double(m.cumulative_regret) << '\n';
    }
    if (!csv.good()) throw IoError("failed while writing " + csv_path);
    csv.close();

    json summary;
    summary["seed"] = report.seed;
    summary["episodes_homing"] = report.phases.homing;
    summary["episodes_collection"] = report.phases.collection;
    summary["episodes_online"] = report.phases.online;
    summary["episodes_total"] = report.phases.total();
    summary["optimal_value"] = report.summary.optimal_value;
    summary["final_window"] = report.summary.final_window;
    summary["final_window_true_mean"] = report.summary.final_window_true_mean;
    summary["final_window_decoded_mean"] = report.summary.final_window_decoded_mean;
    summary["cumulative_regret"] = report.summary.cumulative_regret;
    summary["lower_bound_in_class"] = report.lower_bound_in_class;
    std::string reachable;
    for (int s : report.reachable_states) {
        if (!reachable.empty()) reachable += ' ';
        reachable += env.state_labels[s];
    }
    summary["reachable_states"] = reachable;
    for (std::size_t i = 0; i < report.visitation.size(); ++i)
        summary["visitation_" + env.state_labels[env.mdp.terminal_layer()[i]]] =
            report.visitation[i].p_hat;
    for (const ErmSelection& sel : report.selections) {
        const std::string key = "erm_" + env.state_labels[sel.state];
        summary[key + "_reward"] = sel.reward_name;
        summary[key + "_decoder"] = sel.decoder_name;
        summary[key + "_loss"] = sel.empirical_loss;
    }
    std::string warnings;
    for (const std::string& w : report.warnings) {
        if (!warnings.empty()) warnings += "; ";
        warnings += w;
    }
    summary["warnings"] = warnings;

    const std::string summary_path = directory + "/summary.json";
    std::ofstream sum(summary_path, std::ios::trunc);
    if (!sum) throw IoError("cannot open " + summary_path + " for writing");
    sum << summary.dump(2) << '\n';
    if (!sum.good()) throw IoError("failed while writing " + summary_path);
    sum.close();

    const std::string echo_path = directory + "/config.echo";
    std::ofstream echo(echo_path, std::ios::trunc);
    if (!echo) throw IoError("cannot open " + echo_path + " for writing");
    echo << cfg.echo().dump();
    if (!echo.good()) throw IoError("failed while writing " + echo_path);
}

std::vector<RunReport> run_experiment(const ExperimentConfig& cfg, bool emit) {
    cfg.validate();
    const std::size_t n = cfg.seeds.size();
    std::vector<RunReport> reports(n);
    std::vector<std::exception_ptr> errors(n);

    int workers = std::min<int>(cfg.jobs, static_cast<int>(n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            reports[i] = run_full_pipeline(cfg, cfg.seeds[i]);
    } else {
        std::atomic<std::size_t> next{0};
        auto work = [&]() {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    reports[i] = run_full_pipeline(cfg, cfg.seeds[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    if (emit) {
        Env env = load_env(cfg);
        json merged;
        double true_mean = 0.0, decoded_mean = 0.0, regret = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            emit_metrics(reports[i], cfg, env,
                         cfg.out_dir + "/seed_" + std::to_string(cfg.seeds[i]));
            true_mean += reports[i].summary.final_window_true_mean;
            decoded_mean += reports[i].summary.final_window_decoded_mean;
            regret += reports[i].summary.cumulative_regret;
            merged["seed_" + std::to_string(cfg.seeds[i]) + "_final_true_mean"] =
                reports[i].summary.final_window_true_mean;
        }
        merged["seeds"] = static_cast<long long>(n);
        merged["mean_final_window_true_reward"] = true_mean / static_cast<double>(n);
        merged["mean_final_window_decoded_reward"] = decoded_mean / static_cast<double>(n);
        merged["mean_cumulative_regret"] = regret / static_cast<double>(n);
        merged["optimal_value"] = reports.front().summary.optimal_value;

        std::error_code ec;
        fs::create_directories(cfg.out_dir, ec);
        if (ec) throw IoError("cannot create output directory " + cfg.out_dir);
        std::ofstream out(cfg.out_dir + "/summary.json", std::ios::trunc);
        if (!out) throw IoError("cannot open " + cfg.out_dir + "/summary.json");
        out << merged.dump(2) << '\n';
    }
    return reports;
}

} // namespace igl
