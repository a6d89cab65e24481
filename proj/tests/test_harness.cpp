#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "igl/errors.hpp"
#include "igl/harness.hpp"
#include "igl/verification.hpp"

using namespace igl;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.homing_episodes = 300;
    cfg.tuples_per_state = 300;
    cfg.online_episodes = 60;
    cfg.delta = 0.05;
    cfg.final_window = 30;
    cfg.seeds = {9};
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("experiment config parses and validates") {
    ConfigDoc doc = ConfigDoc::parse_string(R"(
[env]
preset = "synthetic-v1"
p = 0.1
p_reward = 0.1

[decoder]
epsilon = 0.05
delta = 0.05
homing_episodes = 120
tuples_per_state = 150

[online]
episodes = 40
gamma_mode = "constant"
gamma_constant = 100.0
oracle = "ogd"

[run]
seeds = [3, 4]
out = "tmp-out"
jobs = 2
)",
                                            "<cfg>");
    ExperimentConfig cfg = ExperimentConfig::from_doc(doc);
    cfg.validate();
    CHECK(cfg.homing_episodes == 120);
    CHECK(cfg.tuples_per_state == 150);
    CHECK(cfg.online_episodes == 40);
    CHECK(cfg.gamma_mode == GammaMode::Constant);
    CHECK(cfg.oracle == OracleVariant::Ogd);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4});

    SUBCASE("epsilon outside (0, 1/4)") {
        cfg.epsilon = 0.3;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("both episode budgets set") {
        cfg.total_episodes = 100000;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("constant mode needs a positive gamma") {
        cfg.gamma_constant = 0.0;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("unknown names are rejected at parse time") {
        ConfigDoc bad = ConfigDoc::parse_string("[online]\ngamma_mode = \"what\"\n", "<b>");
        CHECK_THROWS_AS(ExperimentConfig::from_doc(bad), ConfigError);
    }
    SUBCASE("delta defaults to 1/T^2") {
        cfg.delta.reset();
        cfg.total_episodes.reset();
        cfg.online_episodes = 40;
        double t = (120.0 + 150.0) * 2 + 40.0;
        CHECK(cfg.effective_delta(2) == doctest::Approx(1.0 / (t * t)).epsilon(1e-12));
    }
}

TEST_CASE("lemma-1 budget mode derives N from the PAC formula") {
    ExperimentConfig cfg = small_config();
    cfg.use_lemma1_budget = true;
    cfg.budget_constant = 0.002; // keep the derived budget test-sized
    cfg.epsilon = 0.2;
    cfg.delta = 0.05;
    // N = ceil(C * SKH * log(SKH / delta) / eps^2) with S=5, K=5, H=3.
    double skh = 75.0;
    long long expected =
        static_cast<long long>(std::ceil(0.002 * skh * std::log(skh / 0.05) / 0.04));
    CHECK(cfg.effective_homing_episodes(5, 5, 3) == expected);

    RunReport report = run_full_pipeline(cfg, 3);
    CHECK(report.phases.homing == 2 * expected);

    cfg.use_lemma1_budget = false;
    CHECK(cfg.effective_homing_episodes(5, 5, 3) == cfg.homing_episodes);
}

TEST_CASE("theory gamma mode and the OGD oracle run end to end") {
    ExperimentConfig cfg = small_config();
    cfg.homing_episodes = 150;
    cfg.tuples_per_state = 150;
    cfg.online_episodes = 30;

    SUBCASE("theory-mode gamma") {
        cfg.gamma_mode = GammaMode::Theory;
        RunReport report = run_full_pipeline(cfg, 21);
        CHECK(report.metrics.size() == 30);
    }
    SUBCASE("ogd oracle") {
        cfg.oracle = OracleVariant::Ogd;
        RunReport report = run_full_pipeline(cfg, 22);
        CHECK(report.metrics.size() == 30);
        long long decoded = 0;
        for (const auto& m : report.metrics) decoded += m.decoded_reward.has_value();
        CHECK(decoded == report.metrics.size()); // both states reachable
    }
}

TEST_CASE("total budget must exceed the exploration budget") {
    ExperimentConfig cfg = small_config();
    cfg.online_episodes.reset();
    cfg.total_episodes = 1000; // homing 600 + minimum collection 600 >= total
    CHECK_THROWS_AS(run_full_pipeline(cfg, 1), ConfigError);

    cfg.total_episodes = 2000;
    RunReport report = run_full_pipeline(cfg, 1);
    CHECK(report.phases.total() == 2000);
    CHECK(report.phases.online ==
          2000 - report.phases.homing - report.phases.collection);
}

TEST_CASE("pipeline phase accounting is exact") {
    ExperimentConfig cfg = small_config();
    RunReport report = run_full_pipeline(cfg, 5);
    CHECK(report.phases.homing == 300 * 2);
    CHECK(report.phases.online == 60);
    CHECK(report.phases.collection >= 2 * 300);
    CHECK(report.phases.total() ==
          report.phases.homing + report.phases.collection + report.phases.online);
    CHECK(report.metrics.size() == 60);
    CHECK(report.reachable_states.size() == 2);
    CHECK(report.lower_bound_in_class);
    // The far distractors are rejected even at this small budget; the
    // near-truth shell may win until the tuple budget grows.
    for (const auto& sel : report.selections) {
        CHECK(sel.decoder_name == "truth");
        CHECK(sel.reward_name != "permuted");
        bool truth_like = sel.reward_name == "truth" ||
                          sel.reward_name.rfind("near-", 0) == 0;
        CHECK(truth_like);
    }
}

TEST_CASE("identical config and seed give bitwise-identical outputs") {
    ExperimentConfig cfg = small_config();
    Env env = load_env(cfg);
    RunReport a = run_full_pipeline(cfg, 42);
    RunReport b = run_full_pipeline(cfg, 42);
    emit_metrics(a, cfg, env, "build-test-out/run-a");
    emit_metrics(b, cfg, env, "build-test-out/run-b");
    CHECK(slurp("build-test-out/run-a/metrics.csv") ==
          slurp("build-test-out/run-b/metrics.csv"));
    CHECK(slurp("build-test-out/run-a/summary.json") ==
          slurp("build-test-out/run-b/summary.json"));

    // Re-emission overwrites with identical content.
    emit_metrics(a, cfg, env, "build-test-out/run-a");
    CHECK(slurp("build-test-out/run-a/metrics.csv") ==
          slurp("build-test-out/run-b/metrics.csv"));

    RunReport c = run_full_pipeline(cfg, 43);
    emit_metrics(c, cfg, env, "build-test-out/run-c");
    CHECK(slurp("build-test-out/run-a/metrics.csv") !=
          slurp("build-test-out/run-c/metrics.csv"));
}

TEST_CASE("summary regret matches an independent recomputation from the csv") {
    ExperimentConfig cfg = small_config();
    Env env = load_env(cfg);
    RunReport report = run_full_pipeline(cfg, 7);
    emit_metrics(report, cfg, env, "build-test-out/regret");

    std::ifstream in("build-test-out/regret/metrics.csv");
    std::string line;
    std::getline(in, line); // header
    double recomputed = 0.0;
    long long rows = 0;
    double last_cumulative = -1.0;
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        REQUIRE(fields.size() == 7);
        recomputed += report.summary.optimal_value - std::stod(fields[5]);
        last_cumulative = std::stod(fields[6]);
        ++rows;
    }
    CHECK(rows == 60);
    CHECK(std::abs(recomputed - report.summary.cumulative_regret) <= 1e-9);
    CHECK(std::abs(last_cumulative - report.summary.cumulative_regret) <= 1e-9);
}

TEST_CASE("metrics file has one row per episode and a sentinel for filtered ones") {
    ExperimentConfig cfg = small_config();
    Env env = load_env(cfg);

    RunReport report;
    report.seed = 1;
    for (int i = 1; i <= 3; ++i) {
        EpisodeMetric m;
        m.episode = i;
        m.context = 0;
        m.terminal_state = i == 2 ? 4 : 3;
        m.true_reward = 1;
        if (i != 2) m.decoded_reward = 0.5;
        m.policy_value = 0.7;
        m.cumulative_regret = 0.029 * i;
        report.metrics.push_back(m);
    }
    report.summary.final_window = 3;
    emit_metrics(report, cfg, env, "build-test-out/sentinel");

    std::ifstream in("build-test-out/sentinel/metrics.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line ==
          "episode,context,terminal_state,true_reward,decoded_reward,policy_value,"
          "cumulative_regret");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        bool filtered = line.find(",NA,") != std::string::npos;
        bool ends_bad = line.find(",4,") != std::string::npos;
        CHECK(filtered == ends_bad);
    }
    CHECK(rows == 3);
}

TEST_CASE("an empty reachable set degrades gracefully") {
    ExperimentConfig cfg = small_config();
    cfg.env_file = std::string(IGL_SOURCE_DIR) + "/configs/tiny-env.toml";
    cfg.epsilon = 0.24; // 4 eps = 0.96 exceeds every reaching probability
    cfg.homing_episodes = 400;
    cfg.online_episodes = 40;

    RunReport report = run_full_pipeline(cfg, 11);
    CHECK(report.reachable_states.empty());
    CHECK(report.phases.collection == 0);
    REQUIRE(!report.warnings.empty());
    CHECK(report.warnings.front().find("reachable set is empty") != std::string::npos);
    for (const auto& m : report.metrics) CHECK(!m.decoded_reward.has_value());
    CHECK(report.summary.final_window_decoded_mean == 0.0);
}

TEST_CASE("monte carlo posterior matches the closed form") {
    Env env = build_synthetic_env(0.1, 0.1);
    Rng rng(1009);
    CHECK_THROWS_AS(monte_carlo_posterior(env, 3, 0, rng), std::invalid_argument);
    CHECK_THROWS_AS(monte_carlo_posterior(env, 0, 10, rng), std::invalid_argument);

    PosteriorTable table = monte_carlo_posterior(env, 3, 1000000, rng);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
            REQUIRE(table.cell_counts[x][y] > 0);
            Vec truth = true_posterior(env, x, y, 3);
            for (int a = 0; a < 5; ++a)
                CHECK(std::abs(table.frequency[x][y][a] - truth[a]) <= 0.01);
        }

    // Homogeneous state: uniform over actions for every observed symbol.
    PosteriorTable bad = monte_carlo_posterior(env, 4, 200000, rng);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
            if (bad.cell_counts[x][y] == 0) continue;
            for (int a = 0; a < 5; ++a)
                CHECK(std::abs(bad.frequency[x][y][a] - 0.2) <= 0.01);
        }
}

TEST_CASE("multi-seed experiments fan out and merge") {
    ExperimentConfig cfg = small_config();
    cfg.homing_episodes = 150;
    cfg.tuples_per_state = 150;
    cfg.online_episodes = 25;
    cfg.seeds = {2, 3};
    cfg.jobs = 2;
    cfg.out_dir = "build-test-out/multi";

    std::vector<RunReport> reports = run_experiment(cfg);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].seed == 2);
    CHECK(reports[1].seed == 3);
    CHECK(slurp("build-test-out/multi/seed_2/metrics.csv") !=
          slurp("build-test-out/multi/seed_3/metrics.csv"));
    std::string merged = slurp("build-test-out/multi/summary.json");
    CHECK(merged.find("mean_final_window_true_reward") != std::string::npos);

    // Parallel fan-out equals the sequential run.
    ExperimentConfig seq = cfg;
    seq.jobs = 1;
    seq.out_dir = "build-test-out/multi-seq";
    std::vector<RunReport> sequential = run_experiment(seq);
    CHECK(slurp("build-test-out/multi/seed_2/metrics.csv") ==
          slurp("build-test-out/multi-seq/seed_2/metrics.csv"));
    CHECK(slurp("build-test-out/multi/seed_3/metrics.csv") ==
          slurp("build-test-out/multi-seq/seed_3/metrics.csv"));
}

TEST_CASE("verification oracle suites all pass") {
    Rng rng(2027);
    for (const CheckResult& check : run_all_checks(rng)) {
        INFO(check.name, ": ", check.detail);
        CHECK(check.pass);
    }
}

TEST_SUITE_END();
