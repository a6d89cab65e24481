#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "igl/config.hpp"
#include "igl/decoder.hpp"
#include "igl/online.hpp"

namespace igl {

enum class OracleVariant { Aggregation, Ogd };
enum class GammaMode { Schedule, Constant, Theory };

struct ExperimentConfig {
    // [env]
    std::string preset = "synthetic-v1";
    std::string env_file; // nonempty overrides the preset
    double p = 0.1;
    double p_reward = 0.1;

    // [decoder]
    double epsilon = 0.05;
    std::optional<double> delta; // default 1/T^2
    long long homing_episodes = 5000;  // N per terminal state
    long long tuples_per_state = 5000; // N0
    bool use_lemma1_budget = false;    // derive N from the PAC budget formula
    double budget_constant = 1.0;      // the constant C in that formula
    double bonus_scale = 0.3;
    int near_distractors = 24;
    double near_scale = 0.04;

    // [online]
    std::optional<long long> online_episodes; // direct online budget
    std::optional<long long> total_episodes;  // alternative: T including exploration
    GammaMode gamma_mode = GammaMode::Schedule;
    double gamma_constant = 0.0;
    OracleVariant oracle = OracleVariant::Aggregation;
    double eta = 0.5;
    double ogd_learning_rate = 0.05;
    long long final_window = 2000;

    // [run]
    std::vector<std::uint64_t> seeds = {1};
    std::string out_dir = "out";
    int jobs = 1;

    static ExperimentConfig from_doc(const ConfigDoc& doc);
    static ExperimentConfig from_file(const std::string& path);

    /// Structural checks that need no environment. Throws ConfigError.
    void validate() const;
    /// Budget checks against the loaded environment's terminal-state count.
    void validate_budgets(std::size_t terminal_states) const;

    double effective_delta(std::size_t terminal_states) const;
    /// N per terminal state: the configured value, or
    /// ceil(C S K H log(SKH/delta) / eps^2) in lemma1-budget mode.
    long long effective_homing_episodes(int S, int K, int H) const;
    /// Resolved configuration as a document (for config echoes).
    ConfigDoc echo() const;
};

Env load_env(const ExperimentConfig& cfg);

struct PhaseCounts {
    long long homing = 0;
    long long collection = 0;
    long long online = 0;
    long long total() const { return homing + collection + online; }
};

struct ErmSelection {
    int state = -1;
    int hypothesis_index = -1;
    int reward_index = -1;
    int decoder_index = -1;
    double empirical_loss = 0.0;
    std::string reward_name;
    std::string decoder_name;
};

struct RunSummary {
    double optimal_value = 0.0;
    double final_window_true_mean = 0.0;
    double final_window_decoded_mean = 0.0;
    double cumulative_regret = 0.0;
    long long final_window = 0;
};

/// Decoder-phase output (pipeline phases 1-3).
struct DecodeResult {
    Env env;
    IdentifiabilityConstants constants;
    CandidateClasses classes;
    PhaseCounts phases;
    std::vector<VisitationStats> visitation; // per terminal state, layer order
    ReachableSet reachable;
    std::vector<TupleDataset> datasets; // aligned with reachable.states
    FittedDecoder decoder;
    std::vector<ErmSelection> selections;
    bool lower_bound_in_class = false;
    std::vector<std::string> warnings;
};

DecodeResult run_decoder_phases(const ExperimentConfig& cfg, std::uint64_t seed);

struct RunReport {
    std::uint64_t seed = 0;
    PhaseCounts phases;
    std::vector<VisitationStats> visitation;
    std::vector<int> reachable_states;
    std::vector<ErmSelection> selections;
    std::vector<EpisodeMetric> metrics;
    RunSummary summary;
    bool lower_bound_in_class = false;
    std::vector<std::string> warnings;
};

/// The full pipeline for one seed: homing per terminal state, reachable-set
/// construction, tuple collection, per-state ERM, then the online loop for
/// the remaining episode budget. Deterministic given (config, seed).
RunReport run_full_pipeline(const ExperimentConfig& cfg, std::uint64_t seed);

/// Empirical action frequencies conditioned on (context, feedback) from
/// uniform-action play at a terminal state.
struct PosteriorTable {
    long long samples = 0;
    /// frequency[context][symbol] -> action distribution (zeros when the
    /// (context, symbol) cell was never observed)
    std::vector<std::vector<Vec>> frequency;
    std::vector<std::vector<long long>> cell_counts;
};

PosteriorTable monte_carlo_posterior(const Env& env, int terminal_state, long long samples,
                                     Rng& rng);

/// Writes metrics.csv, summary.json (flat key/value), and config.echo under
/// `directory`, overwriting existing files. Throws IoError with path context.
void emit_metrics(const RunReport& report, const ExperimentConfig& cfg, const Env& env,
                  const std::string& directory);

/// Runs every configured seed (fanning out across up to cfg.jobs workers),
/// emits per-seed outputs under <out>/seed_<seed>/, and a merged summary.
std::vector<RunReport> run_experiment(const ExperimentConfig& cfg, bool emit = true);

} // namespace igl
