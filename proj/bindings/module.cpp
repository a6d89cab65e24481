// Python bindings for the core operations: environment construction and
// evaluation, the posterior/surrogate decoders, parameter schedules, and the
// full experiment pipeline.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "igl/config.hpp"
#include "igl/errors.hpp"
#include "igl/decoder.hpp"
#include "igl/env.hpp"
#include "igl/harness.hpp"
#include "igl/online.hpp"
#include "igl/verification.hpp"

namespace py = pybind11;
using namespace igl;

namespace {

TabularPolicy policy_from_rows(const Env& env,
                               const std::vector<std::vector<Vec>>& rows) {
    TabularPolicy policy;
    policy.rows = rows;
    policy.validate(env.contexts.count(), env.mdp.state_count(), env.mdp.action_count);
    return policy;
}

py::dict summary_dict(const RunReport& report, const Env& env) {
    py::dict out;
    out["seed"] = report.seed;
    out["episodes_homing"] = report.phases.homing;
    out["episodes_collection"] = report.phases.collection;
    out["episodes_online"] = report.phases.online;
    out["episodes_total"] = report.phases.total();
    out["optimal_value"] = report.summary.optimal_value;
    out["final_window"] = report.summary.final_window;
    out["final_window_true_mean"] = report.summary.final_window_true_mean;
    out["final_window_decoded_mean"] = report.summary.final_window_decoded_mean;
    out["cumulative_regret"] = report.summary.cumulative_regret;
    out["lower_bound_in_class"] = report.lower_bound_in_class;
    py::list reachable;
    for (int s : report.reachable_states) reachable.append(env.state_labels[s]);
    out["reachable_states"] = reachable;
    py::dict selections;
    for (const ErmSelection& sel : report.selections) {
        py::dict entry;
        entry["reward"] = sel.reward_name;
        entry["decoder"] = sel.decoder_name;
        entry["empirical_loss"] = sel.empirical_loss;
        selections[py::str(env.state_labels[sel.state])] = entry;
    }
    out["erm"] = selections;
    out["warnings"] = report.warnings;
    return out;
}

} // namespace

PYBIND11_MODULE(_igl_core, m) {
    m.doc() = "Latent-reward episodic MDP learning: environment simulation, "
              "inverse-kinematics reward decoding, and occupancy-measure "
              "policy optimization";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<EnvSpecError>(m, "EnvSpecError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<Env>(m, "Env")
        .def_property_readonly("name", [](const Env& e) { return e.name; })
        .def_property_readonly("horizon", [](const Env& e) { return e.mdp.horizon; })
        .def_property_readonly("action_count",
                               [](const Env& e) { return e.mdp.action_count; })
        .def_property_readonly("state_labels",
                               [](const Env& e) { return e.state_labels; })
        .def_property_readonly("action_labels",
                               [](const Env& e) { return e.action_labels; })
        .def_property_readonly("context_labels",
                               [](const Env& e) { return e.contexts.labels; })
        .def_property_readonly("terminal_states",
                               [](const Env& e) {
                                   std::vector<std::string> labels;
                                   for (int s : e.mdp.terminal_layer())
                                       labels.push_back(e.state_labels[s]);
                                   return labels;
                               })
        .def("state_index", &Env::state_index, py::arg("label"))
        .def("context_index", &Env::context_index, py::arg("label"))
        .def("is_heterogeneous", &Env::is_heterogeneous, py::arg("context"),
             py::arg("state"))
        .def(
            "uniform_policy",
            [](const Env& e) { return uniform_policy(e).rows; },
            "Uniform policy rows, indexed [context][state][action].")
        .def(
            "optimal_value",
            [](const Env& e) {
                OptimalValue opt = optimal_value(e);
                return py::make_tuple(opt.value, opt.policy.rows);
            },
            "Exact V* and a maximizing deterministic policy.")
        .def(
            "exact_value",
            [](const Env& e, const std::vector<std::vector<Vec>>& rows) {
                return exact_value(e, policy_from_rows(e, rows));
            },
            py::arg("policy"))
        .def(
            "reach_probability",
            [](const Env& e, const std::vector<std::vector<Vec>>& rows,
               const std::string& state) {
                return reach_probability(e, policy_from_rows(e, rows),
                                         e.state_index(state));
            },
            py::arg("policy"), py::arg("terminal_state"))
        .def(
            "sample_episode",
            [](const Env& e, const std::vector<std::vector<Vec>>& rows,
               std::uint64_t seed) {
                Rng rng(seed);
                Trajectory t = sample_episode(e, policy_from_rows(e, rows), rng);
                py::dict out;
                py::list states, actions;
                for (int s : t.states) states.append(e.state_labels[s]);
                for (int a : t.actions) actions.append(e.action_labels[a]);
                out["context"] = e.contexts.labels[t.context];
                out["states"] = states;
                out["actions"] = actions;
                out["reward"] = t.reward;
                out["feedback"] = t.feedback;
                return out;
            },
            py::arg("policy"), py::arg("seed"))
        .def(
            "true_posterior",
            [](const Env& e, int context, int symbol, const std::string& state) {
                return true_posterior(e, context, symbol, e.state_index(state));
            },
            py::arg("context"), py::arg("symbol"), py::arg("state"),
            "Closed-form action posterior under uniform play at a terminal state.");

    m.def("synthetic_env", &build_synthetic_env, py::arg("p") = 0.1,
          py::arg("p_reward") = 0.1,
          "The built-in two-context benchmark environment.");
    m.def(
        "env_from_file",
        [](const std::string& path) { return env_from_config(ConfigDoc::parse_file(path)); },
        py::arg("path"));

    py::class_<IdentifiabilityConstants>(m, "IdentifiabilityConstants")
        .def_readonly("K", &IdentifiabilityConstants::K)
        .def_readonly("M", &IdentifiabilityConstants::M)
        .def_readonly("c", &IdentifiabilityConstants::c)
        .def_readonly("theta", &IdentifiabilityConstants::theta)
        .def_readonly("kappa", &IdentifiabilityConstants::kappa)
        .def_readonly("xi", &IdentifiabilityConstants::xi)
        .def_readonly("L", &IdentifiabilityConstants::L);

    m.def("derive_constants", &derive_constants, py::arg("K"), py::arg("M"),
          py::arg("c"), py::arg("theta"));
    m.def("ramp", &ramp, py::arg("alpha"), py::arg("beta"), py::arg("lam"));
    m.def(
        "decode_reward",
        [](const Vec& posterior, int action, const IdentifiabilityConstants& cst) {
            return decode_reward(posterior, action, cst);
        },
        py::arg("posterior"), py::arg("action"), py::arg("constants"),
        "Lipschitz reward surrogate J(v, a).");

    m.def(
        "sequential_product",
        [](const std::vector<int>& outcomes, int successors) {
            SequentialProduct p = sequential_product_identity(outcomes, successors);
            return py::make_tuple(p.sequential, p.closed_form);
        },
        py::arg("outcomes"), py::arg("successors"),
        "Sequential predictive product and its closed form.");

    m.def(
        "theory_params",
        [](double T, double S, double K, double H, double L, double reg_sq) {
            TheoryParams p = compute_theory_params(T, S, K, H, L, reg_sq);
            py::dict out;
            out["gamma"] = p.gamma;
            out["n0"] = p.n0;
            out["epsilon"] = p.epsilon;
            return out;
        },
        py::arg("T"), py::arg("S"), py::arg("K"), py::arg("H"), py::arg("L"),
        py::arg("reg_sq"));

    m.def(
        "monte_carlo_posterior",
        [](const Env& env, const std::string& state, long long samples,
           std::uint64_t seed) {
            Rng rng(seed);
            PosteriorTable t =
                monte_carlo_posterior(env, env.state_index(state), samples, rng);
            return t.frequency;
        },
        py::arg("env"), py::arg("state"), py::arg("samples"), py::arg("seed"),
        "Empirical action frequencies by (context, symbol) from uniform play.");

    m.def(
        "run_pipeline",
        [](const std::string& config_path, std::uint64_t seed,
           std::optional<long long> online_episodes, std::optional<double> epsilon,
           std::optional<std::string> out_dir) {
            ExperimentConfig cfg;
            if (!config_path.empty()) cfg = ExperimentConfig::from_file(config_path);
            if (online_episodes) cfg.online_episodes = *online_episodes;
            if (epsilon) cfg.epsilon = *epsilon;
            cfg.validate();
            RunReport report = run_full_pipeline(cfg, seed);
            Env env = load_env(cfg);
            if (out_dir) emit_metrics(report, cfg, env, *out_dir);
            return summary_dict(report, env);
        },
        py::arg("config_path") = "", py::arg("seed") = 1,
        py::arg("online_episodes") = std::nullopt, py::arg("epsilon") = std::nullopt,
        py::arg("out_dir") = std::nullopt,
        "Full pipeline for one seed; returns the run summary.");

    m.def(
        "verify",
        [](std::uint64_t seed) {
            Rng rng(seed);
            py::list out;
            for (const CheckResult& check : run_all_checks(rng)) {
                py::dict entry;
                entry["name"] = check.name;
                entry["pass"] = check.pass;
                entry["detail"] = check.detail;
                out.append(entry);
            }
            return out;
        },
        py::arg("seed") = 12345, "Numerical oracle suites.");
}
