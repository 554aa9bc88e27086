#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stlsynth/cli.hpp"
#include "stlsynth/config.hpp"
#include "stlsynth/env.hpp"
#include "stlsynth/policy.hpp"
#include "stlsynth/tokens.hpp"
#include "stlsynth/trainer.hpp"

namespace py = pybind11;
using namespace stlsynth;

namespace {

Trajectory traj_from_states(const std::vector<std::array<double, 3>>& states) {
    Trajectory traj;
    for (const auto& s : states) traj.states.push_back(State{s[0], s[1], s[2]});
    return traj;
}

// Forward rollout of a checkpointed controller; returns (states, controls,
// attention rows) as plain lists.
py::tuple rollout_checkpoint(const std::string& checkpoint_path,
                             const std::string& spec_text, int horizon) {
    auto [meta, params] = nn::load_checkpoint(checkpoint_path);
    policy::Arch arch = policy::arch_from_meta(meta);
    Formula spec = parse(spec_text);
    env::UnicycleConfig envcfg;
    if (horizon > 0) envcfg.horizon = horizon;

    ad::Tape tape;
    nn::BoundParams bound = nn::bind(tape, params, false);
    auto dynamics = [&](ad::Tape& t, ad::Value x, ad::Value u) {
        return env::unicycle_step(t, x, u, envcfg.dt);
    };
    auto lo = envcfg.u_min();
    auto hi = envcfg.u_max();
    policy::RolloutResult r = policy::rollout(tape, arch, bound, spec, envcfg.x0,
                                              envcfg.horizon, dynamics, lo, hi);
    Trajectory traj = policy::to_trajectory(r);

    std::vector<std::array<double, 3>> states;
    for (const State& s : traj.states) states.push_back({s[0], s[1], s[2]});
    std::vector<std::array<double, 2>> controls;
    for (const Control& u : traj.controls) controls.push_back({u[0], u[1]});
    std::vector<std::vector<double>> attention;
    for (const ad::Value& a : r.attention)
        attention.emplace_back(a.data().begin(), a.data().end());
    return py::make_tuple(states, controls, attention,
                          robustness(spec, traj, 0));
}

}  // namespace

PYBIND11_MODULE(_stlsynth, m) {
    m.doc() = "neural controller synthesis for signal temporal logic";

    py::register_exception<ParseError>(m, "FormulaParseError", PyExc_ValueError);
    py::register_exception<FormulaError>(m, "FormulaError", PyExc_ValueError);
    py::register_exception<HorizonError>(m, "HorizonError", PyExc_ValueError);

    m.def(
        "parse_format",
        [](const std::string& text) { return format(parse(text)); },
        py::arg("text"),
        "Parse a formula and return its canonical rendering.");

    m.def(
        "tokenize",
        [](const std::string& text) {
            TokenSeq seq = tokenize(parse(text));
            std::vector<std::vector<double>> vectors;
            for (const TokenVector& v : seq.vectors)
                vectors.emplace_back(v.begin(), v.end());
            return py::make_tuple(vectors, seq.labels);
        },
        py::arg("text"),
        "Token vectors and labels of a formula (14-dim per element).");

    m.def(
        "spec_graph",
        [](const std::string& text) {
            SpecGraph g = to_graph(parse(text));
            std::vector<std::tuple<int, int, int>> edges;
            for (const auto& e : g.edges) edges.emplace_back(e.src, e.dst, e.relation);
            return py::make_tuple(g.node_labels, edges, g.root);
        },
        py::arg("text"),
        "Graph view: (node labels, edges as (src, dst, relation), root index).");

    m.def(
        "robustness",
        [](const std::string& text, const std::vector<std::array<double, 3>>& states,
           int start) {
            return robustness(parse(text), traj_from_states(states), start);
        },
        py::arg("text"), py::arg("states"), py::arg("start") = 0,
        "Hard quantitative robustness of a formula over a state sequence.");

    m.def(
        "bool_sat",
        [](const std::string& text, const std::vector<std::array<double, 3>>& states,
           int start) {
            return bool_sat(parse(text), traj_from_states(states), start);
        },
        py::arg("text"), py::arg("states"), py::arg("start") = 0,
        "Boolean satisfaction of a formula over a state sequence.");

    m.def(
        "smooth_robustness",
        [](const std::string& text, const std::vector<std::array<double, 3>>& states,
           double beta, int start) {
            ad::Tape tape;
            std::vector<ad::Value> vals;
            for (const auto& s : states)
                vals.push_back(
                    tape.leaf(ad::Shape{3, 1}, std::span<const double>(s.data(), 3)));
            return smooth_robustness(parse(text), vals, SmoothConfig{beta}, start)
                .scalar();
        },
        py::arg("text"), py::arg("states"), py::arg("beta") = 5.0, py::arg("start") = 0,
        "Log-sum-exp smoothed robustness at scale beta.");

    m.def(
        "smooth_robustness_grad",
        [](const std::string& text, const std::vector<std::array<double, 3>>& states,
           double beta, int start) {
            ad::Tape tape;
            std::vector<ad::Value> vals;
            for (const auto& s : states)
                vals.push_back(tape.leaf(ad::Shape{3, 1},
                                         std::span<const double>(s.data(), 3), true));
            ad::Value rho =
                smooth_robustness(parse(text), vals, SmoothConfig{beta}, start);
            tape.backward(rho);
            std::vector<std::array<double, 3>> grads;
            for (const ad::Value& v : vals) {
                auto g = v.grad();
                grads.push_back(g.empty() ? std::array<double, 3>{0, 0, 0}
                                          : std::array<double, 3>{g[0], g[1], g[2]});
            }
            return py::make_tuple(rho.scalar(), grads);
        },
        py::arg("text"), py::arg("states"), py::arg("beta") = 5.0, py::arg("start") = 0,
        "Smoothed robustness and its gradient with respect to each state.");

    m.def(
        "unicycle_step",
        [](const std::array<double, 3>& x, const std::array<double, 2>& u, double dt) {
            State nxt = env::unicycle_step(State{x[0], x[1], x[2]}, Control{u[0], u[1]}, dt);
            return std::array<double, 3>{nxt[0], nxt[1], nxt[2]};
        },
        py::arg("x"), py::arg("u"), py::arg("dt") = 1.0,
        "Exact zero-order-hold unicycle step.");

    m.def(
        "sample_spec",
        [](const std::string& family, std::uint64_t seed) {
            env::UnicycleConfig cfg;
            Rng rng(seed);
            return format(env::sample_spec(env::template_from_string(family), rng, cfg));
        },
        py::arg("family"), py::arg("seed"),
        "Sample one concrete specification from a template family "
        "(T1-T4, TP1-TP3, F).");

    m.def(
        "check_feasible",
        [](const std::string& text, std::uint64_t seed) {
            env::UnicycleConfig cfg;
            Rng rng(seed);
            env::FeasibilityResult r = env::check_feasible(parse(text), cfg, rng);
            return py::make_tuple(r.feasible, r.hard_robustness);
        },
        py::arg("text"), py::arg("seed") = 0,
        "Multi-start trajectory-optimization feasibility oracle.");

    m.def("count_structural_variants", &env::count_structural_variants,
          "Distinct canonical formula skeletons of the T1-T4 family.");

    m.def(
        "train",
        [](const std::string& config_text, const std::string& checkpoint_out) {
            RunConfig cfg = parse_config_text(config_text);
            trainer::TrainResult result = trainer::train(cfg.train);
            nn::save_checkpoint(checkpoint_out, policy::to_meta(cfg.train.arch),
                                result.params);
            std::vector<std::pair<int, double>> losses;
            for (const auto& it : result.log) losses.emplace_back(it.iteration, it.loss);
            return losses;
        },
        py::arg("config_text"), py::arg("checkpoint_out"),
        "Train a controller from a config string; returns (iteration, loss) pairs.");

    m.def("rollout", &rollout_checkpoint, py::arg("checkpoint"), py::arg("spec"),
          py::arg("horizon") = 0,
          "Closed-loop rollout of a checkpoint on a spec: returns (states, "
          "controls, attention, robustness).");

    m.def(
        "adapt",
        [](const std::string& checkpoint_in, const std::string& spec_text,
           double threshold, int max_steps, const std::string& checkpoint_out) {
            auto [meta, params] = nn::load_checkpoint(checkpoint_in);
            policy::Arch arch = policy::arch_from_meta(meta);
            trainer::AdaptConfig acfg;
            acfg.threshold = threshold;
            acfg.max_steps = max_steps;
            env::UnicycleConfig envcfg;
            trainer::AdaptResult r =
                trainer::adapt(params, arch, parse(spec_text), acfg, envcfg);
            if (!checkpoint_out.empty())
                nn::save_checkpoint(checkpoint_out, meta, r.params);
            return py::make_tuple(r.steps, r.converged, r.robustness);
        },
        py::arg("checkpoint"), py::arg("spec"), py::arg("threshold") = 0.05,
        py::arg("max_steps") = 2000, py::arg("checkpoint_out") = std::string(),
        "Decoder-only adaptation; returns (steps, converged, robustness).");

    m.def(
        "run_cli", [](const std::vector<std::string>& argv) {
            return cli::run_command(argv);
        },
        py::arg("argv"), "Invoke the command-line interface in-process.");

    m.def("default_config", &default_config_text,
          "The full default configuration file text.");
}
