#include "stlsynth/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "stlsynth/config.hpp"
#include "stlsynth/export.hpp"
#include "stlsynth/tokens.hpp"

namespace stlsynth::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitBadConfig = 2;
constexpr int kExitMissingCheckpoint = 3;

int eval_threads() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* cap = std::getenv("STL_SYNTH_THREADS")) {
        int c = std::atoi(cap);
        if (c >= 1) hw = std::min(hw, c);
    }
    return hw;
}

struct CommonOpts {
    std::string config_path;
    std::string checkpoint_path;
    std::string spec_text;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
};

RunConfig load_config(const CommonOpts& opts) {
    if (opts.config_path.empty()) throw ConfigError("--config is required");
    RunConfig cfg = parse_config_file(opts.config_path);
    if (opts.seed) cfg.train.seed = *opts.seed;
    cfg.train.eval_threads = eval_threads();
    return cfg;
}

std::pair<nn::CheckpointMeta, nn::ParamSet> load_required_checkpoint(
    const CommonOpts& opts) {
    if (opts.checkpoint_path.empty() || !fs::exists(opts.checkpoint_path))
        throw std::invalid_argument("checkpoint not found: " + opts.checkpoint_path);
    return nn::load_checkpoint(opts.checkpoint_path);
}

fs::path ensure_out_dir(const CommonOpts& opts) {
    fs::path dir(opts.out_dir);
    fs::create_directories(dir);
    return dir;
}

int cmd_train(const CommonOpts& opts) {
    RunConfig cfg = load_config(opts);
    fs::path out = ensure_out_dir(opts);
    nn::CheckpointMeta meta = policy::to_meta(cfg.train.arch);
    auto on_eval = [&](int iteration, const nn::ParamSet& params) {
        (void)iteration;
        nn::save_checkpoint((out / "checkpoint_eval.bin").string(), meta, params);
    };
    trainer::TrainResult result = trainer::train(cfg.train, on_eval);
    nn::save_checkpoint((out / "checkpoint.bin").string(), meta, result.params);
    write_file((out / "metrics.csv").string(), metrics_csv(result.log));
    if (!result.heldout.groups.empty())
        env::save_spec_set((out / "heldout_specs.txt").string(), result.heldout);
    std::cout << "trained " << cfg.train.iterations << " iterations; checkpoint: "
              << (out / "checkpoint.bin").string() << "\n";
    return kExitOk;
}

int cmd_eval(const CommonOpts& opts) {
    RunConfig cfg = load_config(opts);
    auto [meta, params] = load_required_checkpoint(opts);
    policy::Arch arch = policy::arch_from_meta(meta);
    if (cfg.spec_set_path.empty())
        throw ConfigError("eval needs paths.spec_set in the config");
    env::SpecSet set;
    try {
        set = env::load_spec_set(cfg.spec_set_path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (set.total() == 0) throw ConfigError("spec set is empty: " + cfg.spec_set_path);
    fs::path out = ensure_out_dir(opts);
    std::vector<TemplateEvalRow> rows;
    for (const auto& [family, specs] : set.groups) {
        trainer::EvalStats stats = trainer::evaluate(arch, params, specs, cfg.train.env,
                                                     cfg.train.eval_threads);
        rows.push_back(TemplateEvalRow{env::to_string(family), stats.avg_robustness,
                                       stats.success_rate});
    }
    std::string csv = eval_csv(rows);
    write_file((out / "eval.csv").string(), csv);
    std::cout << csv;
    return kExitOk;
}

int cmd_adapt(const CommonOpts& opts) {
    RunConfig cfg = load_config(opts);
    auto [meta, params] = load_required_checkpoint(opts);
    policy::Arch arch = policy::arch_from_meta(meta);
    if (opts.spec_text.empty()) throw ConfigError("adapt needs --spec");
    Formula spec = parse(opts.spec_text);
    fs::path out = ensure_out_dir(opts);
    trainer::AdaptResult result =
        trainer::adapt(params, arch, spec, cfg.adapt, cfg.train.env);
    nn::save_checkpoint((out / "checkpoint_adapted.bin").string(), meta, result.params);
    std::cout << "steps=" << result.steps
              << " converged=" << (result.converged ? "true" : "false")
              << " robustness=" << format_double(result.robustness) << "\n";
    return kExitOk;
}

int cmd_rollout(const CommonOpts& opts) {
    RunConfig cfg = load_config(opts);
    auto [meta, params] = load_required_checkpoint(opts);
    policy::Arch arch = policy::arch_from_meta(meta);
    if (opts.spec_text.empty()) throw ConfigError("rollout needs --spec");
    Formula spec = parse(opts.spec_text);
    fs::path out = ensure_out_dir(opts);

    ad::Tape tape;
    nn::BoundParams bound = nn::bind(tape, params, false);
    auto dynamics = [&](ad::Tape& t, ad::Value x, ad::Value u) {
        return env::unicycle_step(t, x, u, cfg.train.env.dt);
    };
    auto lo = cfg.train.env.u_min();
    auto hi = cfg.train.env.u_max();
    policy::RolloutResult r = policy::rollout(tape, arch, bound, spec, cfg.train.env.x0,
                                              cfg.train.env.horizon, dynamics, lo, hi);
    Trajectory traj = policy::to_trajectory(r);
    write_file((out / "trajectory.csv").string(), trajectory_csv(traj));
    write_file((out / "rollout.svg").string(), rollout_svg(spec, traj));
    if (arch.attention) {
        std::vector<std::vector<double>> weights;
        for (const ad::Value& a : r.attention)
            weights.emplace_back(a.data().begin(), a.data().end());
        write_file((out / "attention.csv").string(),
                   attention_csv(r.encoder.labels, weights));
    }
    std::cout << "robustness=" << format_double(robustness(spec, traj, 0)) << "\n";
    return kExitOk;
}

int cmd_gen_specs(const CommonOpts& opts) {
    RunConfig cfg = load_config(opts);
    fs::path out = ensure_out_dir(opts);
    Rng rng(cfg.train.seed);
    env::SpecSet set = env::build_test_set(cfg.train.templates, cfg.gen_per_template,
                                           rng, cfg.train.env);
    set.seed = cfg.train.seed;
    env::save_spec_set((out / "specs.txt").string(), set);
    std::cout << "wrote " << set.total() << " specs to "
              << (out / "specs.txt").string() << "\n";
    return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& argv) {
    CLI::App app{"neural controller synthesis for signal temporal logic"};
    app.require_subcommand(1);

    CommonOpts opts;
    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* c = cmd->add_option("--config", opts.config_path, "run configuration file");
        if (needs_config) c->required();
        cmd->add_option("--checkpoint", opts.checkpoint_path, "checkpoint file");
        cmd->add_option("--spec", opts.spec_text, "formula text");
        cmd->add_option("--seed", opts.seed, "override the config seed");
        cmd->add_option("--out", opts.out_dir, "output directory");
    };

    CLI::App* train = app.add_subcommand("train", "train a controller");
    add_common(train, true);
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a spec set");
    add_common(eval, true);
    CLI::App* adapt = app.add_subcommand("adapt", "decoder-only adaptation to one spec");
    add_common(adapt, true);
    CLI::App* rollout = app.add_subcommand("rollout", "roll out one spec and export");
    add_common(rollout, true);
    CLI::App* gen = app.add_subcommand("gen-specs", "generate a feasible spec set");
    add_common(gen, true);
    CLI::App* self = app.add_subcommand("selftest", "run the invariant suite");
    add_common(self, false);

    try {
        // CLI11's vector overload expects the arguments reversed.
        std::vector<std::string> reversed(argv.rbegin(), argv.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitBadConfig;
    }

    try {
        if (train->parsed()) return cmd_train(opts);
        if (eval->parsed()) return cmd_eval(opts);
        if (adapt->parsed()) return cmd_adapt(opts);
        if (rollout->parsed()) return cmd_rollout(opts);
        if (gen->parsed()) return cmd_gen_specs(opts);
        if (self->parsed()) return selftest() ? kExitOk : kExitFailure;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitBadConfig;
    } catch (const ParseError& e) {
        std::cerr << "formula error: " << e.what() << "\n";
        return kExitBadConfig;
    } catch (const FormulaError& e) {
        std::cerr << "formula error: " << e.what() << "\n";
        return kExitBadConfig;
    } catch (const HorizonError& e) {
        std::cerr << "horizon error: " << e.what() << "\n";
        return kExitBadConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissingCheckpoint;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitBadConfig;
}

// ---------------------------------------------------------------------------
// Self test
// ---------------------------------------------------------------------------

namespace {

bool report(const char* name, bool ok) {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
    return ok;
}

Formula random_formula(Rng& rng, int depth) {
    auto random_rect = [&] {
        double a = rng.uniform(-2.0, 4.0);
        double c = rng.uniform(-2.0, 4.0);
        return RectPredicate{a, a + rng.uniform(0.5, 2.0), c, c + rng.uniform(0.5, 2.0)};
    };
    auto random_window = [&] {
        int lo = rng.uniform_int(0, 3);
        return Interval{lo, lo + rng.uniform_int(0, 3)};
    };
    if (depth <= 0 || rng.uniform() < 0.25) {
        Formula p = Formula::pred(random_rect());
        return rng.uniform() < 0.2 ? Formula::negate(p) : p;
    }
    switch (rng.uniform_int(0, 4)) {
        case 0: return Formula::conj(random_formula(rng, depth - 1),
                                     random_formula(rng, depth - 1));
        case 1: return Formula::disj(random_formula(rng, depth - 1),
                                     random_formula(rng, depth - 1));
        case 2: return Formula::eventually(random_window(), random_formula(rng, depth - 1));
        case 3: return Formula::always(random_window(), random_formula(rng, depth - 1));
        default: return Formula::until(random_window(), random_formula(rng, depth - 1),
                                       random_formula(rng, depth - 1));
    }
}

bool check_round_trip() {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        Formula f = random_formula(rng, 4);
        if (!parse(format(f)).structurally_equal(f)) return false;
    }
    return true;
}

bool check_token_vectors() {
    TokenVector conj = token_vector_and();
    TokenVector expect{};
    expect[1] = 1.0;
    if (conj != expect) return false;
    TokenVector iv = token_vector_interval(4, 7);
    if (iv[8] != 4.0 || iv[9] != 7.0) return false;
    TokenVector pv = token_vector_predicate(RectPredicate{1, 2, 3, 4});
    return pv[10] == 1.0 && pv[11] == 2.0 && pv[12] == 3.0 && pv[13] == 4.0;
}

bool check_gradients() {
    using ad::Tape;
    using ad::Value;
    // tanh then sum.
    auto f1 = [](Tape& t, Value x) { return t.sum(t.tanh(x)); };
    std::vector<double> p1 = {0.3, -1.2, 0.9};
    if (ad::grad_check(f1, p1, 1e-5) > 1e-6) return false;
    // smooth max over components.
    auto f2 = [](Tape& t, Value x) {
        std::vector<Value> xs;
        for (int i = 0; i < x.shape().rows; ++i) xs.push_back(t.slice(x, i, 1));
        return t.smooth_max(xs, 5.0);
    };
    std::vector<double> p2 = {0.1, 0.4, -0.7, 0.2};
    if (ad::grad_check(f2, p2, 1e-5) > 1e-6) return false;
    // unicycle arc branch, all five inputs.
    auto f3 = [](Tape& t, Value x) {
        Value state = t.slice(x, 0, 3);
        Value u = t.slice(x, 3, 2);
        return t.sum(env::unicycle_step(t, state, u, 1.0));
    };
    std::vector<double> p3 = {0.5, -0.2, 0.7, 1.1, 0.6};
    return ad::grad_check(f3, p3, 1e-5) <= 1e-5;
}

bool check_squash_bounds() {
    Rng rng(5);
    ad::Tape t;
    std::vector<double> wdata = {1.0, 0.0, 0.0, 1.0};
    ad::Value W = t.leaf(ad::Shape{2, 2}, wdata);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> pre = {rng.uniform(-40.0, 40.0), rng.uniform(-40.0, 40.0)};
        ad::Value x = t.leaf(ad::Shape{2, 1}, pre);
        std::array<double, 2> lo = {-1.5, -1.0}, hi = {1.5, 1.0};
        ad::Value u = nn::output_squash(t, W, x, lo, hi);
        for (int k = 0; k < 2; ++k)
            if (!(u.data()[static_cast<std::size_t>(k)] > lo[static_cast<std::size_t>(k)] &&
                  u.data()[static_cast<std::size_t>(k)] < hi[static_cast<std::size_t>(k)]))
                return false;
    }
    return true;
}

bool check_until_oracle() {
    Rng rng(7);
    RectPredicate probe{0, 4, 0, 4};  // margin at (m, 2) is exactly m
    Formula left = Formula::pred(probe);
    Formula right = Formula::pred(RectPredicate{0, 2, 0, 4});  // margin min(m, 2-m)
    for (int trial = 0; trial < 200; ++trial) {
        int len = rng.uniform_int(3, 7);
        Trajectory traj;
        for (int i = 0; i < len; ++i)
            traj.states.push_back(State{rng.uniform(-1.5, 1.5), 2.0, 0.0});
        int lo = rng.uniform_int(0, len - 1);
        int hi = rng.uniform_int(lo, len - 1);
        Formula f = Formula::until(Interval{lo, hi}, left, right);
        // Straight-loop reference of the until definition.
        double expect = -HUGE_VAL;
        for (int t1 = lo; t1 <= hi; ++t1) {
            double inner = robustness(right, traj, t1);
            for (int t2 = 0; t2 <= t1; ++t2)
                inner = std::min(inner, robustness(left, traj, t2));
            expect = std::max(expect, inner);
        }
        if (std::abs(robustness(f, traj, 0) - expect) > 1e-12) return false;
        if (bool_sat(f, traj, 0) != (expect > 0.0) && std::abs(expect) > 1e-9)
            return false;
    }
    return true;
}

bool check_smooth_bounds() {
    Rng rng(13);
    for (int trial = 0; trial < 500; ++trial) {
        int m = rng.uniform_int(2, 17);
        double beta = (trial % 3 == 0) ? 1.0 : (trial % 3 == 1 ? 5.0 : 10.0);
        ad::Tape t;
        std::vector<ad::Value> xs;
        double hard_max = -HUGE_VAL, hard_min = HUGE_VAL;
        for (int i = 0; i < m; ++i) {
            double v = rng.uniform(-3.0, 3.0);
            hard_max = std::max(hard_max, v);
            hard_min = std::min(hard_min, v);
            xs.push_back(t.scalar(v));
        }
        double smax = t.smooth_max(xs, beta).scalar();
        double smin = t.smooth_min(xs, beta).scalar();
        double gap = std::log(static_cast<double>(m)) / beta;
        if (!(smax >= hard_max && smax <= hard_max + gap)) return false;
        if (!(smin <= hard_min && smin >= hard_min - gap)) return false;
    }
    return true;
}

bool check_unicycle_continuity() {
    Rng rng(17);
    for (int i = 0; i < 100; ++i) {
        State x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-3, 3)};
        double v = rng.uniform(-1.5, 1.5);
        State arc = env::unicycle_step(x, Control{v, 1e-6}, 1.0);
        State straight = env::unicycle_step(x, Control{v, 0.0}, 1.0);
        for (int k = 0; k < 2; ++k)
            if (std::abs(arc[static_cast<std::size_t>(k)] -
                         straight[static_cast<std::size_t>(k)]) > 1e-6)
                return false;
    }
    return true;
}

bool check_checkpoint_round_trip() {
    Rng rng(23);
    policy::Arch arch;
    arch.variant = policy::EncoderVariant::Sequential;
    arch.attention = true;
    arch.encoder_hidden = 8;
    arch.decoder_hidden = 4;
    arch.embedding_dim = 4;
    arch.attention_dim = 4;
    nn::ParamSet params = policy::make_params(arch);
    nn::init_params(params, rng);
    std::string path =
        (fs::temp_directory_path() / "stlsynth_selftest_ckpt.bin").string();
    nn::save_checkpoint(path, policy::to_meta(arch), params);
    auto [meta, loaded] = nn::load_checkpoint(path);
    fs::remove(path);
    if (meta.encoder != "sequential" || !meta.attention) return false;
    if (loaded.size() != params.size()) return false;
    for (const auto& [name, tensor] : params) {
        const nn::Tensor& other = loaded.at(name);
        if (!(other.shape == tensor.shape) || other.data != tensor.data) return false;
    }
    return true;
}

}  // namespace

bool selftest() {
    bool ok = true;
    ok &= report("parse/format round trip", check_round_trip());
    ok &= report("token vectors", check_token_vectors());
    ok &= report("gradient checks", check_gradients());
    ok &= report("output squash bounds", check_squash_bounds());
    ok &= report("until robustness vs straight-loop reference", check_until_oracle());
    ok &= report("log-sum-exp sandwich bounds", check_smooth_bounds());
    ok &= report("unicycle arc/straight continuity", check_unicycle_continuity());
    ok &= report("checkpoint bit-exact round trip", check_checkpoint_round_trip());
    return ok;
}

}  // namespace stlsynth::cli
