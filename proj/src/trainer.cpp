#include "stlsynth/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace stlsynth::trainer {

namespace {

policy::RolloutResult run_rollout(ad::Tape& tape, const policy::Arch& arch,
                                  const nn::BoundParams& bound, const Formula& spec,
                                  const State& x0, const env::UnicycleConfig& envcfg) {
    auto dynamics = [&envcfg](ad::Tape& t, ad::Value x, ad::Value u) {
        return env::unicycle_step(t, x, u, envcfg.dt);
    };
    auto lo = envcfg.u_min();
    auto hi = envcfg.u_max();
    return policy::rollout(tape, arch, bound, spec, x0, envcfg.horizon, dynamics,
                           lo, hi);
}

double hard_rollout_robustness(const policy::Arch& arch, const nn::ParamSet& params,
                               const Formula& spec, const env::UnicycleConfig& envcfg) {
    ad::Tape tape;
    nn::BoundParams bound = nn::bind(tape, params, false);
    policy::RolloutResult r = run_rollout(tape, arch, bound, spec, envcfg.x0, envcfg);
    return robustness(spec, policy::to_trajectory(r), 0);
}

}  // namespace

ad::Value compute_loss(ad::Tape& tape, const policy::Arch& arch,
                       const nn::BoundParams& bound, std::span<const TrainPair> batch,
                       const env::UnicycleConfig& envcfg, double beta) {
    if (batch.empty()) throw std::runtime_error("compute_loss on empty batch");
    ad::Value acc;
    for (const auto& [x0, spec] : batch) {
        policy::RolloutResult r = run_rollout(tape, arch, bound, spec, x0, envcfg);
        ad::Value rho = smooth_robustness(spec, r.states, SmoothConfig{beta}, 0);
        acc = acc.valid() ? tape.add(acc, rho) : rho;
    }
    return tape.scale(acc, -1.0 / static_cast<double>(batch.size()));
}

EvalStats evaluate(const policy::Arch& arch, const nn::ParamSet& params,
                   std::span<const Formula> specs, const env::UnicycleConfig& envcfg,
                   int threads) {
    if (specs.empty()) return {};
    std::vector<double> rho(specs.size(), 0.0);
    int n_threads = std::max(1, threads);
    if (n_threads == 1) {
        for (std::size_t i = 0; i < specs.size(); ++i)
            rho[i] = hard_rollout_robustness(arch, params, specs[i], envcfg);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= specs.size()) return;
                rho[i] = hard_rollout_robustness(arch, params, specs[i], envcfg);
            }
        };
        std::vector<std::thread> pool;
        for (int k = 0; k < n_threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    EvalStats stats;
    double sum = 0.0;
    int success = 0;
    for (double v : rho) {
        sum += v;
        if (v > 0.0) ++success;
    }
    stats.success_rate = static_cast<double>(success) / static_cast<double>(rho.size());
    stats.avg_robustness = sum / static_cast<double>(rho.size());
    return stats;
}

TrainResult train(const TrainConfig& cfg, const EvalHook& on_eval) {
    if (cfg.iterations < 0 || cfg.pairs_per_iteration < 1)
        throw std::runtime_error("invalid training configuration");
    if (cfg.templates.empty())
        throw std::runtime_error("no training templates configured");

    Rng rng(cfg.seed);
    Rng init_rng = rng.fork(1);
    Rng heldout_rng = rng.fork(2);
    Rng sample_rng = rng.fork(3);

    TrainResult result;
    result.params = policy::make_params(cfg.arch);
    nn::init_params(result.params, init_rng);

    std::vector<Formula> heldout_flat;
    if (cfg.eval_every > 0 && cfg.iterations > 0) {
        int per = std::max(1, cfg.eval_specs / static_cast<int>(cfg.templates.size()));
        result.heldout =
            env::build_test_set(cfg.templates, per, heldout_rng, cfg.env);
        result.heldout.seed = cfg.seed;
        for (const auto& [family, specs] : result.heldout.groups)
            heldout_flat.insert(heldout_flat.end(), specs.begin(), specs.end());
    }

    nn::AdamState adam(cfg.adam);
    auto start = std::chrono::steady_clock::now();

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        std::vector<TrainPair> batch;
        batch.reserve(static_cast<std::size_t>(cfg.pairs_per_iteration));
        for (int j = 0; j < cfg.pairs_per_iteration; ++j) {
            env::TemplateFamily family =
                cfg.templates[static_cast<std::size_t>(j) % cfg.templates.size()];
            batch.emplace_back(cfg.env.x0, env::sample_spec(family, sample_rng, cfg.env));
        }

        ad::Tape tape;
        nn::BoundParams bound = nn::bind(tape, result.params, true);
        ad::Value loss = compute_loss(tape, cfg.arch, bound, batch, cfg.env, cfg.beta);
        if (!std::isfinite(loss.scalar()))
            throw std::runtime_error("non-finite loss at iteration " +
                                     std::to_string(iter));
        tape.backward(loss);
        nn::GradMap grads = nn::collect_grads(result.params, bound);
        if (cfg.clip_norm > 0.0) nn::clip_grads(grads, cfg.clip_norm);
        nn::adam_step(adam, result.params, grads);

        IterMetrics m;
        m.iteration = iter;
        m.loss = loss.scalar();
        if (cfg.eval_every > 0 && iter % cfg.eval_every == 0 && !heldout_flat.empty()) {
            EvalStats stats = evaluate(cfg.arch, result.params, heldout_flat, cfg.env,
                                       cfg.eval_threads);
            m.evaluated = true;
            m.eval_success_rate = stats.success_rate;
            m.eval_avg_robustness = stats.avg_robustness;
        }
        m.wallclock_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        result.log.push_back(m);
        if (m.evaluated && on_eval) on_eval(iter, result.params);
    }
    return result;
}

AdaptResult adapt(const nn::ParamSet& params, const policy::Arch& arch,
                  const Formula& spec, const AdaptConfig& cfg,
                  const env::UnicycleConfig& envcfg) {
    if (cfg.threshold <= 0.0)
        throw std::runtime_error("adaptation threshold must be positive");

    AdaptResult result;
    result.params = params;
    nn::AdamState adam(cfg.adam);

    double rho = hard_rollout_robustness(arch, result.params, spec, envcfg);
    nn::ParamSet best = result.params;
    double best_rho = rho;

    while (rho < cfg.threshold && result.steps < cfg.max_steps) {
        ad::Tape tape;
        // Gradients flow only into decoder (and attention) weights.
        nn::BoundParams bound;
        for (const auto& [name, tensor] : result.params)
            bound.emplace(name,
                          tape.leaf(tensor.shape, tensor.data,
                                    name.rfind(policy::kDecoderPrefix, 0) == 0));
        std::array<TrainPair, 1> batch{TrainPair{envcfg.x0, spec}};
        ad::Value loss = compute_loss(tape, arch, bound, batch, envcfg, cfg.beta);
        if (!std::isfinite(loss.scalar()))
            throw std::runtime_error("non-finite loss during adaptation");
        tape.backward(loss);
        nn::GradMap grads = nn::collect_grads(result.params, bound);
        if (cfg.clip_norm > 0.0) nn::clip_grads(grads, cfg.clip_norm);
        nn::adam_step(adam, result.params, grads);
        result.steps += 1;

        rho = hard_rollout_robustness(arch, result.params, spec, envcfg);
        if (rho > best_rho) {
            best_rho = rho;
            best = result.params;
        }
    }
    result.converged = rho >= cfg.threshold;
    if (!result.converged) {
        result.params = best;
        result.robustness = best_rho;
    } else {
        result.robustness = rho;
    }
    return result;
}

}  // namespace stlsynth::trainer
