#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "stlsynth/env.hpp"
#include "stlsynth/nn.hpp"
#include "stlsynth/policy.hpp"

namespace stlsynth::trainer {

struct TrainConfig {
    int iterations = 2000;        // outer loop length
    int pairs_per_iteration = 4;  // batch size; templates are cycled round-robin
    double beta = 5.0;            // smooth robustness scale during training
    nn::AdamConfig adam;          // lr defaults to 3e-4
    double clip_norm = 10.0;      // global-norm gradient clip, 0 disables
    policy::Arch arch;
    std::uint64_t seed = 0;
    std::vector<env::TemplateFamily> templates{env::TemplateFamily::T1,
                                               env::TemplateFamily::T2,
                                               env::TemplateFamily::T3,
                                               env::TemplateFamily::T4};
    env::UnicycleConfig env;
    int eval_every = 50;   // held-out evaluation cadence; 0 disables
    int eval_specs = 50;   // held-out set size (split across templates)
    int eval_threads = 1;
};

struct AdaptConfig {
    double threshold = 0.05;  // required hard robustness, > 0
    int max_steps = 2000;
    nn::AdamConfig adam;
    double beta = 5.0;
    double clip_norm = 10.0;
};

struct IterMetrics {
    int iteration = 0;  // 1-based
    double loss = 0.0;
    bool evaluated = false;
    double eval_success_rate = 0.0;
    double eval_avg_robustness = 0.0;
    double wallclock_s = 0.0;
};

struct TrainResult {
    nn::ParamSet params;
    std::vector<IterMetrics> log;
    env::SpecSet heldout;
};

struct EvalStats {
    double success_rate = 0.0;    // fraction with hard robustness > 0
    double avg_robustness = 0.0;  // mean hard robustness
};

using TrainPair = std::pair<State, Formula>;

// Negative mean smooth robustness of closed-loop rollouts for the batch,
// recorded on the given tape.
ad::Value compute_loss(ad::Tape& tape, const policy::Arch& arch,
                       const nn::BoundParams& bound, std::span<const TrainPair> batch,
                       const env::UnicycleConfig& envcfg, double beta);

// Hard-semantics evaluation of frozen params over a spec list.
EvalStats evaluate(const policy::Arch& arch, const nn::ParamSet& params,
                   std::span<const Formula> specs, const env::UnicycleConfig& envcfg,
                   int threads = 1);

// Called after an iteration whose metrics include a held-out evaluation.
using EvalHook = std::function<void(int iteration, const nn::ParamSet&)>;

TrainResult train(const TrainConfig& cfg, const EvalHook& on_eval = nullptr);

struct AdaptResult {
    nn::ParamSet params;
    int steps = 0;
    bool converged = false;
    double robustness = 0.0;
};

// Decoder-only gradient steps until the spec's hard robustness reaches the
// threshold or the budget runs out (returns the best parameters seen).
// Parameters outside the "dec." prefix are bit-identical before and after.
AdaptResult adapt(const nn::ParamSet& params, const policy::Arch& arch,
                  const Formula& spec, const AdaptConfig& cfg,
                  const env::UnicycleConfig& envcfg);

}  // namespace stlsynth::trainer
