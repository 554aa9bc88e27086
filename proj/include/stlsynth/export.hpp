#pragma once

#include <string>
#include <vector>

#include "stlsynth/env.hpp"
#include "stlsynth/trainer.hpp"

namespace stlsynth {

// CSV schemas are fixed per command (documented in the README).

// iteration,loss,eval_success_rate,eval_avg_robustness,wallclock_s
// (eval columns are empty on iterations without a held-out evaluation).
std::string metrics_csv(const std::vector<trainer::IterMetrics>& log);

// template,avg_robustness,success_rate
struct TemplateEvalRow {
    std::string template_name;
    double avg_robustness = 0.0;
    double success_rate = 0.0;
};
std::string eval_csv(const std::vector<TemplateEvalRow>& rows);

// t,qx,qy,theta,v,omega (the final state row has empty control columns).
std::string trajectory_csv(const Trajectory& traj);

// token,t0,...,t{T-1}: one row per encoder key label.
std::string attention_csv(const std::vector<std::string>& labels,
                          const std::vector<std::vector<double>>& weights_per_step);

// Trajectory overlaid on the spec's rectangles: one <rect> per predicate,
// one <circle> per trajectory point.
std::string rollout_svg(const Formula& spec, const Trajectory& traj);

void write_file(const std::string& path, const std::string& content);

}  // namespace stlsynth
