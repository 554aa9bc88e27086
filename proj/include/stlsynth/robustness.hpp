#pragma once

#include <array>
#include <span>
#include <vector>

#include "stlsynth/formula.hpp"
#include "stlsynth/tape.hpp"

namespace stlsynth {

class HorizonError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// State (q_x, q_y, theta).
using State = std::array<double, 3>;
// Control (v, omega).
using Control = std::array<double, 2>;

// State sequence x_0..x_T with the controls that produced it (optional).
struct Trajectory {
    std::vector<State> states;     // length T + 1
    std::vector<Control> controls; // length T when present

    int horizon() const { return static_cast<int>(states.size()) - 1; }
};

struct SmoothConfig {
    double beta = 5.0;
};

// Signed distance to the rectangle faces: min(qx - x_lo, x_hi - qx,
// qy - y_lo, y_hi - qy). Positive strictly inside; theta is ignored.
double margin(const RectPredicate& pred, const State& state);

// Boolean satisfaction of f over traj starting at step t.
bool bool_sat(const Formula& f, const Trajectory& traj, int t = 0);

// Exact quantitative robustness (hard min/max recursion).
double robustness(const Formula& f, const Trajectory& traj, int t = 0);

// Differentiable robustness: min/max replaced by log-sum-exp at scale beta,
// including the four-face reduction inside each predicate. `states` are
// 3-vectors living on one tape.
ad::Value smooth_robustness(const Formula& f, std::span<const ad::Value> states,
                            const SmoothConfig& cfg, int t = 0);

}  // namespace stlsynth
