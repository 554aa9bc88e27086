#include "stlsynth/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace stlsynth {

namespace {

void check_horizon(const Formula& f, int horizon, int t) {
    if (t < 0 || t + f.horizon() > horizon)
        throw HorizonError("formula window [" + std::to_string(t) + ", " +
                           std::to_string(t + f.horizon()) +
                           "] exceeds trajectory horizon " + std::to_string(horizon));
}

}  // namespace

double margin(const RectPredicate& pred, const State& state) {
    double qx = state[0], qy = state[1];
    return std::min(std::min(qx - pred.x_lo, pred.x_hi - qx),
                    std::min(qy - pred.y_lo, pred.y_hi - qy));
}

bool bool_sat(const Formula& f, const Trajectory& traj, int t) {
    check_horizon(f, traj.horizon(), t);
    switch (f.kind()) {
        case NodeKind::True:
            return true;
        case NodeKind::Predicate:
            return margin(f.rect(), traj.states[static_cast<std::size_t>(t)]) > 0.0;
        case NodeKind::Not:
            return !bool_sat(f.child(0), traj, t);
        case NodeKind::And:
            return bool_sat(f.child(0), traj, t) && bool_sat(f.child(1), traj, t);
        case NodeKind::Or:
            return bool_sat(f.child(0), traj, t) || bool_sat(f.child(1), traj, t);
        case NodeKind::Eventually: {
            for (int t1 = t + f.window().lo; t1 <= t + f.window().hi; ++t1)
                if (bool_sat(f.child(0), traj, t1)) return true;
            return false;
        }
        case NodeKind::Always: {
            for (int t1 = t + f.window().lo; t1 <= t + f.window().hi; ++t1)
                if (!bool_sat(f.child(0), traj, t1)) return false;
            return true;
        }
        case NodeKind::Until: {
            for (int t1 = t + f.window().lo; t1 <= t + f.window().hi; ++t1) {
                if (!bool_sat(f.child(1), traj, t1)) continue;
                bool hold = true;
                for (int t2 = t; t2 <= t1; ++t2)
                    if (!bool_sat(f.child(0), traj, t2)) { hold = false; break; }
                if (hold) return true;
            }
            return false;
        }
    }
    return false;
}

double robustness(const Formula& f, const Trajectory& traj, int t) {
    check_horizon(f, traj.horizon(), t);
    switch (f.kind()) {
        case NodeKind::True:
            return std::numeric_limits<double>::infinity();
        case NodeKind::Predicate:
            return margin(f.rect(), traj.states[static_cast<std::size_t>(t)]);
        case NodeKind::Not:
            return -margin(f.child(0).rect(), traj.states[static_cast<std::size_t>(t)]);
        case NodeKind::And:
            return std::min(robustness(f.child(0), traj, t),
                            robustness(f.child(1), traj, t));
        case NodeKind::Or:
            return std::max(robustness(f.child(0), traj, t),
                            robustness(f.child(1), traj, t));
        case NodeKind::Eventually: {
            double best = -std::numeric_limits<double>::infinity();
            for (int t1 = t + f.window().lo; t1 <= t + f.window().hi; ++t1)
                best = std::max(best, robustness(f.child(0), traj, t1));
            return best;
        }
        case NodeKind::Always: {
            double worst = std::numeric_limits<double>::infinity();
            for (int t1 = t + f.window().lo; t1 <= t + f.window().hi; ++t1)
                worst = std::min(worst, robustness(f.child(0), traj, t1));
            return worst;
        }
        case NodeKind::Until: {
            double best = -std::numeric_limits<double>::infinity();
            double left_min = std::numeric_limits<double>::infinity();
            int t2 = t;
            for (int t1 = t + f.window().lo; t1 <= t + f.window().hi; ++t1) {
                for (; t2 <= t1; ++t2)
                    left_min = std::min(left_min, robustness(f.child(0), traj, t2));
                best = std::max(best,
                                std::min(robustness(f.child(1), traj, t1), left_min));
            }
            return best;
        }
    }
    return 0.0;
}

namespace {

// One smooth-robustness evaluation. Sub-results are memoized per (node, t)
// so until's nested windows do not blow up the tape.
class SmoothEval {
public:
    SmoothEval(std::span<const ad::Value> states, double beta)
        : states_(states), beta_(beta), tape_(states.empty() ? nullptr : states[0].tape()) {}

    ad::Value eval(const Formula& f, int t) {
        auto key = std::make_pair(f.identity(), t);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        ad::Value v = eval_uncached(f, t);
        memo_.emplace(key, v);
        return v;
    }

private:
    ad::Value margin_value(const RectPredicate& r, int t) {
        ad::Value x = states_[static_cast<std::size_t>(t)];
        ad::Value qx = tape_->slice(x, 0, 1);
        ad::Value qy = tape_->slice(x, 1, 1);
        std::array<ad::Value, 4> faces = {
            tape_->add_const(qx, -r.x_lo),
            tape_->add_const(tape_->neg(qx), r.x_hi),
            tape_->add_const(qy, -r.y_lo),
            tape_->add_const(tape_->neg(qy), r.y_hi),
        };
        return tape_->smooth_min(faces, beta_);
    }

    ad::Value eval_uncached(const Formula& f, int t);

    std::span<const ad::Value> states_;
    double beta_;
    ad::Tape* tape_;
    std::map<std::pair<const void*, int>, ad::Value> memo_;
};

ad::Value SmoothEval::eval_uncached(const Formula& f, int t) {
    switch (f.kind()) {
        case NodeKind::True:
            // No gradient; large constant standing in for +infinity.
            return tape_->scalar(1e6);
        case NodeKind::Predicate:
            return margin_value(f.rect(), t);
        case NodeKind::Not:
            return tape_->neg(margin_value(f.child(0).rect(), t));
        case NodeKind::And: {
            std::array<ad::Value, 2> xs = {eval(f.child(0), t), eval(f.child(1), t)};
            return tape_->smooth_min(xs, beta_);
        }
        case NodeKind::Or: {
            std::array<ad::Value, 2> xs = {eval(f.child(0), t), eval(f.child(1), t)};
            return tape_->smooth_max(xs, beta_);
        }
        case NodeKind::Eventually: {
            std::vector<ad::Value> xs;
            for (int t1 = t + f.window().lo; t1 <= t + f.window().hi; ++t1)
                xs.push_back(eval(f.child(0), t1));
            return tape_->smooth_max(xs, beta_);
        }
        case NodeKind::Always: {
            std::vector<ad::Value> xs;
            for (int t1 = t + f.window().lo; t1 <= t + f.window().hi; ++t1)
                xs.push_back(eval(f.child(0), t1));
            return tape_->smooth_min(xs, beta_);
        }
        case NodeKind::Until: {
            // max over t1 of min(right(t1), min over [t,t1] of left), with
            // each reduction smoothed separately, mirroring the hard recursion.
            std::vector<ad::Value> terms;
            std::vector<ad::Value> left;  // child-0 values on [t, t1]
            int t2 = t;
            for (int t1 = t + f.window().lo; t1 <= t + f.window().hi; ++t1) {
                for (; t2 <= t1; ++t2) left.push_back(eval(f.child(0), t2));
                ad::Value left_min = tape_->smooth_min(left, beta_);
                std::array<ad::Value, 2> pair = {eval(f.child(1), t1), left_min};
                terms.push_back(tape_->smooth_min(pair, beta_));
            }
            return tape_->smooth_max(terms, beta_);
        }
    }
    throw FormulaError("invalid formula node");
}

}  // namespace

ad::Value smooth_robustness(const Formula& f, std::span<const ad::Value> states,
                            const SmoothConfig& cfg, int t) {
    if (states.empty()) throw HorizonError("empty trajectory");
    check_horizon(f, static_cast<int>(states.size()) - 1, t);
    SmoothEval ev(states, cfg.beta);
    return ev.eval(f, t);
}

}  // namespace stlsynth
