#pragma once

#include <array>
#include <string>
#include <vector>

#include "stlsynth/formula.hpp"
#include "stlsynth/rng.hpp"
#include "stlsynth/robustness.hpp"
#include "stlsynth/tape.hpp"

namespace stlsynth::env {

struct UnicycleConfig {
    double dt = 1.0;
    double v_max = 1.5;
    double omega_max = 1.0;
    int horizon = 16;
    State x0{0.0, 0.0, 0.0};

    std::array<double, 2> u_min() const { return {-v_max, -omega_max}; }
    std::array<double, 2> u_max() const { return {v_max, omega_max}; }
};

// Exact zero-order-hold integration of the unicycle under constant (v, w).
State unicycle_step(const State& x, const Control& u, double dt);
ad::Value unicycle_step(ad::Tape& t, ad::Value x, ad::Value u, double dt);

Trajectory simulate(const UnicycleConfig& cfg, const State& x0,
                    std::span<const Control> controls);

// Specification template families. T1-T4 are the three-region training
// templates; TP1-TP3 the held-out families; SingleF is the one-region
// reach template F[a,b](region).
enum class TemplateFamily { T1, T2, T3, T4, TP1, TP2, TP3, SingleF };

TemplateFamily template_from_string(const std::string& s);
std::string to_string(TemplateFamily f);

// Region geometry used by the sampler: 1.5 x 1.5 squares with the lower-left
// corner uniform in [0, 3.5]^2 (keeps the square inside the [0,5]^2 workspace).
inline constexpr double kRegionSize = 1.5;
inline constexpr double kRegionCornerMax = 3.5;

// Samples concrete operators, time windows, and pairwise-disjoint regions for
// the template, uniformly over the template's legal choice bits. Throws after
// 1000 failed region draws.
Formula sample_spec(TemplateFamily family, Rng& rng, const UnicycleConfig& cfg);

// Number of distinct canonical formula skeletons generated by the T1-T4
// family (operators and bracket placements, conjunction operands unordered).
int count_structural_variants();

// Sound upper bound on the robustness any trajectory from x0 can achieve:
// the position at step t lies within v_max*dt*t of x0 and the rectangle
// margin is 1-Lipschitz in position.
double robustness_upper_bound(const Formula& f, const UnicycleConfig& cfg, int t = 0);

struct FeasibilityResult {
    bool feasible = false;
    double hard_robustness = 0.0;
    std::vector<Control> witness;
};

// Multi-start projected gradient ascent on smooth robustness over open-loop
// control sequences; feasible iff the best sequence achieves positive hard
// robustness. Conservative: "false" means "not proven feasible".
FeasibilityResult check_feasible(const Formula& f, const UnicycleConfig& cfg,
                                 Rng& rng);

struct SpecSet {
    std::uint64_t seed = 0;
    std::vector<std::pair<TemplateFamily, std::vector<Formula>>> groups;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& g : groups) n += g.second.size();
        return n;
    }
};

// Rejection-samples until n feasible specs per template; gives up (throws)
// after 100*n attempts for any template.
SpecSet build_test_set(std::span<const TemplateFamily> templates, int n_per_template,
                       Rng& rng, const UnicycleConfig& cfg);

void save_spec_set(const std::string& path, const SpecSet& set);
SpecSet load_spec_set(const std::string& path);

}  // namespace stlsynth::env
