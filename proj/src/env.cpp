#include "stlsynth/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "stlsynth/nn.hpp"

namespace stlsynth::env {

State unicycle_step(const State& x, const Control& u, double dt) {
    double qx = x[0], qy = x[1], th = x[2];
    double v = u[0], w = u[1];
    if (std::abs(w) < 1e-9)
        return State{qx + v * dt * std::cos(th), qy + v * dt * std::sin(th), th};
    double th2 = th + w * dt;
    return State{qx + (v / w) * (std::sin(th2) - std::sin(th)),
                 qy - (v / w) * (std::cos(th2) - std::cos(th)), th2};
}

ad::Value unicycle_step(ad::Tape& t, ad::Value x, ad::Value u, double dt) {
    ad::Value qx = t.slice(x, 0, 1);
    ad::Value qy = t.slice(x, 1, 1);
    ad::Value th = t.slice(x, 2, 1);
    ad::Value v = t.slice(u, 0, 1);
    ad::Value w = t.slice(u, 1, 1);
    if (std::abs(w.data()[0]) < 1e-9) {
        ad::Value nqx = t.add(qx, t.scale(t.mul(v, t.cos(th)), dt));
        ad::Value nqy = t.add(qy, t.scale(t.mul(v, t.sin(th)), dt));
        std::array<ad::Value, 3> parts = {nqx, nqy, th};
        return t.concat(parts);
    }
    ad::Value th2 = t.add(th, t.scale(w, dt));
    ad::Value ratio = t.div(v, w);
    ad::Value nqx = t.add(qx, t.mul(ratio, t.sub(t.sin(th2), t.sin(th))));
    ad::Value nqy = t.sub(qy, t.mul(ratio, t.sub(t.cos(th2), t.cos(th))));
    std::array<ad::Value, 3> parts = {nqx, nqy, th2};
    return t.concat(parts);
}

Trajectory simulate(const UnicycleConfig& cfg, const State& x0,
                    std::span<const Control> controls) {
    Trajectory traj;
    traj.states.push_back(x0);
    for (const Control& u : controls) {
        traj.states.push_back(unicycle_step(traj.states.back(), u, cfg.dt));
        traj.controls.push_back(u);
    }
    return traj;
}

TemplateFamily template_from_string(const std::string& s) {
    if (s == "T1") return TemplateFamily::T1;
    if (s == "T2") return TemplateFamily::T2;
    if (s == "T3") return TemplateFamily::T3;
    if (s == "T4") return TemplateFamily::T4;
    if (s == "TP1") return TemplateFamily::TP1;
    if (s == "TP2") return TemplateFamily::TP2;
    if (s == "TP3") return TemplateFamily::TP3;
    if (s == "F") return TemplateFamily::SingleF;
    throw std::runtime_error("unknown template family: " + s);
}

std::string to_string(TemplateFamily f) {
    switch (f) {
        case TemplateFamily::T1: return "T1";
        case TemplateFamily::T2: return "T2";
        case TemplateFamily::T3: return "T3";
        case TemplateFamily::T4: return "T4";
        case TemplateFamily::TP1: return "TP1";
        case TemplateFamily::TP2: return "TP2";
        case TemplateFamily::TP3: return "TP3";
        case TemplateFamily::SingleF: return "F";
    }
    return "?";
}

namespace {

bool overlap(const RectPredicate& a, const RectPredicate& b) {
    return a.x_lo < b.x_hi && b.x_lo < a.x_hi && a.y_lo < b.y_hi && b.y_lo < a.y_hi;
}

std::vector<RectPredicate> sample_regions(int count, Rng& rng) {
    std::vector<RectPredicate> regions;
    for (int attempt = 0; attempt < 1000 && static_cast<int>(regions.size()) < count;
         ++attempt) {
        double cx = rng.uniform(0.0, kRegionCornerMax);
        double cy = rng.uniform(0.0, kRegionCornerMax);
        RectPredicate r{cx, cx + kRegionSize, cy, cy + kRegionSize};
        bool ok = true;
        for (const RectPredicate& prev : regions)
            if (overlap(prev, r)) { ok = false; break; }
        if (ok) regions.push_back(r);
    }
    if (static_cast<int>(regions.size()) < count)
        throw std::runtime_error("region sampler failed after 1000 attempts");
    return regions;
}

// Interval with lo < hi <= T for the single-operator terms.
Interval sample_window(Rng& rng, int horizon) {
    int lo = rng.uniform_int(0, horizon - 1);
    int hi = rng.uniform_int(lo + 1, horizon);
    return Interval{lo, hi};
}

Formula single_op(bool always_op, Interval w, const RectPredicate& r) {
    Formula p = Formula::pred(r);
    return always_op ? Formula::always(w, p) : Formula::eventually(w, p);
}

// F[0, T-tau] G[0, tau] (region): "stay tau steps some time before T".
Formula nested_fg(int tau, int horizon, const RectPredicate& r) {
    Formula inner = Formula::always(Interval{0, tau}, Formula::pred(r));
    return Formula::eventually(Interval{0, horizon - tau}, inner);
}

// Legal connective pairs: a conjunction in the former slot forces a
// disjunction in the latter.
std::pair<bool, bool> sample_connectives(Rng& rng) {  // true = and
    switch (rng.uniform_int(0, 2)) {
        case 0: return {false, false};
        case 1: return {false, true};
        default: return {true, false};
    }
}

Formula join(bool is_and, const Formula& a, const Formula& b) {
    return is_and ? Formula::conj(a, b) : Formula::disj(a, b);
}

}  // namespace

Formula sample_spec(TemplateFamily family, Rng& rng, const UnicycleConfig& cfg) {
    int T = cfg.horizon;
    switch (family) {
        case TemplateFamily::T1: {
            auto regions = sample_regions(3, rng);
            auto [b1, b2] = sample_connectives(rng);
            Formula a = single_op(rng.coin(), sample_window(rng, T), regions[0]);
            Formula b = single_op(rng.coin(), sample_window(rng, T), regions[1]);
            Formula c = single_op(rng.coin(), sample_window(rng, T), regions[2]);
            return join(b2, join(b1, a, b), c);
        }
        case TemplateFamily::T2: {
            auto regions = sample_regions(3, rng);
            auto [b1, b2] = sample_connectives(rng);
            Formula a = single_op(rng.coin(), sample_window(rng, T), regions[0]);
            Formula b = single_op(rng.coin(), sample_window(rng, T), regions[1]);
            Formula c = single_op(rng.coin(), sample_window(rng, T), regions[2]);
            return join(b1, a, join(b2, b, c));
        }
        case TemplateFamily::T3: {
            auto regions = sample_regions(3, rng);
            auto [b1, b2] = sample_connectives(rng);
            Formula a = nested_fg(rng.uniform_int(0, 8), T, regions[0]);
            Formula b = nested_fg(rng.uniform_int(0, 8), T, regions[1]);
            Formula c = nested_fg(rng.uniform_int(0, 8), T, regions[2]);
            return join(b2, join(b1, a, b), c);
        }
        case TemplateFamily::T4: {
            auto regions = sample_regions(3, rng);
            auto [b1, b2] = sample_connectives(rng);
            Formula a = nested_fg(rng.uniform_int(0, 8), T, regions[0]);
            Formula b = nested_fg(rng.uniform_int(0, 8), T, regions[1]);
            Formula c = nested_fg(rng.uniform_int(0, 8), T, regions[2]);
            return join(b1, a, join(b2, b, c));
        }
        case TemplateFamily::TP1: {
            auto regions = sample_regions(1, rng);
            return single_op(rng.coin(), sample_window(rng, T), regions[0]);
        }
        case TemplateFamily::TP2: {
            auto regions = sample_regions(2, rng);
            Formula a = single_op(rng.coin(), sample_window(rng, T), regions[0]);
            Formula b = single_op(rng.coin(), sample_window(rng, T), regions[1]);
            return join(rng.coin(), a, b);
        }
        case TemplateFamily::TP3: {
            auto regions = sample_regions(3, rng);
            auto [b1, b2] = sample_connectives(rng);
            Formula a = nested_fg(rng.uniform_int(0, 8), T, regions[0]);
            Formula b = single_op(rng.coin(), sample_window(rng, T), regions[1]);
            Formula c = single_op(rng.coin(), sample_window(rng, T), regions[2]);
            return join(b2, join(b1, a, b), c);
        }
        case TemplateFamily::SingleF: {
            auto regions = sample_regions(1, rng);
            return Formula::eventually(sample_window(rng, T), Formula::pred(regions[0]));
        }
    }
    throw std::runtime_error("bad template family");
}

namespace {

// Canonical skeleton of a template instance: regions and window numbers
// abstracted away, conjunction operands unordered.
std::string skeleton(const Formula& f) {
    switch (f.kind()) {
        case NodeKind::Predicate: return "P";
        case NodeKind::Eventually: return "F(" + skeleton(f.child(0)) + ")";
        case NodeKind::Always: return "G(" + skeleton(f.child(0)) + ")";
        case NodeKind::And: {
            std::string a = skeleton(f.child(0));
            std::string b = skeleton(f.child(1));
            if (b < a) std::swap(a, b);
            return "&(" + a + "," + b + ")";
        }
        case NodeKind::Or:
            return "|(" + skeleton(f.child(0)) + "," + skeleton(f.child(1)) + ")";
        default:
            throw std::runtime_error("unexpected node in template skeleton");
    }
}

}  // namespace

int count_structural_variants() {
    RectPredicate r{0, 1, 0, 1};
    Interval w{0, 1};
    Formula pred = Formula::pred(r);
    auto term = [&](int op) {  // 0 = F, 1 = G, 2 = FG nesting
        if (op == 0) return Formula::eventually(w, pred);
        if (op == 1) return Formula::always(w, pred);
        return Formula::eventually(w, Formula::always(w, pred));
    };
    const std::array<std::pair<bool, bool>, 3> braces = {
        std::pair{false, false}, {false, true}, {true, false}};

    int total = 0;
    // T1/T2: three single-operator terms, left/right bracketing.
    for (bool left_assoc : {true, false}) {
        std::set<std::string> distinct;
        for (auto [b1, b2] : braces)
            for (int o1 = 0; o1 < 2; ++o1)
                for (int o2 = 0; o2 < 2; ++o2)
                    for (int o3 = 0; o3 < 2; ++o3) {
                        Formula f = left_assoc
                            ? join(b2, join(b1, term(o1), term(o2)), term(o3))
                            : join(b1, term(o1), join(b2, term(o2), term(o3)));
                        distinct.insert(skeleton(f));
                    }
        total += static_cast<int>(distinct.size());
    }
    // T3/T4: three nested F-G terms.
    for (bool left_assoc : {true, false}) {
        std::set<std::string> distinct;
        for (auto [b1, b2] : braces) {
            Formula f = left_assoc
                ? join(b2, join(b1, term(2), term(2)), term(2))
                : join(b1, term(2), join(b2, term(2), term(2)));
            distinct.insert(skeleton(f));
        }
        total += static_cast<int>(distinct.size());
    }
    return total;
}

double robustness_upper_bound(const Formula& f, const UnicycleConfig& cfg, int t) {
    double reach = cfg.v_max * cfg.dt * static_cast<double>(t);
    switch (f.kind()) {
        case NodeKind::True:
            return HUGE_VAL;
        case NodeKind::Predicate:
            return margin(f.rect(), cfg.x0) + reach;
        case NodeKind::Not:
            return -margin(f.child(0).rect(), cfg.x0) + reach;
        case NodeKind::And:
            return std::min(robustness_upper_bound(f.child(0), cfg, t),
                            robustness_upper_bound(f.child(1), cfg, t));
        case NodeKind::Or:
            return std::max(robustness_upper_bound(f.child(0), cfg, t),
                            robustness_upper_bound(f.child(1), cfg, t));
        case NodeKind::Eventually: {
            double best = -HUGE_VAL;
            for (int t1 = t + f.window().lo; t1 <= t + f.window().hi; ++t1)
                best = std::max(best, robustness_upper_bound(f.child(0), cfg, t1));
            return best;
        }
        case NodeKind::Always: {
            double worst = HUGE_VAL;
            for (int t1 = t + f.window().lo; t1 <= t + f.window().hi; ++t1)
                worst = std::min(worst, robustness_upper_bound(f.child(0), cfg, t1));
            return worst;
        }
        case NodeKind::Until: {
            double best = -HUGE_VAL;
            for (int t1 = t + f.window().lo; t1 <= t + f.window().hi; ++t1) {
                double inner = robustness_upper_bound(f.child(1), cfg, t1);
                for (int t2 = t; t2 <= t1; ++t2)
                    inner = std::min(inner, robustness_upper_bound(f.child(0), cfg, t2));
                best = std::max(best, inner);
            }
            return best;
        }
    }
    return 0.0;
}

FeasibilityResult check_feasible(const Formula& f, const UnicycleConfig& cfg,
                                 Rng& rng) {
    const int starts = 32;
    const int steps = 400;
    const double lr = 0.05;
    const double beta_lo = 2.0, beta_hi = 10.0;
    int T = cfg.horizon;
    auto lo = cfg.u_min();
    auto hi = cfg.u_max();

    FeasibilityResult best;
    best.hard_robustness = -HUGE_VAL;
    if (robustness_upper_bound(f, cfg, 0) <= 0.0) return best;

    auto hard_of = [&](const std::vector<double>& u) {
        std::vector<Control> controls(static_cast<std::size_t>(T));
        for (int k = 0; k < T; ++k)
            controls[static_cast<std::size_t>(k)] =
                Control{u[static_cast<std::size_t>(2 * k)], u[static_cast<std::size_t>(2 * k + 1)]};
        Trajectory traj = simulate(cfg, cfg.x0, controls);
        double rho = robustness(f, traj, 0);
        if (rho > best.hard_robustness) {
            best.hard_robustness = rho;
            best.witness = controls;
        }
        return rho;
    };

    for (int s = 0; s < starts; ++s) {
        std::vector<double> u(static_cast<std::size_t>(2 * T));
        for (int k = 0; k < T; ++k) {
            u[static_cast<std::size_t>(2 * k)] = rng.uniform(lo[0], hi[0]);
            u[static_cast<std::size_t>(2 * k + 1)] = rng.uniform(lo[1], hi[1]);
        }
        nn::AdamState adam(nn::AdamConfig{lr, 0.9, 0.999, 1e-8});
        nn::ParamSet controls;
        controls.emplace("u", nn::Tensor(ad::Shape{2 * T, 1}));
        controls["u"].data = u;

        for (int it = 0; it < steps; ++it) {
            double beta = beta_lo + (beta_hi - beta_lo) *
                                        (steps > 1 ? static_cast<double>(it) / (steps - 1) : 0.0);
            ad::Tape tape;
            ad::Value uv = tape.leaf(ad::Shape{2 * T, 1}, controls["u"].data, true);
            std::vector<ad::Value> states;
            ad::Value x = tape.leaf(ad::Shape{3, 1},
                                    std::span<const double>(cfg.x0.data(), 3));
            states.push_back(x);
            for (int k = 0; k < T; ++k) {
                ad::Value uk = tape.slice(uv, 2 * k, 2);
                x = unicycle_step(tape, x, uk, cfg.dt);
                states.push_back(x);
            }
            ad::Value rho = smooth_robustness(f, states, SmoothConfig{beta}, 0);
            ad::Value loss = tape.neg(rho);
            tape.backward(loss);
            nn::GradMap grads;
            grads.emplace("u", std::vector<double>(uv.grad().begin(), uv.grad().end()));
            nn::adam_step(adam, controls, grads);
            // Project back into the box.
            std::vector<double>& cu = controls["u"].data;
            for (int k = 0; k < T; ++k) {
                cu[static_cast<std::size_t>(2 * k)] =
                    std::clamp(cu[static_cast<std::size_t>(2 * k)], lo[0], hi[0]);
                cu[static_cast<std::size_t>(2 * k + 1)] =
                    std::clamp(cu[static_cast<std::size_t>(2 * k + 1)], lo[1], hi[1]);
            }
            if (it % 10 == 9 && hard_of(controls["u"].data) > 0.0) {
                best.feasible = true;
                return best;
            }
        }
        if (hard_of(controls["u"].data) > 0.0) {
            best.feasible = true;
            return best;
        }
    }
    best.feasible = best.hard_robustness > 0.0;
    return best;
}

SpecSet build_test_set(std::span<const TemplateFamily> templates, int n_per_template,
                       Rng& rng, const UnicycleConfig& cfg) {
    SpecSet set;
    for (TemplateFamily family : templates) {
        std::vector<Formula> specs;
        int attempts = 0;
        while (static_cast<int>(specs.size()) < n_per_template) {
            if (++attempts > 100 * n_per_template)
                throw std::runtime_error("could not collect " +
                                         std::to_string(n_per_template) +
                                         " feasible specs for template " +
                                         to_string(family));
            Formula f = sample_spec(family, rng, cfg);
            if (check_feasible(f, cfg, rng).feasible) specs.push_back(f);
        }
        set.groups.emplace_back(family, std::move(specs));
    }
    return set;
}

void save_spec_set(const std::string& path, const SpecSet& set) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open spec set for writing: " + path);
    os << "# seed=" << set.seed << " templates=";
    for (std::size_t i = 0; i < set.groups.size(); ++i) {
        if (i) os << ',';
        os << to_string(set.groups[i].first) << ':' << set.groups[i].second.size();
    }
    os << '\n';
    for (const auto& [family, specs] : set.groups)
        for (const Formula& f : specs) os << format(f) << '\n';
}

SpecSet load_spec_set(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open spec set: " + path);
    std::string header;
    if (!std::getline(is, header) || header.rfind("# seed=", 0) != 0)
        throw std::runtime_error("spec set missing header line: " + path);
    SpecSet set;
    std::istringstream hs(header.substr(7));
    hs >> set.seed;
    std::string rest;
    hs >> rest;  // templates=...
    if (rest.rfind("templates=", 0) != 0)
        throw std::runtime_error("spec set header missing template counts");
    std::vector<std::pair<TemplateFamily, int>> counts;
    std::istringstream ts(rest.substr(10));
    std::string item;
    while (std::getline(ts, item, ',')) {
        auto colon = item.find(':');
        if (colon == std::string::npos)
            throw std::runtime_error("malformed template count: " + item);
        counts.emplace_back(template_from_string(item.substr(0, colon)),
                            std::stoi(item.substr(colon + 1)));
    }
    std::string line;
    for (auto [family, n] : counts) {
        std::vector<Formula> specs;
        for (int i = 0; i < n; ++i) {
            if (!std::getline(is, line))
                throw std::runtime_error("spec set truncated: " + path);
            specs.push_back(parse(line));
        }
        set.groups.emplace_back(family, std::move(specs));
    }
    return set;
}

}  // namespace stlsynth::env
