#include "stlsynth/export.hpp"

#include <fstream>

namespace stlsynth {

namespace {

void collect_rects(const Formula& f, std::vector<RectPredicate>& out) {
    if (f.kind() == NodeKind::Predicate) {
        out.push_back(f.rect());
        return;
    }
    for (int i = 0; i < f.arity(); ++i) collect_rects(f.child(i), out);
}

}  // namespace

std::string metrics_csv(const std::vector<trainer::IterMetrics>& log) {
    std::string out = "iteration,loss,eval_success_rate,eval_avg_robustness,wallclock_s\n";
    for (const auto& m : log) {
        out += std::to_string(m.iteration);
        out += ',';
        out += format_double(m.loss);
        out += ',';
        if (m.evaluated) {
            out += format_double(m.eval_success_rate);
            out += ',';
            out += format_double(m.eval_avg_robustness);
        } else {
            out += ',';
        }
        out += ',';
        out += format_double(m.wallclock_s);
        out += '\n';
    }
    return out;
}

std::string eval_csv(const std::vector<TemplateEvalRow>& rows) {
    std::string out = "template,avg_robustness,success_rate\n";
    for (const auto& r : rows) {
        out += r.template_name;
        out += ',';
        out += format_double(r.avg_robustness);
        out += ',';
        out += format_double(r.success_rate);
        out += '\n';
    }
    return out;
}

std::string trajectory_csv(const Trajectory& traj) {
    std::string out = "t,qx,qy,theta,v,omega\n";
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
        const State& x = traj.states[t];
        out += std::to_string(t);
        out += ',';
        out += format_double(x[0]);
        out += ',';
        out += format_double(x[1]);
        out += ',';
        out += format_double(x[2]);
        out += ',';
        if (t < traj.controls.size()) {
            out += format_double(traj.controls[t][0]);
            out += ',';
            out += format_double(traj.controls[t][1]);
        } else {
            out += ',';
        }
        out += '\n';
    }
    return out;
}

std::string attention_csv(const std::vector<std::string>& labels,
                          const std::vector<std::vector<double>>& weights_per_step) {
    std::string out = "token";
    for (std::size_t t = 0; t < weights_per_step.size(); ++t) {
        out += ",t";
        out += std::to_string(t);
    }
    out += '\n';
    for (std::size_t j = 0; j < labels.size(); ++j) {
        std::string cell = labels[j];
        // Keep the CSV unquoted: labels contain no commas except predicate
        // coordinates, which are replaced by semicolons.
        for (char& c : cell)
            if (c == ',') c = ';';
        out += cell;
        for (const auto& step : weights_per_step) {
            out += ',';
            out += format_double(j < step.size() ? step[j] : 0.0);
        }
        out += '\n';
    }
    return out;
}

std::string rollout_svg(const Formula& spec, const Trajectory& traj) {
    // Workspace [0,5]^2 mapped to a 550x550 canvas with a 25px margin;
    // SVG y grows downward, so flip.
    const double scale = 100.0, margin = 25.0, world = 5.0;
    auto X = [&](double x) { return format_double(margin + x * scale); };
    auto Y = [&](double y) { return format_double(margin + (world - y) * scale); };

    std::string out =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"550\" height=\"550\" "
        "viewBox=\"0 0 550 550\">\n";
    out += "<path d=\"M " + X(0) + " " + Y(0) + " L " + X(world) + " " + Y(0) +
           " L " + X(world) + " " + Y(world) + " L " + X(0) + " " + Y(world) +
           " Z\" fill=\"white\" stroke=\"black\" stroke-width=\"1\"/>\n";

    std::vector<RectPredicate> rects;
    collect_rects(spec, rects);
    static const char* colors[] = {"#4878cf", "#333333", "#6acc65", "#d65f5f",
                                   "#b47cc7", "#c4ad66"};
    for (std::size_t i = 0; i < rects.size(); ++i) {
        const RectPredicate& r = rects[i];
        out += "<rect x=\"" + X(r.x_lo) + "\" y=\"" + Y(r.y_hi) + "\" width=\"" +
               format_double((r.x_hi - r.x_lo) * scale) + "\" height=\"" +
               format_double((r.y_hi - r.y_lo) * scale) + "\" fill=\"" +
               colors[i % 6] + "\" fill-opacity=\"0.35\" stroke=\"" + colors[i % 6] +
               "\"/>\n";
    }

    if (!traj.states.empty()) {
        out += "<polyline points=\"";
        for (std::size_t t = 0; t < traj.states.size(); ++t) {
            if (t) out += ' ';
            out += X(traj.states[t][0]) + "," + Y(traj.states[t][1]);
        }
        out += "\" fill=\"none\" stroke=\"#202020\" stroke-width=\"2\"/>\n";
        for (const State& x : traj.states)
            out += "<circle cx=\"" + X(x[0]) + "\" cy=\"" + Y(x[1]) +
                   "\" r=\"4\" fill=\"#d65f5f\"/>\n";
    }
    out += "</svg>\n";
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write file: " + path);
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace stlsynth
