#include "stlsynth/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace stlsynth::nn {

BoundParams bind(Tape& tape, const ParamSet& params, bool requires_grad) {
    BoundParams out;
    for (const auto& [name, tensor] : params)
        out.emplace(name, tape.leaf(tensor.shape, tensor.data, requires_grad));
    return out;
}

GradMap collect_grads(const ParamSet& params, const BoundParams& bound) {
    GradMap out;
    for (const auto& [name, tensor] : params) {
        auto it = bound.find(name);
        if (it == bound.end())
            throw std::runtime_error("missing bound parameter " + name);
        std::span<const double> g = it->second.grad();
        if (g.empty())
            out.emplace(name, std::vector<double>(tensor.data.size(), 0.0));
        else
            out.emplace(name, std::vector<double>(g.begin(), g.end()));
    }
    return out;
}

double grad_global_norm(const GradMap& grads) {
    double sq = 0.0;
    for (const auto& [name, g] : grads)
        for (double v : g) sq += v * v;
    return std::sqrt(sq);
}

void clip_grads(GradMap& grads, double max_norm) {
    double norm = grad_global_norm(grads);
    if (norm <= max_norm || norm == 0.0) return;
    double s = max_norm / norm;
    for (auto& [name, g] : grads)
        for (double& v : g) v *= s;
}

void init_params(ParamSet& params, Rng& rng) {
    for (auto& [name, tensor] : params) {
        bool is_bias = false;
        bool is_forget_bias = false;
        auto dotpos = name.rfind('.');
        if (dotpos != std::string::npos) {
            std::string leaf = name.substr(dotpos + 1);
            is_bias = !leaf.empty() && leaf[0] == 'b';
            is_forget_bias = leaf == "bf";
        }
        if (is_bias) {
            std::fill(tensor.data.begin(), tensor.data.end(),
                      is_forget_bias ? 1.0 : 0.0);
            continue;
        }
        int fan_in = tensor.shape.cols > 1 ? tensor.shape.cols : tensor.shape.rows;
        double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& v : tensor.data) v = rng.uniform(-k, k);
    }
}

Value dense(Tape& t, Value W, Value b, Value x) {
    return t.add(t.matvec(W, x), b);
}

LstmWeights lstm_weights(const BoundParams& p, const std::string& prefix) {
    auto get = [&](const char* leaf) {
        auto it = p.find(prefix + leaf);
        if (it == p.end())
            throw std::runtime_error("missing parameter " + prefix + leaf);
        return it->second;
    };
    return LstmWeights{get("Wi"), get("Wf"), get("Wo"), get("Wu"),
                       get("Ui"), get("Uf"), get("Uo"), get("Uu"),
                       get("bi"), get("bf"), get("bo"), get("bu")};
}

std::pair<Value, Value> lstm_cell(Tape& t, const LstmWeights& w, Value input,
                                  Value h_prev, Value c_prev) {
    auto gate = [&](Value W, Value U, Value b) {
        return t.add(t.add(t.matvec(W, input), t.matvec(U, h_prev)), b);
    };
    Value in_gate = t.sigmoid(gate(w.Wi, w.Ui, w.bi));
    Value forget_gate = t.sigmoid(gate(w.Wf, w.Uf, w.bf));
    Value out_gate = t.sigmoid(gate(w.Wo, w.Uo, w.bo));
    Value update = t.tanh(gate(w.Wu, w.Uu, w.bu));
    Value cell = t.add(t.mul(in_gate, update), t.mul(forget_gate, c_prev));
    Value hidden = t.mul(out_gate, t.tanh(cell));
    return {hidden, cell};
}

TreeLstmWeights tree_lstm_weights(const BoundParams& p, const std::string& prefix) {
    auto get = [&](const std::string& leaf) {
        auto it = p.find(prefix + leaf);
        if (it == p.end())
            throw std::runtime_error("missing parameter " + prefix + leaf);
        return it->second;
    };
    TreeLstmWeights w{get("Wi"), get("Wf"), get("Wo"), get("Wu"),
                      get("Ui"), get("Uf"), get("Uo"), get("Uu"),
                      get("bi"), get("bf"), get("bo"), get("bu"),
                      {get("Wr0"), get("Wr1"), get("Wr2")}};
    return w;
}

std::pair<Value, Value> tree_lstm_node(Tape& t, const TreeLstmWeights& w,
                                       Value input, std::span<const TreeChild> children) {
    int hidden_dim = w.Ui.shape().cols;
    // Relation-typed child sum.
    Value h_sum = t.zeros(Shape{hidden_dim, 1});
    for (const TreeChild& c : children) {
        if (c.relation < 0 || c.relation > 2)
            throw std::runtime_error("invalid tree edge relation " +
                                     std::to_string(c.relation));
        h_sum = t.add(h_sum, t.matvec(w.Wrel[static_cast<std::size_t>(c.relation)],
                                      c.hidden));
    }
    auto gate = [&](Value W, Value U, Value b, Value h) {
        return t.add(t.add(t.matvec(W, input), t.matvec(U, h)), b);
    };
    Value in_gate = t.sigmoid(gate(w.Wi, w.Ui, w.bi, h_sum));
    Value out_gate = t.sigmoid(gate(w.Wo, w.Uo, w.bo, h_sum));
    Value update = t.tanh(gate(w.Wu, w.Uu, w.bu, h_sum));
    Value cell = t.mul(in_gate, update);
    for (const TreeChild& c : children) {
        // Per-child forget gate from the child's own hidden state.
        Value forget = t.sigmoid(gate(w.Wf, w.Uf, w.bf, c.hidden));
        cell = t.add(cell, t.mul(forget, c.cell));
    }
    Value hidden = t.mul(out_gate, t.tanh(cell));
    return {hidden, cell};
}

GnnWeights gnn_weights(const BoundParams& p, const std::string& prefix) {
    auto get = [&](const std::string& leaf) {
        auto it = p.find(prefix + leaf);
        if (it == p.end())
            throw std::runtime_error("missing parameter " + prefix + leaf);
        return it->second;
    };
    return GnnWeights{get("Wself"), {get("Wr0"), get("Wr1"), get("Wr2"), get("Wr3")}};
}

std::vector<Value> gnn_step(Tape& t, const GnnWeights& w,
                            std::span<const Value> concat_states,
                            std::span<const GraphEdgeView> edges) {
    int n = static_cast<int>(concat_states.size());
    std::vector<Value> pre;
    pre.reserve(concat_states.size());
    for (const Value& s : concat_states) pre.push_back(t.matvec(w.W_self, s));
    for (const GraphEdgeView& e : edges) {
        if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
            throw std::runtime_error("graph edge references missing node");
        if (e.relation < 0 || e.relation > 3)
            throw std::runtime_error("invalid graph edge relation");
        Value msg = t.matvec(w.W_rel[static_cast<std::size_t>(e.relation)],
                             concat_states[static_cast<std::size_t>(e.src)]);
        pre[static_cast<std::size_t>(e.dst)] =
            t.add(pre[static_cast<std::size_t>(e.dst)], msg);
    }
    std::vector<Value> out;
    out.reserve(pre.size());
    for (Value v : pre) out.push_back(t.tanh(v));
    return out;
}

Value graph_pool(Tape& t, Value W, Value b, std::span<const Value> states,
                 PoolMode mode) {
    if (states.empty()) throw std::runtime_error("graph_pool over empty node set");
    std::vector<Value> projected;
    projected.reserve(states.size());
    for (const Value& s : states) projected.push_back(dense(t, W, b, s));
    if (states.size() == 1) return projected[0];
    int dim = projected[0].shape().rows;
    switch (mode) {
        case PoolMode::Sum: {
            Value acc = projected[0];
            for (std::size_t i = 1; i < projected.size(); ++i)
                acc = t.add(acc, projected[i]);
            return acc;
        }
        case PoolMode::Mean: {
            Value acc = projected[0];
            for (std::size_t i = 1; i < projected.size(); ++i)
                acc = t.add(acc, projected[i]);
            return t.scale(acc, 1.0 / static_cast<double>(projected.size()));
        }
        case PoolMode::Max: {
            // Elementwise hard max assembled from per-component reductions;
            // gradients route to the argmax via the smooth_max weights only
            // in the beta -> inf limit, so use an explicit selection instead.
            std::vector<Value> comps;
            comps.reserve(static_cast<std::size_t>(dim));
            for (int k = 0; k < dim; ++k) {
                int best = 0;
                for (std::size_t i = 1; i < projected.size(); ++i)
                    if (projected[i].data()[static_cast<std::size_t>(k)] >
                        projected[static_cast<std::size_t>(best)].data()[static_cast<std::size_t>(k)])
                        best = static_cast<int>(i);
                comps.push_back(t.slice(projected[static_cast<std::size_t>(best)], k, 1));
            }
            return t.concat(comps);
        }
    }
    throw std::runtime_error("bad pool mode");
}

AttentionWeights attention_weights(const BoundParams& p, const std::string& prefix) {
    auto get = [&](const char* leaf) {
        auto it = p.find(prefix + leaf);
        if (it == p.end())
            throw std::runtime_error("missing parameter " + prefix + leaf);
        return it->second;
    };
    return AttentionWeights{get("Wq"), get("Wk"), get("v")};
}

std::pair<Value, Value> attention_context(Tape& t, const AttentionWeights& w,
                                          Value query, std::span<const Value> keys) {
    if (keys.empty()) throw std::runtime_error("attention over zero keys");
    Value q = t.matvec(w.Wq, query);
    std::vector<Value> scores;
    scores.reserve(keys.size());
    for (const Value& k : keys)
        scores.push_back(t.dot(w.v, t.tanh(t.add(q, t.matvec(w.Wk, k)))));
    Value weights = t.softmax(scores);
    Value context = t.weighted_sum(weights, keys);
    return {context, weights};
}

Value output_squash(Tape& t, Value W, Value pre,
                    std::span<const double> u_min, std::span<const double> u_max) {
    int dim = W.shape().rows;
    if (static_cast<int>(u_min.size()) != dim || static_cast<int>(u_max.size()) != dim)
        throw std::runtime_error("output_squash bound dimension mismatch");
    std::vector<double> half_span(u_min.size()), mid(u_min.size());
    for (std::size_t i = 0; i < u_min.size(); ++i) {
        if (!(u_min[i] < u_max[i]))
            throw std::runtime_error("output_squash requires u_min < u_max");
        half_span[i] = 0.5 * (u_max[i] - u_min[i]);
        mid[i] = 0.5 * (u_max[i] + u_min[i]);
    }
    Value squashed = t.tanh(t.matvec(W, pre));
    Value u = t.const_affine(squashed, half_span, mid);
    // tanh saturates to exactly +/-1 in floating point for large inputs,
    // which would land u exactly on the open bound; clamp one ulp inside.
    std::vector<Value> comps;
    comps.reserve(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i)
        comps.push_back(t.clamp_interior(t.slice(u, i, 1),
                                         u_min[static_cast<std::size_t>(i)],
                                         u_max[static_cast<std::size_t>(i)]));
    return dim == 1 ? comps[0] : t.concat(comps);
}

void adam_step(AdamState& state, ParamSet& params, const GradMap& grads) {
    state.step += 1;
    double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
    double bias1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    double bias2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (auto& [name, tensor] : params) {
        auto git = grads.find(name);
        if (git == grads.end())
            throw std::runtime_error("missing gradient for parameter " + name);
        const std::vector<double>& g = git->second;
        if (g.size() != tensor.data.size())
            throw std::runtime_error("gradient size mismatch for " + name);
        std::vector<double>& m = state.m[name];
        std::vector<double>& v = state.v[name];
        if (m.empty()) m.assign(g.size(), 0.0);
        if (v.empty()) v.assign(g.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            double mhat = m[i] / bias1;
            double vhat = v[i] / bias2;
            tensor.data[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'T', 'L', 'S', 'Y', 'N', '0', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    std::uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        os.write(reinterpret_cast<const char*>(b), 8);
    }
}

void read_doubles(std::istream& is, std::vector<double>& v) {
    for (double& d : v) {
        unsigned char b[8];
        is.read(reinterpret_cast<char*>(b), 8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        std::memcpy(&d, &bits, 8);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const ParamSet& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 8);
    write_string(os, meta.encoder);
    write_u32(os, meta.attention ? 1 : 0);
    write_u32(os, static_cast<std::uint32_t>(meta.encoder_hidden));
    write_u32(os, static_cast<std::uint32_t>(meta.decoder_hidden));
    write_u32(os, static_cast<std::uint32_t>(meta.decoder_layers));
    write_u32(os, static_cast<std::uint32_t>(meta.embedding_dim));
    write_u32(os, static_cast<std::uint32_t>(meta.gnn_steps));
    write_u32(os, static_cast<std::uint32_t>(meta.attention_dim));
    write_string(os, meta.pool);
    write_u32(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, tensor] : params) {
        write_string(os, name);
        write_u32(os, static_cast<std::uint32_t>(tensor.shape.rows));
        write_u32(os, static_cast<std::uint32_t>(tensor.shape.cols));
        write_doubles(os, tensor.data);
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

std::pair<CheckpointMeta, ParamSet> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    CheckpointMeta meta;
    meta.encoder = read_string(is);
    meta.attention = read_u32(is) != 0;
    meta.encoder_hidden = static_cast<int>(read_u32(is));
    meta.decoder_hidden = static_cast<int>(read_u32(is));
    meta.decoder_layers = static_cast<int>(read_u32(is));
    meta.embedding_dim = static_cast<int>(read_u32(is));
    meta.gnn_steps = static_cast<int>(read_u32(is));
    meta.attention_dim = static_cast<int>(read_u32(is));
    meta.pool = read_string(is);
    std::uint32_t count = read_u32(is);
    ParamSet params;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = read_string(is);
        int rows = static_cast<int>(read_u32(is));
        int cols = static_cast<int>(read_u32(is));
        Tensor tensor(Shape{rows, cols});
        read_doubles(is, tensor.data);
        params.emplace(std::move(name), std::move(tensor));
    }
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    return {meta, params};
}

}  // namespace stlsynth::nn
