#include "stlsynth/policy.hpp"

#include <stdexcept>

namespace stlsynth::policy {

EncoderVariant encoder_variant_from_string(const std::string& s) {
    if (s == "sequential") return EncoderVariant::Sequential;
    if (s == "graph") return EncoderVariant::Graph;
    if (s == "tree") return EncoderVariant::Tree;
    throw std::runtime_error("unknown encoder variant: " + s);
}

std::string to_string(EncoderVariant v) {
    switch (v) {
        case EncoderVariant::Sequential: return "sequential";
        case EncoderVariant::Graph: return "graph";
        case EncoderVariant::Tree: return "tree";
    }
    return "?";
}

nn::CheckpointMeta to_meta(const Arch& arch) {
    nn::CheckpointMeta m;
    m.encoder = to_string(arch.variant);
    m.attention = arch.attention;
    m.encoder_hidden = arch.encoder_hidden;
    m.decoder_hidden = arch.decoder_hidden;
    m.decoder_layers = arch.decoder_layers;
    m.embedding_dim = arch.embedding_dim;
    m.gnn_steps = arch.gnn_steps;
    m.attention_dim = arch.attention_dim;
    m.pool = arch.pool == nn::PoolMode::Max    ? "max"
             : arch.pool == nn::PoolMode::Mean ? "mean"
                                               : "sum";
    return m;
}

Arch arch_from_meta(const nn::CheckpointMeta& meta) {
    Arch a;
    a.variant = encoder_variant_from_string(meta.encoder);
    a.attention = meta.attention;
    a.encoder_hidden = meta.encoder_hidden;
    a.decoder_hidden = meta.decoder_hidden;
    a.decoder_layers = meta.decoder_layers;
    a.embedding_dim = meta.embedding_dim;
    a.gnn_steps = meta.gnn_steps;
    a.attention_dim = meta.attention_dim;
    if (meta.pool == "max") a.pool = nn::PoolMode::Max;
    else if (meta.pool == "mean") a.pool = nn::PoolMode::Mean;
    else if (meta.pool == "sum") a.pool = nn::PoolMode::Sum;
    else throw std::runtime_error("unknown pool mode: " + meta.pool);
    return a;
}

namespace {

void add_lstm(nn::ParamSet& p, const std::string& prefix, int hidden, int input) {
    for (const char* g : {"Wi", "Wf", "Wo", "Wu"})
        p.emplace(prefix + g, nn::Tensor(Shape{hidden, input}));
    for (const char* g : {"Ui", "Uf", "Uo", "Uu"})
        p.emplace(prefix + g, nn::Tensor(Shape{hidden, hidden}));
    for (const char* g : {"bi", "bf", "bo", "bu"})
        p.emplace(prefix + g, nn::Tensor(Shape{hidden, 1}));
}

}  // namespace

nn::ParamSet make_params(const Arch& arch) {
    nn::ParamSet p;
    int H = arch.encoder_hidden;
    switch (arch.variant) {
        case EncoderVariant::Sequential:
            p.emplace("enc.embed.W", nn::Tensor(Shape{arch.embedding_dim, kTokenDim}));
            p.emplace("enc.embed.b", nn::Tensor(Shape{arch.embedding_dim, 1}));
            add_lstm(p, "enc.lstm.", H, arch.embedding_dim);
            break;
        case EncoderVariant::Graph:
            p.emplace("enc.embed.W", nn::Tensor(Shape{H, kTokenDim}));
            p.emplace("enc.embed.b", nn::Tensor(Shape{H, 1}));
            p.emplace("enc.gnn.Wself", nn::Tensor(Shape{H, 2 * H}));
            for (int r = 0; r < 4; ++r)
                p.emplace("enc.gnn.Wr" + std::to_string(r), nn::Tensor(Shape{H, 2 * H}));
            p.emplace("enc.pool.W", nn::Tensor(Shape{H, 2 * H}));
            p.emplace("enc.pool.b", nn::Tensor(Shape{H, 1}));
            break;
        case EncoderVariant::Tree:
            p.emplace("enc.embed.W", nn::Tensor(Shape{arch.embedding_dim, kTokenDim}));
            p.emplace("enc.embed.b", nn::Tensor(Shape{arch.embedding_dim, 1}));
            add_lstm(p, "enc.tree.", H, arch.embedding_dim);
            for (int r = 0; r < 3; ++r)
                p.emplace("enc.tree.Wr" + std::to_string(r), nn::Tensor(Shape{H, H}));
            break;
    }
    int in_dim = arch.state_dim + H;
    for (int layer = 0; layer < arch.decoder_layers; ++layer) {
        add_lstm(p, "dec.lstm" + std::to_string(layer + 1) + ".",
                 arch.decoder_hidden, layer == 0 ? in_dim : arch.decoder_hidden);
    }
    int out_in = arch.decoder_hidden + (arch.attention ? arch.key_dim() : 0);
    p.emplace("dec.out.W", nn::Tensor(Shape{arch.control_dim, out_in}));
    if (arch.attention) {
        p.emplace("dec.attn.Wq", nn::Tensor(Shape{arch.attention_dim, arch.decoder_hidden}));
        p.emplace("dec.attn.Wk", nn::Tensor(Shape{arch.attention_dim, arch.key_dim()}));
        p.emplace("dec.attn.v", nn::Tensor(Shape{arch.attention_dim, 1}));
    }
    return p;
}

namespace {

Value embed_token(Tape& t, const nn::BoundParams& p, const TokenVector& tok) {
    Value raw = t.leaf(Shape{kTokenDim, 1}, tok);
    return nn::dense(t, p.at("enc.embed.W"), p.at("enc.embed.b"), raw);
}

EncoderOutput encode_sequential(Tape& t, const Arch& arch, const nn::BoundParams& p,
                                const Formula& formula) {
    TokenSeq tokens = tokenize(formula);
    nn::LstmWeights w = nn::lstm_weights(p, "enc.lstm.");
    Value h = t.zeros(Shape{arch.encoder_hidden, 1});
    Value c = t.zeros(Shape{arch.encoder_hidden, 1});
    EncoderOutput out;
    out.labels = tokens.labels;
    for (const TokenVector& tok : tokens.vectors) {
        auto [h2, c2] = nn::lstm_cell(t, w, embed_token(t, p, tok), h, c);
        h = h2;
        c = c2;
        out.keys.push_back(h);
    }
    out.summary = h;
    return out;
}

EncoderOutput encode_graph(Tape& t, const Arch& arch, const nn::BoundParams& p,
                           const Formula& formula) {
    SpecGraph g = to_graph(formula);
    nn::GnnWeights w = nn::gnn_weights(p, "enc.gnn.");
    std::vector<nn::GraphEdgeView> edges;
    edges.reserve(g.edges.size());
    for (const auto& e : g.edges) edges.push_back({e.src, e.dst, e.relation});

    std::vector<Value> initial;
    initial.reserve(g.node_count());
    for (const TokenVector& tok : g.node_vectors)
        initial.push_back(embed_token(t, p, tok));

    // State carried between steps is concat(initial embedding, current).
    std::vector<Value> concat_state;
    concat_state.reserve(initial.size());
    for (const Value& v : initial) {
        std::array<Value, 2> parts = {v, v};
        concat_state.push_back(t.concat(parts));
    }
    for (int step = 0; step < arch.gnn_steps; ++step) {
        std::vector<Value> updated = nn::gnn_step(t, w, concat_state, edges);
        for (std::size_t i = 0; i < updated.size(); ++i) {
            std::array<Value, 2> parts = {initial[i], updated[i]};
            concat_state[i] = t.concat(parts);
        }
    }
    EncoderOutput out;
    out.labels = g.node_labels;
    out.keys = concat_state;
    out.summary = nn::graph_pool(t, p.at("enc.pool.W"), p.at("enc.pool.b"),
                                 concat_state, arch.pool);
    return out;
}

EncoderOutput encode_tree(Tape& t, const Arch&, const nn::BoundParams& p,
                          const Formula& formula) {
    SpecGraph g = to_graph(formula);
    nn::TreeLstmWeights w = nn::tree_lstm_weights(p, "enc.tree.");
    // Graph relations {default, interval, until-left, until-right} collapse
    // to tree relations {0, 0, 1, 2}.
    auto tree_relation = [](int graph_rel) {
        if (graph_rel == kRelUntilLeft) return 1;
        if (graph_rel == kRelUntilRight) return 2;
        return 0;
    };
    std::vector<std::pair<Value, Value>> states(g.node_count());
    EncoderOutput out;
    out.labels = g.node_labels;
    // Nodes are stored in post-order, so children are ready before parents.
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        std::vector<nn::TreeChild> children;
        for (auto [src, rel] : g.children_of(static_cast<int>(i)))
            children.push_back(nn::TreeChild{states[static_cast<std::size_t>(src)].first,
                                             states[static_cast<std::size_t>(src)].second,
                                             tree_relation(rel)});
        states[i] = nn::tree_lstm_node(t, w, embed_token(t, p, g.node_vectors[i]),
                                       children);
        out.keys.push_back(states[i].first);
    }
    out.summary = states[static_cast<std::size_t>(g.root)].first;
    return out;
}

}  // namespace

EncoderOutput encode(Tape& t, const Arch& arch, const nn::BoundParams& p,
                     const Formula& formula) {
    switch (arch.variant) {
        case EncoderVariant::Sequential: return encode_sequential(t, arch, p, formula);
        case EncoderVariant::Graph: return encode_graph(t, arch, p, formula);
        case EncoderVariant::Tree: return encode_tree(t, arch, p, formula);
    }
    throw std::runtime_error("bad encoder variant");
}

DecoderState initial_decoder_state(Tape& t, const Arch& arch) {
    DecoderState s;
    for (int layer = 0; layer < arch.decoder_layers; ++layer)
        s.layers.emplace_back(t.zeros(Shape{arch.decoder_hidden, 1}),
                              t.zeros(Shape{arch.decoder_hidden, 1}));
    return s;
}

DecodeResult decode_step(Tape& t, const Arch& arch, const nn::BoundParams& p,
                         const EncoderOutput& enc, DecoderState& state, Value x,
                         std::span<const double> u_min, std::span<const double> u_max) {
    // Attention query is the top-layer hidden from before this step.
    Value query = state.layers.back().first;

    std::array<Value, 2> in_parts = {x, enc.summary};
    Value input = t.concat(in_parts);
    for (std::size_t layer = 0; layer < state.layers.size(); ++layer) {
        nn::LstmWeights w =
            nn::lstm_weights(p, "dec.lstm" + std::to_string(layer + 1) + ".");
        auto [h, c] = nn::lstm_cell(t, w, input, state.layers[layer].first,
                                    state.layers[layer].second);
        state.layers[layer] = {h, c};
        input = h;
    }
    Value top = state.layers.back().first;

    DecodeResult out;
    Value pre = top;
    if (arch.attention) {
        nn::AttentionWeights aw = nn::attention_weights(p, "dec.attn.");
        auto [context, weights] = nn::attention_context(t, aw, query, enc.keys);
        std::array<Value, 2> parts = {top, context};
        pre = t.concat(parts);
        out.attention = weights;
    }
    out.control = nn::output_squash(t, p.at("dec.out.W"), pre, u_min, u_max);
    state.step += 1;
    return out;
}

RolloutResult rollout(Tape& t, const Arch& arch, const nn::BoundParams& p,
                      const Formula& formula, const State& x0, int horizon,
                      const Dynamics& dynamics,
                      std::span<const double> u_min, std::span<const double> u_max) {
    if (formula.horizon() > horizon)
        throw HorizonError("rollout horizon shorter than formula horizon");
    RolloutResult r;
    r.encoder = encode(t, arch, p, formula);
    DecoderState state = initial_decoder_state(t, arch);
    Value x = t.leaf(Shape{arch.state_dim, 1}, x0);
    r.states.push_back(x);
    for (int step = 0; step < horizon; ++step) {
        DecodeResult d = decode_step(t, arch, p, r.encoder, state, x, u_min, u_max);
        r.controls.push_back(d.control);
        if (d.attention) r.attention.push_back(*d.attention);
        x = dynamics(t, x, d.control);
        for (double v : x.data())
            if (!std::isfinite(v))
                throw std::runtime_error("non-finite state during rollout");
        r.states.push_back(x);
    }
    return r;
}

Trajectory to_trajectory(const RolloutResult& r) {
    Trajectory traj;
    for (const Value& s : r.states) {
        auto d = s.data();
        traj.states.push_back(State{d[0], d[1], d[2]});
    }
    for (const Value& u : r.controls) {
        auto d = u.data();
        traj.controls.push_back(Control{d[0], d[1]});
    }
    return traj;
}

}  // namespace stlsynth::policy
