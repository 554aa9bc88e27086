#pragma once

#include <map>
#include <string>
#include <vector>

#include "stlsynth/rng.hpp"
#include "stlsynth/tape.hpp"

namespace stlsynth::nn {

using ad::Shape;
using ad::Tape;
using ad::Value;

// Plain parameter storage, independent of any tape.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(Shape s, double fill = 0.0)
        : shape(s), data(static_cast<std::size_t>(s.size()), fill) {}
};

// All trainable weights of one controller, keyed by layer name. std::map
// keeps iteration deterministic (sorted by name).
using ParamSet = std::map<std::string, Tensor>;

// Parameters bound onto a tape for one forward/backward pass.
using BoundParams = std::map<std::string, Value>;

BoundParams bind(Tape& tape, const ParamSet& params, bool requires_grad);

// Gradients extracted after backward(), keyed like the ParamSet.
using GradMap = std::map<std::string, std::vector<double>>;

GradMap collect_grads(const ParamSet& params, const BoundParams& bound);
double grad_global_norm(const GradMap& grads);
void clip_grads(GradMap& grads, double max_norm);

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for matrices and vectors, zeros
// for biases (names ending in ".b*"), 1.0 for LSTM forget-gate biases
// (names ending in ".bf").
void init_params(ParamSet& params, Rng& rng);

// W x + b.
Value dense(Tape& t, Value W, Value b, Value x);

struct LstmWeights {
    Value Wi, Wf, Wo, Wu;  // input projections
    Value Ui, Uf, Uo, Uu;  // recurrent projections
    Value bi, bf, bo, bu;
};

LstmWeights lstm_weights(const BoundParams& p, const std::string& prefix);

// One step of the standard LSTM cell; returns (hidden, cell).
std::pair<Value, Value> lstm_cell(Tape& t, const LstmWeights& w, Value input,
                                  Value h_prev, Value c_prev);

struct TreeLstmWeights {
    Value Wi, Wf, Wo, Wu;
    Value Ui, Uf, Uo, Uu;
    Value bi, bf, bo, bu;
    std::array<Value, 3> Wrel;  // child-sum matrices per edge relation
};

TreeLstmWeights tree_lstm_weights(const BoundParams& p, const std::string& prefix);

struct TreeChild {
    Value hidden, cell;
    int relation = 0;  // 0 default, 1 until-left, 2 until-right
};

// Child-sum tree LSTM node update; children may be empty for leaves.
std::pair<Value, Value> tree_lstm_node(Tape& t, const TreeLstmWeights& w,
                                       Value input, std::span<const TreeChild> children);

struct GnnWeights {
    Value W_self;                // applied to the node's own concat state
    std::array<Value, 4> W_rel;  // per-relation neighbor matrices
};

GnnWeights gnn_weights(const BoundParams& p, const std::string& prefix);

struct GraphEdgeView {
    int src, dst, relation;
};

// One synchronized aggregation step: for every node i,
//   h_i = tanh(W_self hbar_i + sum over incoming edges of W_rel[r] hbar_src)
// where hbar is the concat of the initial embedding and the current state.
std::vector<Value> gnn_step(Tape& t, const GnnWeights& w,
                            std::span<const Value> concat_states,
                            std::span<const GraphEdgeView> edges);

enum class PoolMode { Max, Mean, Sum };

// Elementwise pooling of dense(W,b,state_i) over all nodes.
Value graph_pool(Tape& t, Value W, Value b, std::span<const Value> states,
                 PoolMode mode);

struct AttentionWeights {
    Value Wq;  // query projection of the decoder hidden
    Value Wk;  // key projection of encoder hiddens
    Value v;   // alignment vector
};

AttentionWeights attention_weights(const BoundParams& p, const std::string& prefix);

// Additive attention: scores v . tanh(Wq query + Wk key_j), softmax over j,
// context = weighted sum of keys. Returns (context, weights).
std::pair<Value, Value> attention_context(Tape& t, const AttentionWeights& w,
                                          Value query, std::span<const Value> keys);

// u = u_min + (u_max - u_min)/2 * (tanh(W pre) + 1), strictly inside the
// box (a one-ulp interior clamp guards IEEE tanh saturating to exactly 1).
Value output_squash(Tape& t, Value W, Value pre,
                    std::span<const double> u_min, std::span<const double> u_max);

// Adam with bias correction.
struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    long step = 0;
    std::map<std::string, std::vector<double>> m, v;

    explicit AdamState(AdamConfig c = {}) : cfg(c) {}
};

// In-place update; throws if a parameter has no gradient entry.
void adam_step(AdamState& state, ParamSet& params, const GradMap& grads);

// Checkpoint: versioned little-endian binary, bit-exact round trip.
struct CheckpointMeta {
    std::string encoder;   // "sequential" | "graph" | "tree"
    bool attention = false;
    int encoder_hidden = 128;
    int decoder_hidden = 32;
    int decoder_layers = 2;
    int embedding_dim = 32;
    int gnn_steps = 3;
    int attention_dim = 32;
    std::string pool = "max";
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const ParamSet& params);
std::pair<CheckpointMeta, ParamSet> load_checkpoint(const std::string& path);

}  // namespace stlsynth::nn
