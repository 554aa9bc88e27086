#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stlsynth/nn.hpp"
#include "stlsynth/robustness.hpp"
#include "stlsynth/tokens.hpp"

namespace stlsynth::policy {

using ad::Shape;
using ad::Tape;
using ad::Value;

enum class EncoderVariant { Sequential, Graph, Tree };

EncoderVariant encoder_variant_from_string(const std::string& s);
std::string to_string(EncoderVariant v);

// Architecture description. Field defaults match the experimental setup:
// 128-dim encoder hidden state, 2-layer 32-dim decoder, 32-dim embeddings,
// 3 aggregation steps with max pooling for the graph encoder.
struct Arch {
    EncoderVariant variant = EncoderVariant::Sequential;
    bool attention = false;
    int encoder_hidden = 128;
    int decoder_hidden = 32;
    int decoder_layers = 2;
    int embedding_dim = 32;
    int gnn_steps = 3;
    int attention_dim = 32;
    nn::PoolMode pool = nn::PoolMode::Max;
    int state_dim = 3;
    int control_dim = 2;

    // Dimension of the attention keys produced by this encoder.
    int key_dim() const {
        return variant == EncoderVariant::Graph ? 2 * encoder_hidden : encoder_hidden;
    }
};

nn::CheckpointMeta to_meta(const Arch& arch);
Arch arch_from_meta(const nn::CheckpointMeta& meta);

// Allocates every tensor of the architecture (uninitialized; call
// nn::init_params afterwards). Encoder weights live under "enc.", decoder
// and attention weights under "dec." -- adaptation freezes everything
// outside the "dec." prefix.
nn::ParamSet make_params(const Arch& arch);

inline constexpr const char* kDecoderPrefix = "dec.";

// Specification summary plus per-element hidden vectors (attention keys).
struct EncoderOutput {
    Value summary;
    std::vector<Value> keys;
    std::vector<std::string> labels;
};

EncoderOutput encode(Tape& t, const Arch& arch, const nn::BoundParams& p,
                     const Formula& formula);

struct DecoderState {
    std::vector<std::pair<Value, Value>> layers;  // (hidden, cell) per layer
    int step = 0;
};

DecoderState initial_decoder_state(Tape& t, const Arch& arch);

struct DecodeResult {
    Value control;
    std::optional<Value> attention;  // softmax weights over encoder keys
};

DecodeResult decode_step(Tape& t, const Arch& arch, const nn::BoundParams& p,
                         const EncoderOutput& enc, DecoderState& state, Value x,
                         std::span<const double> u_min, std::span<const double> u_max);

// x_{t+1} = f(x_t, u_t) on the tape.
using Dynamics = std::function<Value(Tape&, Value x, Value u)>;

struct RolloutResult {
    std::vector<Value> states;    // length T+1
    std::vector<Value> controls;  // length T
    std::vector<Value> attention; // length T when attention is on
    EncoderOutput encoder;
};

RolloutResult rollout(Tape& t, const Arch& arch, const nn::BoundParams& p,
                      const Formula& formula, const State& x0, int horizon,
                      const Dynamics& dynamics,
                      std::span<const double> u_min, std::span<const double> u_max);

// Detach a rollout into a plain trajectory.
Trajectory to_trajectory(const RolloutResult& r);

}  // namespace stlsynth::policy
