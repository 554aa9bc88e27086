#pragma once

#include <string>

#include "stlsynth/trainer.hpp"

namespace stlsynth {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Run configuration parsed from a flat `key = value` file with `#` comments.
// Unknown keys are rejected; every field has a default matching the
// experimental setup (horizon 16, v_max 1.5, lr 3e-4, 128-dim encoder,
// 2x32 decoder, K=3 aggregation steps, 32-dim embeddings, x0 = origin).
struct RunConfig {
    trainer::TrainConfig train;  // holds arch, env, seed and templates
    trainer::AdaptConfig adapt;
    int gen_per_template = 50;
    std::string spec_set_path;  // input for `eval` (paths.spec_set)
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// The full default configuration rendered as a config file.
std::string default_config_text();

}  // namespace stlsynth
