#include "stlsynth/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace stlsynth {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
    }
}

long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        long d = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + key + ": '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean value for " + key + ": '" + v + "'");
}

std::vector<std::string> split(const std::string& v, char sep) {
    std::vector<std::string> out;
    std::istringstream is(v);
    std::string item;
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    return out;
}

void apply(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto& train = cfg.train;
    auto& arch = cfg.train.arch;
    auto& envc = cfg.train.env;
    if (key == "encoder") {
        arch.variant = policy::encoder_variant_from_string(value);
    } else if (key == "attention") {
        arch.attention = to_bool(key, value);
    } else if (key == "seed") {
        train.seed = static_cast<std::uint64_t>(to_long(key, value));
    } else if (key == "train.iterations") {
        train.iterations = static_cast<int>(to_long(key, value));
        if (train.iterations < 0) throw ConfigError("train.iterations must be >= 0");
    } else if (key == "train.pairs_per_iteration") {
        train.pairs_per_iteration = static_cast<int>(to_long(key, value));
        if (train.pairs_per_iteration < 1)
            throw ConfigError("train.pairs_per_iteration must be >= 1");
    } else if (key == "train.beta") {
        train.beta = to_double(key, value);
        if (train.beta <= 0) throw ConfigError("train.beta must be positive");
    } else if (key == "train.lr") {
        train.adam.lr = to_double(key, value);
    } else if (key == "train.adam_beta1") {
        train.adam.beta1 = to_double(key, value);
    } else if (key == "train.adam_beta2") {
        train.adam.beta2 = to_double(key, value);
    } else if (key == "train.adam_eps") {
        train.adam.eps = to_double(key, value);
    } else if (key == "train.clip_norm") {
        train.clip_norm = to_double(key, value);
    } else if (key == "train.eval_every") {
        train.eval_every = static_cast<int>(to_long(key, value));
    } else if (key == "train.eval_specs") {
        train.eval_specs = static_cast<int>(to_long(key, value));
    } else if (key == "train.templates") {
        train.templates.clear();
        for (const std::string& name : split(value, ','))
            train.templates.push_back(env::template_from_string(name));
        if (train.templates.empty()) throw ConfigError("train.templates is empty");
    } else if (key == "adapt.threshold") {
        cfg.adapt.threshold = to_double(key, value);
        if (cfg.adapt.threshold <= 0) throw ConfigError("adapt.threshold must be > 0");
    } else if (key == "adapt.max_steps") {
        cfg.adapt.max_steps = static_cast<int>(to_long(key, value));
    } else if (key == "adapt.lr") {
        cfg.adapt.adam.lr = to_double(key, value);
    } else if (key == "adapt.beta") {
        cfg.adapt.beta = to_double(key, value);
    } else if (key == "adapt.clip_norm") {
        cfg.adapt.clip_norm = to_double(key, value);
    } else if (key == "env.dt") {
        envc.dt = to_double(key, value);
        if (envc.dt <= 0) throw ConfigError("env.dt must be positive");
    } else if (key == "env.horizon") {
        envc.horizon = static_cast<int>(to_long(key, value));
        if (envc.horizon < 0) throw ConfigError("env.horizon must be >= 0");
    } else if (key == "env.v_max") {
        envc.v_max = to_double(key, value);
    } else if (key == "env.omega_max") {
        envc.omega_max = to_double(key, value);
    } else if (key == "env.x0") {
        auto parts = split(value, ',');
        if (parts.size() != 3) throw ConfigError("env.x0 needs three components");
        for (int i = 0; i < 3; ++i)
            envc.x0[static_cast<std::size_t>(i)] = to_double(key, parts[static_cast<std::size_t>(i)]);
    } else if (key == "model.encoder_hidden") {
        arch.encoder_hidden = static_cast<int>(to_long(key, value));
        if (arch.encoder_hidden < 1) throw ConfigError("model.encoder_hidden must be >= 1");
    } else if (key == "model.decoder_hidden") {
        arch.decoder_hidden = static_cast<int>(to_long(key, value));
        if (arch.decoder_hidden < 1) throw ConfigError("model.decoder_hidden must be >= 1");
    } else if (key == "model.decoder_layers") {
        arch.decoder_layers = static_cast<int>(to_long(key, value));
        if (arch.decoder_layers < 1) throw ConfigError("model.decoder_layers must be >= 1");
    } else if (key == "model.embedding_dim") {
        arch.embedding_dim = static_cast<int>(to_long(key, value));
        if (arch.embedding_dim < 1) throw ConfigError("model.embedding_dim must be >= 1");
    } else if (key == "model.gnn_steps") {
        arch.gnn_steps = static_cast<int>(to_long(key, value));
        if (arch.gnn_steps < 1) throw ConfigError("model.gnn_steps must be >= 1");
    } else if (key == "model.gnn_pool") {
        if (value == "max") arch.pool = nn::PoolMode::Max;
        else if (value == "mean") arch.pool = nn::PoolMode::Mean;
        else if (value == "sum") arch.pool = nn::PoolMode::Sum;
        else throw ConfigError("model.gnn_pool must be max, mean or sum");
    } else if (key == "model.attention_dim") {
        arch.attention_dim = static_cast<int>(to_long(key, value));
        if (arch.attention_dim < 1) throw ConfigError("model.attention_dim must be >= 1");
    } else if (key == "gen.per_template") {
        cfg.gen_per_template = static_cast<int>(to_long(key, value));
        if (cfg.gen_per_template < 1) throw ConfigError("gen.per_template must be >= 1");
    } else if (key == "paths.spec_set") {
        cfg.spec_set_path = value;
    } else {
        throw ConfigError("unknown configuration key: " + key);
    }
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        apply(cfg, key, value);
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

std::string default_config_text() {
    return
        "# stl-synth run configuration\n"
        "encoder = sequential            # sequential | graph | tree\n"
        "attention = true\n"
        "seed = 0\n"
        "\n"
        "train.iterations = 2000\n"
        "train.pairs_per_iteration = 4\n"
        "train.beta = 5\n"
        "train.lr = 0.0003\n"
        "train.adam_beta1 = 0.9\n"
        "train.adam_beta2 = 0.999\n"
        "train.adam_eps = 1e-8\n"
        "train.clip_norm = 10\n"
        "train.eval_every = 50\n"
        "train.eval_specs = 50\n"
        "train.templates = T1,T2,T3,T4   # T1-T4, TP1-TP3, F\n"
        "\n"
        "adapt.threshold = 0.05\n"
        "adapt.max_steps = 2000\n"
        "adapt.lr = 0.0003\n"
        "adapt.beta = 5\n"
        "adapt.clip_norm = 10\n"
        "\n"
        "env.dt = 1\n"
        "env.horizon = 16\n"
        "env.v_max = 1.5\n"
        "env.omega_max = 1\n"
        "env.x0 = 0,0,0\n"
        "\n"
        "model.encoder_hidden = 128\n"
        "model.decoder_hidden = 32\n"
        "model.decoder_layers = 2\n"
        "model.embedding_dim = 32\n"
        "model.gnn_steps = 3\n"
        "model.gnn_pool = max\n"
        "model.attention_dim = 32\n"
        "\n"
        "gen.per_template = 50\n"
        "paths.spec_set = specs.txt\n";
}

}  // namespace stlsynth
