#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crope/model.hpp"

namespace crope {

struct TrainConfig {
    ModelConfig model;
    std::string data_path;
    std::size_t batch_size = 16;
    std::size_t seq_len = 128;
    std::size_t steps = 2000;
    std::size_t warmup_steps = 50;
    double lr_max = 2e-3;
    double lr_min = 4e-4;
    double weight_decay = 0.1;
    std::string optimizer = "adamw";
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    std::size_t log_every = 10;
    std::size_t eval_every = 500;
    uint64_t seed = 0;

    void validate() const {
        model.validate();
        if (lr_min > lr_max) throw std::invalid_argument("train config: lr_min > lr_max");
        if (warmup_steps >= steps) throw std::invalid_argument("train config: warmup_steps must be < steps");
        if (seq_len > model.max_seq_len)
            throw std::invalid_argument("train config: seq_len " + std::to_string(seq_len) +
                                        " exceeds model.max_seq_len " + std::to_string(model.max_seq_len));
        if (optimizer != "adamw") throw std::invalid_argument("train config: unknown optimizer '" + optimizer + "'");
        if (log_every == 0 || eval_every == 0) throw std::invalid_argument("train config: zero logging interval");
    }
};

namespace detail {

inline double parse_real(const std::string& key, const std::string& s) {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("config: bad number '" + s + "' for key '" + key + "'");
    return v;
}

inline uint64_t parse_uint(const std::string& key, const std::string& s) {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size() || s.find('-') != std::string::npos)
        throw std::invalid_argument("config: bad count '" + s + "' for key '" + key + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("config: bad bool '" + s + "' for key '" + key + "'");
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace detail

// Applies one `key = value` pair; unknown keys are errors, not warnings.
inline void set_config_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_bool;
    using detail::parse_real;
    using detail::parse_uint;
    if (key == "model.n_layers")
        cfg.model.n_layers = std::size_t(parse_uint(key, value));
    else if (key == "model.n_heads")
        cfg.model.n_heads = std::size_t(parse_uint(key, value));
    else if (key == "model.d_model")
        cfg.model.d_model = std::size_t(parse_uint(key, value));
    else if (key == "model.d_ff")
        cfg.model.d_ff = std::size_t(parse_uint(key, value));
    else if (key == "model.vocab_size")
        cfg.model.vocab_size = std::size_t(parse_uint(key, value));
    else if (key == "model.max_seq_len")
        cfg.model.max_seq_len = std::size_t(parse_uint(key, value));
    else if (key == "model.rope_base")
        cfg.model.rope_base = parse_real(key, value);
    else if (key == "model.mode")
        cfg.model.mode = parse_mode(value);
    else if (key == "model.seed")
        cfg.model.seed = parse_uint(key, value);
    else if (key == "model.causal")
        cfg.model.causal = parse_bool(key, value);
    else if (key == "data_path")
        cfg.data_path = value;
    else if (key == "batch_size")
        cfg.batch_size = std::size_t(parse_uint(key, value));
    else if (key == "seq_len")
        cfg.seq_len = std::size_t(parse_uint(key, value));
    else if (key == "steps")
        cfg.steps = std::size_t(parse_uint(key, value));
    else if (key == "warmup_steps")
        cfg.warmup_steps = std::size_t(parse_uint(key, value));
    else if (key == "lr_max")
        cfg.lr_max = parse_real(key, value);
    else if (key == "lr_min")
        cfg.lr_min = parse_real(key, value);
    else if (key == "weight_decay")
        cfg.weight_decay = parse_real(key, value);
    else if (key == "optimizer")
        cfg.optimizer = value;
    else if (key == "beta1")
        cfg.beta1 = parse_real(key, value);
    else if (key == "beta2")
        cfg.beta2 = parse_real(key, value);
    else if (key == "eps")
        cfg.eps = parse_real(key, value);
    else if (key == "log_every")
        cfg.log_every = std::size_t(parse_uint(key, value));
    else if (key == "eval_every")
        cfg.eval_every = std::size_t(parse_uint(key, value));
    else if (key == "seed")
        cfg.seed = parse_uint(key, value);
    else
        throw std::invalid_argument("config: unknown key '" + key + "'");
}

// Flat `key = value` document, one pair per line, '#' comments.
inline TrainConfig parse_config_text(const std::string& text, TrainConfig base = {}) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not 'key = value'");
        set_config_key(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return base;
}

inline void apply_overrides(TrainConfig& cfg, const std::vector<std::string>& overrides) {
    for (const auto& ov : overrides) {
        const std::size_t eq = ov.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("override '" + ov + "' is not key=value");
        set_config_key(cfg, detail::trim(ov.substr(0, eq)), detail::trim(ov.substr(eq + 1)));
    }
}

inline std::string serialize_config(const TrainConfig& cfg) {
    std::ostringstream os;
    os.precision(17);
    os << "model.n_layers = " << cfg.model.n_layers << "\n";
    os << "model.n_heads = " << cfg.model.n_heads << "\n";
    os << "model.d_model = " << cfg.model.d_model << "\n";
    os << "model.d_ff = " << cfg.model.d_ff << "\n";
    os << "model.vocab_size = " << cfg.model.vocab_size << "\n";
    os << "model.max_seq_len = " << cfg.model.max_seq_len << "\n";
    os << "model.rope_base = " << cfg.model.rope_base << "\n";
    os << "model.mode = " << mode_name(cfg.model.mode) << "\n";
    os << "model.seed = " << cfg.model.seed << "\n";
    os << "model.causal = " << (cfg.model.causal ? "true" : "false") << "\n";
    os << "data_path = " << cfg.data_path << "\n";
    os << "batch_size = " << cfg.batch_size << "\n";
    os << "seq_len = " << cfg.seq_len << "\n";
    os << "steps = " << cfg.steps << "\n";
    os << "warmup_steps = " << cfg.warmup_steps << "\n";
    os << "lr_max = " << cfg.lr_max << "\n";
    os << "lr_min = " << cfg.lr_min << "\n";
    os << "weight_decay = " << cfg.weight_decay << "\n";
    os << "optimizer = " << cfg.optimizer << "\n";
    os << "beta1 = " << cfg.beta1 << "\n";
    os << "beta2 = " << cfg.beta2 << "\n";
    os << "eps = " << cfg.eps << "\n";
    os << "log_every = " << cfg.log_every << "\n";
    os << "eval_every = " << cfg.eval_every << "\n";
    os << "seed = " << cfg.seed << "\n";
    return os.str();
}

}  // namespace crope
