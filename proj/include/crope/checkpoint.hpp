#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "crope/config.hpp"
#include "crope/model.hpp"

#include "json.hpp"

namespace crope {

static_assert(std::endian::native == std::endian::little, "checkpoint payload is little-endian");

// Checkpoint file: one JSON manifest line (tensor names, shapes, offsets, the
// full model config, RNG state and the resolved design flags), then raw
// little-endian f32 payload in manifest order. Tied layers store their free
// parameters, never the materialized weight.
struct RngState {
    uint64_t seed = 0;
    uint64_t stream = 0;
    uint64_t counter = 0;
};

inline nlohmann::json model_config_json(const ModelConfig& cfg) {
    return {{"n_layers", cfg.n_layers},   {"n_heads", cfg.n_heads},       {"d_model", cfg.d_model},
            {"d_ff", cfg.d_ff},           {"vocab_size", cfg.vocab_size}, {"max_seq_len", cfg.max_seq_len},
            {"rope_base", cfg.rope_base}, {"mode", mode_name(cfg.mode)},  {"seed", cfg.seed},
            {"causal", cfg.causal}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.n_layers = j.at("n_layers").get<std::size_t>();
    cfg.n_heads = j.at("n_heads").get<std::size_t>();
    cfg.d_model = j.at("d_model").get<std::size_t>();
    cfg.d_ff = j.at("d_ff").get<std::size_t>();
    cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
    cfg.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    cfg.rope_base = j.at("rope_base").get<double>();
    cfg.mode = parse_mode(j.at("mode").get<std::string>());
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.causal = j.at("causal").get<bool>();
    return cfg;
}

// Design decisions are recorded per artifact so results are self-describing.
inline nlohmann::json design_flags_json() {
    return {{"qk_norm", "per_head_rms_gain_free_pre_rotation"},
            {"optimizer", "adamw_decoupled"},
            {"schedule", "linear_warmup_cosine"},
            {"rope_schedule", "base^(-2(t-1)/head_dim)"},
            {"pair_layout", "interleaved"},
            {"loss_smoothing", "ema_0.05_reporting_only"},
            {"val_split", "final_0.10_contiguous"}};
}

template <class T>
void save_checkpoint(Model<T>& model, const std::string& path, const RngState& rng = {},
                     const std::optional<TrainConfig>& train_cfg = std::nullopt) {
    nlohmann::json manifest;
    manifest["format"] = "crope-checkpoint";
    manifest["version"] = 1;
    manifest["model"] = model_config_json(model.config());
    manifest["rng"] = {{"seed", rng.seed}, {"stream", rng.stream}, {"counter", rng.counter}};
    manifest["flags"] = design_flags_json();
    if (train_cfg) manifest["train_config"] = serialize_config(*train_cfg);

    nlohmann::json tensors = nlohmann::json::array();
    std::size_t offset = 0;
    for (auto& p : model.params()) {
        tensors.push_back({{"name", p.name},
                           {"shape", p.tensor.shape()},
                           {"dtype", "f32"},
                           {"offset", offset},
                           {"numel", p.tensor.numel()}});
        offset += p.tensor.numel() * sizeof(float);
    }
    manifest["tensors"] = tensors;

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
    f << manifest.dump() << "\n";
    for (auto& p : model.params()) {
        if constexpr (std::is_same_v<T, float>) {
            f.write(reinterpret_cast<const char*>(p.tensor.value().data()),
                    std::streamsize(p.tensor.numel() * sizeof(float)));
        } else {
            std::vector<float> tmp(p.tensor.numel());
            for (std::size_t i = 0; i < tmp.size(); ++i) tmp[i] = float(p.tensor.value()[i]);
            f.write(reinterpret_cast<const char*>(tmp.data()), std::streamsize(tmp.size() * sizeof(float)));
        }
    }
    if (!f) throw std::runtime_error("checkpoint: short write to '" + path + "'");
}

struct LoadedCheckpoint {
    ModelConfig config;
    RngState rng;
    nlohmann::json manifest;
    std::vector<std::pair<std::string, std::vector<float>>> tensors;
};

inline LoadedCheckpoint read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument("checkpoint: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("checkpoint: missing manifest in '" + path + "'");
    LoadedCheckpoint ck;
    ck.manifest = nlohmann::json::parse(line);
    if (ck.manifest.value("format", "") != "crope-checkpoint")
        throw std::runtime_error("checkpoint: '" + path + "' is not a crope checkpoint");
    ck.config = model_config_from_json(ck.manifest.at("model"));
    ck.rng.seed = ck.manifest.at("rng").at("seed").get<uint64_t>();
    ck.rng.stream = ck.manifest.at("rng").at("stream").get<uint64_t>();
    ck.rng.counter = ck.manifest.at("rng").at("counter").get<uint64_t>();
    for (const auto& t : ck.manifest.at("tensors")) {
        const std::string name = t.at("name").get<std::string>();
        const std::size_t numel = t.at("numel").get<std::size_t>();
        std::vector<float> data(numel);
        f.read(reinterpret_cast<char*>(data.data()), std::streamsize(numel * sizeof(float)));
        if (std::size_t(f.gcount()) != numel * sizeof(float))
            throw std::runtime_error("checkpoint: truncated payload at tensor '" + name + "'");
        ck.tensors.emplace_back(name, std::move(data));
    }
    return ck;
}

// Rebuilds the model described by the manifest and fills every parameter.
inline Model<float> load_checkpoint(const std::string& path,
                                    const std::optional<ModelConfig>& expect = std::nullopt) {
    LoadedCheckpoint ck = read_checkpoint(path);
    if (expect) {
        if (expect->mode != ck.config.mode)
            throw std::runtime_error("checkpoint: mode mismatch, checkpoint is '" + mode_name(ck.config.mode) +
                                     "' but config wants '" + mode_name(expect->mode) + "'");
        const auto want = param_shapes(*expect);
        const auto have = param_shapes(ck.config);
        if (want != have) throw std::runtime_error("checkpoint: parameter set differs from expected config");
    }
    Model<float> model(ck.config);
    auto& params = model.params();
    if (params.size() != ck.tensors.size()) {
        // Name the first parameter missing from the file.
        for (auto& p : params) {
            bool found = false;
            for (auto& [name, data] : ck.tensors) found = found || name == p.name;
            if (!found) throw std::runtime_error("checkpoint: manifest is missing tensor '" + p.name + "'");
        }
        throw std::runtime_error("checkpoint: tensor count mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& [name, data] = ck.tensors[i];
        if (name != params[i].name)
            throw std::runtime_error("checkpoint: tensor order mismatch at '" + name + "', expected '" +
                                     params[i].name + "'");
        if (data.size() != params[i].tensor.numel())
            throw std::runtime_error("checkpoint: shape mismatch for tensor '" + name + "'");
        std::copy(data.begin(), data.end(), params[i].tensor.value().begin());
    }
    return model;
}

}  // namespace crope
