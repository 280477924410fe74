#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "crope/layers.hpp"
#include "crope/ops.hpp"
#include "crope/rng.hpp"
#include "crope/rope.hpp"
#include "crope/tensor.hpp"

namespace crope {

// Where the complex-linear tie is applied inside attention, plus the two
// dense half-width baselines that match the tied parameter counts.
enum class Mode { none, crope_qk, crope_qkv, crope_all, half_rope_qk, half_rope_all };

inline const std::vector<std::pair<Mode, std::string>>& mode_table() {
    static const std::vector<std::pair<Mode, std::string>> t = {
        {Mode::none, "none"},           {Mode::crope_qk, "crope_qk"},
        {Mode::crope_qkv, "crope_qkv"}, {Mode::crope_all, "crope_all"},
        {Mode::half_rope_qk, "half_rope_qk"}, {Mode::half_rope_all, "half_rope_all"}};
    return t;
}

inline std::string mode_name(Mode m) {
    for (const auto& [mode, name] : mode_table())
        if (mode == m) return name;
    throw std::invalid_argument("mode_name: unknown mode");
}

inline Mode parse_mode(const std::string& s) {
    for (const auto& [mode, name] : mode_table())
        if (name == s) return mode;
    throw std::invalid_argument("unknown mode '" + s + "'");
}

inline bool is_half_mode(Mode m) { return m == Mode::half_rope_qk || m == Mode::half_rope_all; }

struct ModelConfig {
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t d_model = 128;
    std::size_t d_ff = 256;
    std::size_t vocab_size = 256;
    std::size_t max_seq_len = 128;
    double rope_base = 5000.0;
    Mode mode = Mode::none;
    uint64_t seed = 0;
    bool causal = true;

    std::size_t qk_dim() const { return is_half_mode(mode) ? d_model / 2 : d_model; }
    std::size_t v_dim() const { return mode == Mode::half_rope_all ? d_model / 2 : d_model; }
    std::size_t qk_head_dim() const { return qk_dim() / n_heads; }
    std::size_t v_head_dim() const { return v_dim() / n_heads; }

    struct TieFlags {
        bool q, k, v, out;
    };
    TieFlags ties() const {
        switch (mode) {
            case Mode::crope_qk: return {true, true, false, false};
            case Mode::crope_qkv: return {true, true, true, false};
            case Mode::crope_all: return {true, true, true, true};
            default: return {false, false, false, false};
        }
    }

    void validate() const {
        if (d_model == 0 || n_heads == 0 || n_layers == 0 || vocab_size == 0)
            throw std::invalid_argument("model config: zero-sized field");
        if (d_model % n_heads != 0)
            throw std::invalid_argument("model config: d_model " + std::to_string(d_model) +
                                        " not divisible by n_heads " + std::to_string(n_heads));
        if (qk_dim() % n_heads != 0 || v_dim() % n_heads != 0)
            throw std::invalid_argument("model config: halved projection width not divisible by n_heads");
        if (qk_head_dim() % 2 != 0 || qk_head_dim() == 0)
            throw std::invalid_argument("model config: q/k head_dim " + std::to_string(qk_head_dim()) +
                                        " must be even and positive");
        if (v_head_dim() % 2 != 0 || v_head_dim() == 0)
            throw std::invalid_argument("model config: v head_dim must be even and positive");
    }
};

// Enumerates the parameter set (name, shape) of a config without allocating
// it. This is the audit's independent route; Model construction must match.
inline std::vector<std::pair<std::string, Shape>> param_shapes(const ModelConfig& cfg) {
    cfg.validate();
    std::vector<std::pair<std::string, Shape>> out;
    out.emplace_back("embed", Shape{cfg.vocab_size, cfg.d_model});
    const auto ties = cfg.ties();
    auto block_shape = [](std::size_t in, std::size_t out_dim, bool tied) {
        return Shape{out_dim / 2, in / 2, tied ? std::size_t(2) : std::size_t(4)};
    };
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "layers." + std::to_string(l) + ".";
        out.emplace_back(p + "attn.norm.gain", Shape{cfg.d_model});
        out.emplace_back(p + "attn.wq.blocks", block_shape(cfg.d_model, cfg.qk_dim(), ties.q));
        out.emplace_back(p + "attn.wk.blocks", block_shape(cfg.d_model, cfg.qk_dim(), ties.k));
        out.emplace_back(p + "attn.wv.blocks", block_shape(cfg.d_model, cfg.v_dim(), ties.v));
        out.emplace_back(p + "attn.wo.blocks", block_shape(cfg.v_dim(), cfg.d_model, ties.out));
        out.emplace_back(p + "ffn.norm.gain", Shape{cfg.d_model});
        out.emplace_back(p + "ffn.w_gate", Shape{cfg.d_ff, cfg.d_model});
        out.emplace_back(p + "ffn.w_up", Shape{cfg.d_ff, cfg.d_model});
        out.emplace_back(p + "ffn.w_down", Shape{cfg.d_model, cfg.d_ff});
    }
    out.emplace_back("final_norm.gain", Shape{cfg.d_model});
    return out;
}

// Exact integer counts per component; savings measured against projection
// weights of mode `none` at the same width.
struct ParamAudit {
    std::size_t embedding = 0;
    std::size_t attention = 0;
    std::size_t ffn = 0;
    std::size_t norms = 0;
    std::size_t total = 0;
    double attention_savings = 0.0;
};

inline ParamAudit param_audit(const ModelConfig& cfg) {
    ParamAudit a;
    for (const auto& [name, shape] : param_shapes(cfg)) {
        const std::size_t n = shape_numel(shape);
        if (name == "embed")
            a.embedding += n;
        else if (name.find(".attn.w") != std::string::npos)
            a.attention += n;
        else if (name.find(".ffn.w") != std::string::npos)
            a.ffn += n;
        else
            a.norms += n;
        a.total += n;
    }
    // Closed-form cross-check of the attention count.
    const auto ties = cfg.ties();
    auto proj = [](std::size_t in, std::size_t out, bool tied) { return in * out / (tied ? 2 : 1); };
    const std::size_t formula = cfg.n_layers * (proj(cfg.d_model, cfg.qk_dim(), ties.q) +
                                                proj(cfg.d_model, cfg.qk_dim(), ties.k) +
                                                proj(cfg.d_model, cfg.v_dim(), ties.v) +
                                                proj(cfg.v_dim(), cfg.d_model, ties.out));
    if (formula != a.attention)
        throw std::logic_error("param_audit: closed-form attention count " + std::to_string(formula) +
                               " != enumerated " + std::to_string(a.attention));
    const std::size_t dense = cfg.n_layers * 4 * cfg.d_model * cfg.d_model;
    a.attention_savings = 1.0 - double(a.attention) / double(dense);
    return a;
}

// Per-head attention snapshot taken during forward, for inspection and CSV
// export. `scores` is the full pre-mask score matrix.
template <class T>
struct AttnTap {
    std::size_t layer = 0;
    std::size_t head = 0;
    std::size_t batch = 0;
    Tensor<T> weights;
    Tensor<T> scores;
    bool filled = false;
};

template <class T>
class Model {
  public:
    explicit Model(const ModelConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        Rng root(cfg.seed, 0);

        embed_ = Tensor<T>::zeros({cfg.vocab_size, cfg.d_model}, true);
        {
            Rng r = root.split("embed");
            for (auto& w : embed_.value()) w = T(r.normal() * 0.02);
        }

        const auto ties = cfg.ties();
        layers_.resize(cfg.n_layers);
        for (std::size_t l = 0; l < cfg.n_layers; ++l) {
            const std::string p = "layers." + std::to_string(l) + ".";
            auto& lay = layers_[l];
            lay.attn_norm = RmsNorm<T>(cfg.d_model);
            lay.wq = BlockLinear<T>(cfg.d_model, cfg.qk_dim(), ties.q, root.split(p + "attn.wq.blocks"));
            lay.wk = BlockLinear<T>(cfg.d_model, cfg.qk_dim(), ties.k, root.split(p + "attn.wk.blocks"));
            lay.wv = BlockLinear<T>(cfg.d_model, cfg.v_dim(), ties.v, root.split(p + "attn.wv.blocks"));
            lay.wo = BlockLinear<T>(cfg.v_dim(), cfg.d_model, ties.out, root.split(p + "attn.wo.blocks"));
            lay.ffn_norm = RmsNorm<T>(cfg.d_model);
            lay.ffn = SwigluFfn<T>(cfg.d_model, cfg.d_ff, root.split(p + "ffn"));
        }
        final_norm_ = RmsNorm<T>(cfg.d_model);

        rope_ = RopeConfig(cfg.qk_head_dim(), cfg.rope_base);
        build_rotation_tables();
        build_registry();
    }

    const ModelConfig& config() const { return cfg_; }
    const RopeConfig& rope() const { return rope_; }
    std::vector<Parameter<T>>& params() { return params_; }
    const std::vector<Parameter<T>>& params() const { return params_; }

    Tensor<T> param(const std::string& name) {
        for (auto& p : params_)
            if (p.name == name) return p.tensor;
        throw std::out_of_range("model: no parameter named '" + name + "'");
    }

    std::size_t param_total() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.tensor.numel();
        return n;
    }

    // tokens are row-major [batch x seq]; returns logits [batch*seq x vocab].
    Tensor<T> forward(const std::vector<int32_t>& tokens, std::size_t batch, std::size_t seq,
                      AttnTap<T>* tap = nullptr) const {
        if (tokens.size() != batch * seq)
            throw std::invalid_argument("forward: token count " + std::to_string(tokens.size()) + " != " +
                                        std::to_string(batch) + "x" + std::to_string(seq));
        if (seq == 0 || seq > cfg_.max_seq_len)
            throw std::invalid_argument("forward: seq length " + std::to_string(seq) + " outside [1, " +
                                        std::to_string(cfg_.max_seq_len) + "]");
        const std::size_t hq = cfg_.qk_head_dim(), hv = cfg_.v_head_dim();
        const T inv_sqrt = T(1.0 / std::sqrt(double(hq)));

        Tensor<T> x = embedding_lookup(embed_, tokens);
        for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
            const auto& lay = layers_[l];
            Tensor<T> h = lay.attn_norm.forward(x);
            Tensor<T> q = lay.wq.forward(h);
            Tensor<T> k = lay.wk.forward(h);
            Tensor<T> v = lay.wv.forward(h);

            std::vector<Tensor<T>> batch_rows;
            batch_rows.reserve(batch);
            for (std::size_t b = 0; b < batch; ++b) {
                std::vector<Tensor<T>> head_cols;
                head_cols.reserve(cfg_.n_heads);
                for (std::size_t hd = 0; hd < cfg_.n_heads; ++hd) {
                    Tensor<T> qs = slice_block(q, b * seq, (b + 1) * seq, hd * hq, (hd + 1) * hq);
                    Tensor<T> ks = slice_block(k, b * seq, (b + 1) * seq, hd * hq, (hd + 1) * hq);
                    Tensor<T> vs = slice_block(v, b * seq, (b + 1) * seq, hd * hv, (hd + 1) * hv);
                    // Per-head QK-Norm (gain-free), then position rotation.
                    qs = rms_norm_rows(qs, Tensor<T>{}, kQkNormEps);
                    ks = rms_norm_rows(ks, Tensor<T>{}, kQkNormEps);
                    qs = rope_rotate(qs, cos_tab_, sin_tab_);
                    ks = rope_rotate(ks, cos_tab_, sin_tab_);
                    Tensor<T> scores = scale(matmul(qs, ks, false, true), inv_sqrt);
                    Tensor<T> att = cfg_.causal ? causal_softmax(scores) : softmax_rows(scores);
                    if (tap && !tap->filled && tap->layer == l && tap->head == hd && tap->batch == b) {
                        tap->weights = att;
                        tap->scores = scores;
                        tap->filled = true;
                    }
                    head_cols.push_back(matmul(att, vs));
                }
                batch_rows.push_back(concat_cols(head_cols));
            }
            Tensor<T> ctx = batch == 1 ? batch_rows[0] : concat_rows(batch_rows);
            x = add(x, lay.wo.forward(ctx));
            x = add(x, lay.ffn.forward(lay.ffn_norm.forward(x)));
        }
        x = final_norm_.forward(x);
        return matmul(x, embed_, false, true);  // tied unembedding
    }

    // Post-softmax attention weights for one (layer, head) on a single
    // sequence; rows sum to 1 over the unmasked positions.
    Tensor<T> attention_map(const std::vector<int32_t>& tokens, std::size_t layer, std::size_t head) const {
        AttnTap<T> tap{layer, head, 0};
        run_tapped(tokens, tap);
        return tap.weights;
    }

    // Pre-mask score matrix (scaled q.k for every position pair).
    Tensor<T> attention_scores(const std::vector<int32_t>& tokens, std::size_t layer, std::size_t head) const {
        AttnTap<T> tap{layer, head, 0};
        run_tapped(tokens, tap);
        return tap.scores;
    }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    struct Layer {
        RmsNorm<T> attn_norm;
        BlockLinear<T> wq, wk, wv, wo;
        RmsNorm<T> ffn_norm;
        SwigluFfn<T> ffn;
    };

    std::vector<Layer>& layers() { return layers_; }
    Tensor<T>& embedding() { return embed_; }

    static constexpr double kQkNormEps = 1e-6;

  private:
    void run_tapped(const std::vector<int32_t>& tokens, AttnTap<T>& tap) const {
        if (tap.layer >= cfg_.n_layers || tap.head >= cfg_.n_heads)
            throw std::out_of_range("attention tap: layer " + std::to_string(tap.layer) + ", head " +
                                    std::to_string(tap.head) + " outside model");
        forward(tokens, 1, tokens.size(), &tap);
    }

    void build_rotation_tables() {
        const std::size_t half = cfg_.qk_head_dim() / 2;
        auto cos_tab = std::make_shared<std::vector<T>>(cfg_.max_seq_len * half);
        auto sin_tab = std::make_shared<std::vector<T>>(cfg_.max_seq_len * half);
        for (std::size_t pos = 0; pos < cfg_.max_seq_len; ++pos) {
            for (std::size_t t = 0; t < half; ++t) {
                const double a = double(pos) * rope_.freqs[t];
                (*cos_tab)[pos * half + t] = T(std::cos(a));
                (*sin_tab)[pos * half + t] = T(std::sin(a));
            }
        }
        cos_tab_ = cos_tab;
        sin_tab_ = sin_tab;
    }

    void build_registry() {
        params_.clear();
        params_.push_back({"embed", embed_});
        for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
            const std::string p = "layers." + std::to_string(l) + ".";
            auto& lay = layers_[l];
            params_.push_back({p + "attn.norm.gain", lay.attn_norm.gain()});
            params_.push_back({p + "attn.wq.blocks", lay.wq.blocks()});
            params_.push_back({p + "attn.wk.blocks", lay.wk.blocks()});
            params_.push_back({p + "attn.wv.blocks", lay.wv.blocks()});
            params_.push_back({p + "attn.wo.blocks", lay.wo.blocks()});
            params_.push_back({p + "ffn.norm.gain", lay.ffn_norm.gain()});
            params_.push_back({p + "ffn.w_gate", lay.ffn.w_gate()});
            params_.push_back({p + "ffn.w_up", lay.ffn.w_up()});
            params_.push_back({p + "ffn.w_down", lay.ffn.w_down()});
        }
        params_.push_back({"final_norm.gain", final_norm_.gain()});

        // The registry must agree with the allocation-free enumeration, and
        // names must be unique.
        const auto expect = param_shapes(cfg_);
        if (expect.size() != params_.size())
            throw std::logic_error("model: parameter registry size mismatch vs enumeration");
        std::set<std::string> names;
        for (std::size_t i = 0; i < expect.size(); ++i) {
            if (params_[i].name != expect[i].first || params_[i].tensor.shape() != expect[i].second)
                throw std::logic_error("model: parameter '" + params_[i].name + "' disagrees with enumeration");
            if (!names.insert(params_[i].name).second)
                throw std::logic_error("model: duplicate parameter name '" + params_[i].name + "'");
        }
    }

    ModelConfig cfg_;
    RopeConfig rope_;
    Tensor<T> embed_;
    std::vector<Layer> layers_;
    RmsNorm<T> final_norm_;
    std::vector<Parameter<T>> params_;
    std::shared_ptr<const std::vector<T>> cos_tab_, sin_tab_;
};

template <class T>
Model<T> build_model(const ModelConfig& cfg) {
    return Model<T>(cfg);
}

}  // namespace crope
