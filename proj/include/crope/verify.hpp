#pragma once

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "crope/data.hpp"
#include "crope/grad_check.hpp"
#include "crope/layers.hpp"
#include "crope/model.hpp"
#include "crope/optim.hpp"
#include "crope/rope.hpp"
#include "crope/train.hpp"

namespace crope {

struct CheckResult {
    bool pass = false;
    double measured = 0.0;  // worst observed value
    double allowed = 0.0;   // bound it is compared against
    std::string note;
};

struct Check {
    std::string module;
    std::string name;
    std::function<CheckResult()> fn;
};

// Test hook: deliberately break the tying invariant so the negative-control
// path of `verify` can prove the check catches it.
inline std::atomic<bool>& tying_corruption_hook() {
    static std::atomic<bool> flag{false};
    return flag;
}

namespace checks {

inline CheckResult upper(double measured, double allowed, std::string note = "") {
    return {measured <= allowed, measured, allowed, std::move(note)};
}
inline CheckResult lower(double measured, double allowed, std::string note = "") {
    return {measured >= allowed, measured, allowed, std::move(note) + " (lower bound)"};
}

inline CheckResult softmax_row_sums() {
    Rng rng(7, 1);
    double worst = 0;
    for (int c = 0; c < 200; ++c) {
        const std::size_t m = 1 + rng.next_below(6), n = 1 + rng.next_below(12);
        auto x = Tensor<double>::zeros({m, n});
        for (auto& v : x.value()) v = rng.uniform(-30.0, 30.0);
        auto s = softmax_rows(x);
        for (std::size_t i = 0; i < m; ++i) {
            double sum = 0;
            for (std::size_t j = 0; j < n; ++j) sum += s.at(i, j);
            worst = std::max(worst, std::abs(sum - 1.0));
        }
    }
    return upper(worst, 1e-12, "200 random matrices, seed 7");
}

// A composite of every autodiff op, gradient-checked against central
// differences across seeds.
inline CheckResult composite_grad_fd(int seeds = 100) {
    double worst = 0;
    for (int seed = 0; seed < seeds; ++seed) {
        Rng rng(uint64_t(seed), 99);
        const std::size_t n = 6, d = 8, vocab = d;
        auto table = Tensor<double>::zeros({4, d}, true);
        auto w = Tensor<double>::zeros({d, d}, true);
        auto gain = Tensor<double>::zeros({d}, true);
        for (auto& v : table.value()) v = rng.normal() * 0.5;
        for (auto& v : w.value()) v = rng.normal() * 0.4;
        for (auto& v : gain.value()) v = 1.0 + 0.1 * rng.normal();
        std::vector<int32_t> ids(n), targets(n);
        for (auto& i : ids) i = int32_t(rng.next_below(4));
        for (auto& t : targets) t = int32_t(rng.next_below(vocab));
        targets[1] = -1;  // one ignored row

        RopeConfig rc(d, 100.0);
        auto cos_mut = std::make_shared<std::vector<double>>(n * d / 2);
        auto sin_mut = std::make_shared<std::vector<double>>(n * d / 2);
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t t = 0; t < d / 2; ++t) {
                (*cos_mut)[p * d / 2 + t] = std::cos(double(p) * rc.freqs[t]);
                (*sin_mut)[p * d / 2 + t] = std::sin(double(p) * rc.freqs[t]);
            }
        std::shared_ptr<const std::vector<double>> cos_tab = cos_mut, sin_tab = sin_mut;

        auto f = [&]() {
            auto x = embedding_lookup(table, ids);
            auto a = matmul(x, w);
            auto b = rope_rotate(a, cos_tab, sin_tab);
            auto c = rms_norm_rows(b, gain, 1e-6);
            auto s = scale(matmul(c, c, false, true), 0.5);
            auto att = causal_softmax(s);
            auto e = matmul(att, c);
            auto g = mul(silu(e), c);
            auto h = concat_cols<double>({slice_block(g, 0, n, 0, d / 2), slice_block(g, 0, n, d / 2, d)});
            h = concat_rows<double>({slice_block(h, 0, n / 2, 0, d), slice_block(h, n / 2, n, 0, d)});
            auto q = softmax_rows(slice_block(h, 0, n, 0, n));
            auto loss = add(cross_entropy(h, targets), scale(sum(mul(q, q)), 0.1));
            return add(loss, scale(sum(h), 0.01));
        };
        std::vector<Parameter<double>> params = {{"table", table}, {"w", w}, {"gain", gain}};
        worst = std::max(worst, grad_check(f, params, 1e-5).max_rel_err);
    }
    return upper(worst, 1e-4, std::to_string(seeds) + " random composite graphs, seeds 0.." + std::to_string(seeds - 1));
}

inline CheckResult grad_accumulation_doubles() {
    Rng rng(3, 5);
    auto x = Tensor<double>::zeros({4, 4}, true);
    for (auto& v : x.value()) v = rng.normal();
    auto loss1 = sum(mul(x, x));
    loss1.backward();
    const auto once = x.grad();
    auto x2 = Tensor<double>::from({4, 4}, x.value(), true);
    auto loss2 = sum(mul(x2, x2));
    loss2.backward();
    loss2.backward();
    double worst = 0;
    for (std::size_t i = 0; i < once.size(); ++i) worst = std::max(worst, std::abs(x2.grad()[i] - 2.0 * once[i]));
    return upper(worst, 0.0, "two backward passes vs doubled single pass, exact");
}

template <class T>
double tying_relation_violation(const Tensor<T>& w) {
    double worst = 0;
    for (std::size_t i = 0; i + 1 < w.rows(); i += 2) {
        for (std::size_t j = 0; j + 1 < w.cols(); j += 2) {
            worst = std::max(worst, double(std::abs(w.at(i, j) - w.at(i + 1, j + 1))));
            worst = std::max(worst, double(std::abs(w.at(i + 1, j) + w.at(i, j + 1))));
        }
    }
    return worst;
}

inline CheckResult tied_structure_after_updates() {
    BlockLinear<double> layer(8, 8, true, Rng(11, 0));
    std::vector<Parameter<double>> params = {{"blocks", layer.blocks()}};
    AdamW<double> opt(params, {});
    Rng rng(12, 0);
    for (int s = 0; s < 25; ++s) {
        auto& g = layer.blocks().grad();
        for (auto& v : g) v = rng.normal();
        opt.step(1e-2);
        layer.blocks().zero_grad();
    }
    auto w = layer.materialize();
    // Negative control: poke one dense entry behind the free parameters' back.
    if (tying_corruption_hook()) w.value()[1] += 0.5;
    return upper(tying_relation_violation(w), 0.0,
                 "W[i][j]=W[i+1][j+1], W[i+1][j]=-W[i][j+1] after 25 optimizer steps");
}

inline CheckResult complex_oracle_equivalence(int cases = 1000) {
    Rng rng(21, 0);
    double worst = 0;
    const std::size_t dims[] = {2, 4, 8, 16, 32};
    for (int c = 0; c < cases; ++c) {
        const std::size_t in = dims[rng.next_below(5)], out = dims[rng.next_below(5)];
        BlockLinear<double> layer(in, out, true, rng.split(uint64_t(c)));
        std::vector<double> x(in);
        for (auto& v : x) v = rng.normal();
        auto real_path = layer.forward(Tensor<double>::from({1, in}, x));
        auto oracle = complex_oracle_forward(layer, x);
        for (std::size_t i = 0; i < out; ++i)
            worst = std::max(worst, std::abs(real_path.value()[i] - oracle[i]));
    }
    return upper(worst, 1e-12, std::to_string(cases) + " random (shape, input) cases, seed 21");
}

inline CheckResult dense_equivalence() {
    Rng rng(22, 0);
    const std::size_t in = 10, out = 6;
    std::vector<double> w(in * out);
    for (auto& v : w) v = rng.normal();
    BlockLinear<double> layer(in, out, false, rng);
    layer.set_from_dense(w);
    auto x = Tensor<double>::zeros({3, in});
    for (auto& v : x.value()) v = rng.normal();
    auto yw = matmul(x, Tensor<double>::from({out, in}, w), false, true);
    auto yl = layer.forward(x);
    double worst = 0;
    for (std::size_t i = 0; i < yw.numel(); ++i)
        worst = std::max(worst, std::abs(yw.value()[i] - yl.value()[i]));
    return upper(worst, 0.0, "untied layer from dense matrix vs plain matmul, exact");
}

inline CheckResult pauli_subspace() {
    Rng rng(23, 0);
    double worst = 0;
    for (int c = 0; c < 200; ++c) {
        const double a = rng.normal(), b = rng.normal();
        auto coef = pauli_decompose({a, b, -b, a});
        worst = std::max({worst, std::abs(coef[1]), std::abs(coef[3])});
        worst = std::max(worst, std::abs(coef[0] - a));
        worst = std::max(worst, std::abs(coef[2] + b));
    }
    // Nearest tied block to the sigma_3 reflection is the zero block at
    // Frobenius distance sqrt(2).
    const double dist = std::sqrt(2.0);
    auto c3 = pauli_decompose({1, 0, 0, -1});
    const double proj = std::hypot(c3[0], c3[2]);  // component inside span{s0, s2}
    worst = std::max(worst, proj);
    worst = std::max(worst, std::abs(std::sqrt(2.0 * (c3[1] * c3[1] + c3[3] * c3[3])) - dist));
    return upper(worst, 0.0, "tied blocks have c1=c3=0; sigma_3 sits sqrt(2) from the tied span");
}

inline CheckResult param_ratio_half() {
    Rng rng(24, 0);
    double worst = 0;
    for (std::size_t in : {2, 8, 64}) {
        for (std::size_t out : {4, 16, 128}) {
            BlockLinear<double> tied(in, out, true, rng);
            BlockLinear<double> untied(in, out, false, rng);
            worst = std::max(worst,
                             std::abs(double(count_params(tied)) / double(count_params(untied)) - 0.5));
        }
    }
    return upper(worst, 0.0, "tied / untied = 1/2 for all even shapes");
}

inline CheckResult rope_shift_invariance(int cases = 1000) {
    Rng rng(31, 0);
    RopeConfig cfg(32, 5000.0);
    double worst = 0;
    for (int c = 0; c < cases; ++c) {
        std::vector<double> q(cfg.head_dim), k(cfg.head_dim);
        for (auto& v : q) v = rng.normal();
        for (auto& v : k) v = rng.normal();
        const long long m = 1 + (long long)rng.next_below(200), n = 1 + (long long)rng.next_below(200);
        const long long s = (long long)rng.next_below(100);
        worst = std::max(worst, std::abs(score_rope(q, k, m, n, cfg) - score_rope(q, k, m + s, n + s, cfg)));
    }
    return upper(worst, 1e-10, "score(m, n) == score(m+s, n+s), seed 31");
}

inline CheckResult real_complex_identity(int cases = 1000) {
    Rng rng(32, 0);
    RopeConfig cfg(32, 5000.0);
    double worst = 0;
    for (int c = 0; c < cases; ++c) {
        std::vector<double> q(cfg.head_dim), k(cfg.head_dim);
        for (auto& v : q) v = rng.normal();
        for (auto& v : k) v = rng.normal();
        const long long m = 1 + (long long)rng.next_below(300), n = 1 + (long long)rng.next_below(300);
        worst = std::max(worst, std::abs(score_complex(to_complex(q), to_complex(k), m, n, cfg) -
                                         score_rope(q, k, m, n, cfg)));
    }
    return upper(worst, 1e-10, std::to_string(cases) + " random q, k, m, n, seed 32");
}

inline CheckResult rotation_composition() {
    Rng rng(33, 0);
    RopeConfig cfg(16, 5000.0);
    double worst = 0;
    for (int c = 0; c < 200; ++c) {
        std::vector<double> v(cfg.head_dim);
        for (auto& x : v) x = rng.normal();
        const long long m = (long long)rng.next_below(100), n = (long long)rng.next_below(100);
        auto lhs = apply_rotation_real(apply_rotation_real(v, n, cfg), -m, cfg);  // R_m^T R_n v
        auto rhs = apply_rotation_real(v, n - m, cfg);
        for (std::size_t i = 0; i < v.size(); ++i) worst = std::max(worst, std::abs(lhs[i] - rhs[i]));
    }
    return upper(worst, 1e-12, "R_m^T R_n == R_{n-m} elementwise, seed 33");
}

inline CheckResult delta_kernel_normalized() {
    double worst = 0;
    for (std::size_t d : {16, 64, 256}) {
        RopeConfig cfg(d, 5000.0);
        worst = std::max(worst, std::abs(delta_kernel(cfg, 0) - 1.0));
        for (long long delta : {1, 2, 7, 19, 32})
            worst = std::max(worst, std::abs(delta_kernel(cfg, delta) - delta_kernel(cfg, -delta)));
    }
    return upper(worst, 0.0, "kernel(0) == 1 exactly and kernel is even");
}

inline CheckResult shift_construction_argmax() {
    RopeConfig cfg(64, 5000.0);
    const std::size_t window = 32;
    std::vector<double> a(cfg.head_dim / 4, 1.0 / double(cfg.head_dim / 4));
    double bad = 0;
    for (int s : {1, 2}) {
        auto sc = build_shift_construction(cfg, s, a);
        auto profile = shift_attention_profile(cfg, sc, window);
        for (std::size_t m = 8; m <= 24; ++m) {
            std::size_t am = 0;
            for (std::size_t n2 = 1; n2 < window; ++n2)
                if (profile(m, n2) > profile(m, am)) am = n2;
            if (am != m + std::size_t(s)) bad += 1;
        }
    }
    return upper(bad, 0.0, "argmax_n score(m, n) == m+s for s in {1,2}, m in [8,24], window 32");
}

inline CheckResult membership_shift_construction() {
    RopeConfig cfg(64, 5000.0);
    std::vector<double> a(cfg.head_dim / 4);
    Rng rng(34, 0);
    for (auto& v : a) v = 0.2 + rng.next_double();
    auto sc = build_shift_construction(cfg, 1, a);
    Eigen::MatrixXcd inputs(2, cfg.head_dim / 2), targets(2, cfg.head_dim / 2);
    inputs.row(0) = sc.x_next.transpose();
    inputs.row(1) = sc.x_nextnext.transpose();
    targets.row(0) = (sc.wq * sc.x_next).transpose();
    targets.row(1) = (sc.wq * sc.x_nextnext).transpose();
    return upper(crope_membership_check(targets, inputs).residual, 1e-10,
                 "shift construction lies inside the tied function space");
}

inline CheckResult membership_reflection() {
    auto [inputs, targets] = reflection_membership_case(8);
    return lower(crope_membership_check(targets, inputs).residual, 0.1,
                 "conjugation target is unreachable for any complex-linear map");
}

inline CheckResult savings_fractions() {
    const std::vector<std::pair<std::size_t, std::size_t>> dims = {{8, 2}, {64, 4}, {1024, 8}};
    const std::vector<std::pair<Mode, double>> want = {
        {Mode::none, 0.0},          {Mode::crope_qk, 0.25},     {Mode::crope_qkv, 0.375},
        {Mode::crope_all, 0.5},     {Mode::half_rope_qk, 0.25}, {Mode::half_rope_all, 0.5}};
    double worst = 0;
    for (auto [d, h] : dims) {
        for (auto [mode, frac] : want) {
            ModelConfig cfg;
            cfg.d_model = d;
            cfg.n_heads = h;
            cfg.d_ff = d;
            cfg.vocab_size = 32;
            cfg.max_seq_len = 8;
            cfg.mode = mode;
            worst = std::max(worst, std::abs(param_audit(cfg).attention_savings - frac));
        }
    }
    return upper(worst, 0.0, "savings exactly {0, 25, 37.5, 50, 25, 50}% at d_model in {8, 64, 1024}");
}

inline CheckResult component_counts_equal() {
    double worst = 0;
    ModelConfig base;
    base.d_model = 64;
    base.n_heads = 4;
    base.d_ff = 96;
    base.vocab_size = 50;
    base.max_seq_len = 16;
    ParamAudit ref;
    bool first = true;
    for (const auto& [mode, name] : mode_table()) {
        ModelConfig cfg = base;
        cfg.mode = mode;
        auto a = param_audit(cfg);
        if (first) {
            ref = a;
            first = false;
        }
        worst = std::max(worst, double(a.embedding != ref.embedding));
        worst = std::max(worst, double(a.ffn != ref.ffn));
        worst = std::max(worst, double(a.norms != ref.norms));
    }
    return upper(worst, 0.0, "embedding, ffn and norm counts identical across all six modes");
}

inline CheckResult crope_half_totals_equal() {
    ModelConfig base;
    base.d_model = 64;
    base.n_heads = 4;
    base.d_ff = 96;
    base.vocab_size = 50;
    base.max_seq_len = 16;
    auto total = [&](Mode m) {
        ModelConfig cfg = base;
        cfg.mode = m;
        return param_audit(cfg).total;
    };
    double bad = 0;
    bad += double(total(Mode::crope_qk) != total(Mode::half_rope_qk));
    bad += double(total(Mode::crope_all) != total(Mode::half_rope_all));
    return upper(bad, 0.0, "crope_qk == half_rope_qk and crope_all == half_rope_all totals");
}

inline CheckResult mode_equivalence_at_init() {
    ModelConfig tied_cfg;
    tied_cfg.n_layers = 1;
    tied_cfg.n_heads = 2;
    tied_cfg.d_model = 8;
    tied_cfg.d_ff = 12;
    tied_cfg.vocab_size = 11;
    tied_cfg.max_seq_len = 6;
    tied_cfg.mode = Mode::crope_all;
    tied_cfg.seed = 5;
    ModelConfig untied_cfg = tied_cfg;
    untied_cfg.mode = Mode::none;

    Model<double> tied(tied_cfg), untied(untied_cfg);
    // Overwrite every untied parameter with the tied model's values; block
    // grids expand (a, b) -> (a, b, -b, a).
    for (std::size_t pi = 0; pi < tied.params().size(); ++pi) {
        auto& src = tied.params()[pi];
        auto& dst = untied.params()[pi];
        if (src.tensor.shape() == dst.tensor.shape()) {
            dst.tensor.value() = src.tensor.value();
        } else {
            const auto& s = src.tensor.value();
            auto& d = dst.tensor.value();
            for (std::size_t blk = 0; blk < s.size() / 2; ++blk) {
                d[blk * 4 + 0] = s[blk * 2 + 0];
                d[blk * 4 + 1] = s[blk * 2 + 1];
                d[blk * 4 + 2] = -s[blk * 2 + 1];
                d[blk * 4 + 3] = s[blk * 2 + 0];
            }
        }
    }
    std::vector<int32_t> toks = {1, 4, 7, 0, 10, 3};
    auto la = tied.forward(toks, 1, toks.size());
    auto lb = untied.forward(toks, 1, toks.size());
    double worst = 0;
    for (std::size_t i = 0; i < la.numel(); ++i)
        worst = std::max(worst, std::abs(la.value()[i] - lb.value()[i]));
    return upper(worst, 0.0, "tied model vs untied model carrying tied-structure weights, bitwise");
}

inline CheckResult causality() {
    ModelConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.d_ff = 24;
    cfg.vocab_size = 29;
    cfg.max_seq_len = 10;
    cfg.seed = 9;
    Model<double> model(cfg);
    std::vector<int32_t> toks = {3, 1, 4, 1, 5, 9, 2, 6};
    auto base = model.forward(toks, 1, toks.size());
    Rng rng(41, 0);
    double worst = 0;
    for (int c = 0; c < 10; ++c) {
        const std::size_t t = 2 + rng.next_below(toks.size() - 2);
        auto mod = toks;
        for (std::size_t i = t; i < toks.size(); ++i) mod[i] = int32_t(rng.next_below(cfg.vocab_size));
        auto out = model.forward(mod, 1, toks.size());
        for (std::size_t pos = 0; pos < t; ++pos)
            for (std::size_t vtok = 0; vtok < cfg.vocab_size; ++vtok)
                worst = std::max(worst, std::abs(out.at(pos, vtok) - base.at(pos, vtok)));
    }
    return upper(worst, 0.0, "perturbing tokens after t never changes logits at or before t");
}

inline CheckResult position_relativity() {
    // One attention layer: pre-mask scores of a subsequence must not move when
    // the subsequence is shifted inside a longer padded context.
    ModelConfig cfg;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_model = 16;
    cfg.d_ff = 24;
    cfg.vocab_size = 37;
    cfg.max_seq_len = 24;
    cfg.seed = 13;
    Model<double> model(cfg);
    Rng rng(42, 0);
    const std::size_t t0 = 10, shift = 6, total = 20;
    std::vector<int32_t> core_tokens(t0);
    for (auto& t : core_tokens) t = int32_t(rng.next_below(cfg.vocab_size));
    std::vector<int32_t> a(total), b(total);
    for (auto& t : a) t = int32_t(rng.next_below(cfg.vocab_size));
    for (auto& t : b) t = int32_t(rng.next_below(cfg.vocab_size));
    std::copy(core_tokens.begin(), core_tokens.end(), a.begin());
    std::copy(core_tokens.begin(), core_tokens.end(), b.begin() + shift);
    double worst = 0;
    for (std::size_t head = 0; head < cfg.n_heads; ++head) {
        auto sa = model.attention_scores(a, 0, head);
        auto sb = model.attention_scores(b, 0, head);
        for (std::size_t i = 0; i < t0; ++i)
            for (std::size_t j = 0; j < t0; ++j)
                worst = std::max(worst, std::abs(sa.at(i, j) - sb.at(i + shift, j + shift)));
    }
    return upper(worst, 1e-6, "pre-mask scores are invariant to shifting the sequence in context");
}

inline CheckResult audit_matches_built_model() {
    double bad = 0;
    for (const auto& [mode, name] : mode_table()) {
        ModelConfig cfg;
        cfg.n_layers = 2;
        cfg.n_heads = 2;
        cfg.d_model = 8;
        cfg.d_ff = 12;
        cfg.vocab_size = 11;
        cfg.max_seq_len = 6;
        cfg.mode = mode;
        Model<float> model(cfg);
        bad += double(param_audit(cfg).total != model.param_total());
    }
    return upper(bad, 0.0, "closed-form audit equals enumeration of built parameters, all modes");
}

inline CheckResult lr_endpoints() {
    TrainConfig cfg;
    double bad = 0;
    bad += double(lr_at(cfg.warmup_steps, cfg.steps, cfg.warmup_steps, cfg.lr_max, cfg.lr_min) != cfg.lr_max);
    bad += double(lr_at(cfg.steps, cfg.steps, cfg.warmup_steps, cfg.lr_max, cfg.lr_min) != cfg.lr_min);
    bad += double(lr_at(0, cfg.steps, cfg.warmup_steps, cfg.lr_max, cfg.lr_min) != 0.0);
    return upper(bad, 0.0, "lr(0) = 0, lr(warmup) = lr_max, lr(steps) = lr_min, exact");
}

inline CheckResult decoupled_decay_exact() {
    Rng rng(51, 0);
    auto t = Tensor<double>::zeros({8}, true);
    for (auto& v : t.value()) v = rng.normal();
    auto before = t.value();
    std::vector<Parameter<double>> params = {{"p", t}};
    AdamWConfig c;
    AdamW<double> opt(params, c);
    const double lr = 3e-3;
    t.grad();  // allocate zero grads
    std::vector<double> expected = before;
    double worst = 0;
    for (int s = 0; s < 5; ++s) {
        opt.step(lr);
        for (auto& e : expected) e -= lr * c.weight_decay * e;
        for (std::size_t i = 0; i < expected.size(); ++i)
            worst = std::max(worst, std::abs(t.value()[i] - expected[i]));
    }
    return upper(worst, 0.0, "zero gradient still shrinks weights by exactly lr*wd per step");
}

inline CheckResult optimizer_preserves_structure() {
    ToyTaskSpec spec;
    spec.seq_len = 8;
    auto res = toy_task_train(Mode::crope_all, spec, 30, 3, 16);
    double worst = 0;
    for (auto& lay : res.model.layers()) {
        for (BlockLinear<float>* bl : {&lay.wq, &lay.wk, &lay.wv, &lay.wo})
            worst = std::max(worst, tying_relation_violation(bl->materialize()));
    }
    return upper(worst, 0.0, "materialized ties hold exactly after real training steps");
}

inline std::vector<int32_t> synthetic_ids(std::size_t n, uint64_t seed) {
    Rng rng(seed, Rng::stream_of("synthetic-corpus"));
    std::vector<int32_t> ids(n);
    for (auto& i : ids) i = int32_t(rng.next_below(96) + 32);
    return ids;
}

inline TrainConfig tiny_train_config() {
    TrainConfig cfg;
    cfg.model.n_layers = 1;
    cfg.model.n_heads = 2;
    cfg.model.d_model = 16;
    cfg.model.d_ff = 24;
    cfg.model.vocab_size = 256;
    cfg.model.max_seq_len = 16;
    cfg.model.seed = 1;
    cfg.batch_size = 4;
    cfg.seq_len = 16;
    cfg.steps = 30;
    cfg.warmup_steps = 5;
    cfg.log_every = 5;
    cfg.eval_every = 15;
    cfg.seed = 1;
    return cfg;
}

inline CheckResult train_determinism() {
    const auto ids = synthetic_ids(3000, 77);
    TrainConfig cfg = tiny_train_config();
    auto r1 = train(cfg, ids, "/tmp/crope-verify-det-a");
    auto r2 = train(cfg, ids, "/tmp/crope-verify-det-b");
    double bad = 0;
    bad += double(r1.metrics.size() != r2.metrics.size());
    for (std::size_t i = 0; i < std::min(r1.metrics.size(), r2.metrics.size()); ++i) {
        const auto &a = r1.metrics[i], &b = r2.metrics[i];
        // wall_ms is the one measured (non-deterministic) column.
        bad += double(a.step != b.step || a.lr != b.lr || a.train_loss != b.train_loss ||
                      a.val_loss.has_value() != b.val_loss.has_value() ||
                      (a.val_loss && *a.val_loss != *b.val_loss) || a.tokens_seen != b.tokens_seen);
    }
    auto pa = r1.model.params();
    auto pb = r2.model.params();
    for (std::size_t i = 0; i < pa.size(); ++i)
        for (std::size_t j = 0; j < pa[i].tensor.numel(); ++j)
            bad += double(pa[i].tensor.value()[j] != pb[i].tensor.value()[j]);
    return upper(bad, 0.0, "same (config, seed) twice: identical metrics (less wall_ms) and weights");
}

inline CheckResult eval_purity() {
    const auto ids = synthetic_ids(3000, 78);
    TrainConfig cfg = tiny_train_config();
    BatchPlan plan = make_batches(ids, cfg.seq_len, cfg.batch_size, kValSplitFraction, cfg.seed);
    Model<float> model(cfg.model);
    auto snapshot = [&] {
        std::vector<float> all;
        for (auto& p : model.params()) {
            all.insert(all.end(), p.tensor.value().begin(), p.tensor.value().end());
            if (p.tensor.has_grad()) all.insert(all.end(), p.tensor.grad().begin(), p.tensor.grad().end());
        }
        return all;
    };
    const auto before = snapshot();
    const double v1 = evaluate(model, plan.val_batches());
    const double v2 = evaluate(model, plan.val_batches());
    const auto after = snapshot();
    double bad = double(before != after) + double(v1 != v2);
    return upper(bad, 0.0, "evaluate changes no parameter or gradient state and repeats exactly");
}

inline CheckResult batch_partition() {
    const auto ids = synthetic_ids(2 * 17, 79);
    BatchPlan plan = make_batches(ids, 16, 1, 0.5, 4);
    double bad = 0;
    bad += double(plan.n_train_windows() != 1 || plan.n_val_windows() != 1);

    const auto big = synthetic_ids(4000, 80);
    BatchPlan p1 = make_batches(big, 16, 4, 0.25, 9);
    BatchPlan p2 = make_batches(big, 16, 4, 0.25, 9);
    for (int i = 0; i < 5; ++i) {
        auto a = p1.next_train(), b = p2.next_train();
        bad += double(a.inputs != b.inputs || a.targets != b.targets);
    }
    // Train windows and val windows tile disjoint id ranges.
    std::size_t max_train_end = 0, min_val_start = big.size();
    for (auto s : p1.train_starts()) max_train_end = std::max(max_train_end, s + 17);
    for (auto s : p1.val_starts()) min_val_start = std::min(min_val_start, s);
    bad += double(max_train_end > min_val_start);
    return upper(bad, 0.0, "val never overlaps train; same seed gives the same batch sequence");
}

inline CheckResult toy_histogram() {
    ToyTaskSpec spec;
    spec.seed = 100;
    Rng rng(spec.seed, 5);
    const std::size_t n = 10000;
    auto batch = toy_task_generate(spec, n, rng);
    std::map<int, std::vector<std::size_t>> hist;
    hist[1].assign(spec.seq_len, 0);
    hist[2].assign(spec.seq_len, 0);
    double bad = 0;
    for (const auto& s : batch.samples) {
        hist[s.shift][s.marker_pos]++;
        std::size_t markers = 0;
        for (auto t : s.tokens)
            if (t == ToyTaskSpec::kNext || t == ToyTaskSpec::kNextNext) ++markers;
        bad += double(markers != 1);
        bad += double(s.label != s.tokens[s.marker_pos + std::size_t(s.shift)]);
    }
    double worst_sigmas = 0;
    for (int shift : {1, 2}) {
        const std::size_t bins = spec.seq_len - std::size_t(shift);
        const double n_class = double(n) / 2.0, p = 1.0 / double(bins);
        const double mean = n_class * p, sigma = std::sqrt(n_class * p * (1.0 - p));
        for (std::size_t pos = 0; pos < bins; ++pos)
            worst_sigmas = std::max(worst_sigmas, std::abs(double(hist[shift][pos]) - mean) / sigma);
        for (std::size_t pos = bins; pos < spec.seq_len; ++pos) bad += double(hist[shift][pos] != 0);
    }
    if (bad > 0) return {false, bad, 0.0, "malformed toy sample"};
    return upper(worst_sigmas, 3.0, "marker positions uniform within 3 sigma over 10k samples, seed 100");
}

}  // namespace checks

inline const std::vector<Check>& all_checks() {
    static const std::vector<Check> cs = {
        {"autodiff-core", "softmax-row-sums", checks::softmax_row_sums},
        {"autodiff-core", "composite-grad-vs-finite-difference", [] { return checks::composite_grad_fd(100); }},
        {"autodiff-core", "grad-accumulation-doubles", checks::grad_accumulation_doubles},
        {"structured-layers", "tied-structure-after-updates", checks::tied_structure_after_updates},
        {"structured-layers", "complex-oracle-equivalence", [] { return checks::complex_oracle_equivalence(1000); }},
        {"structured-layers", "dense-equivalence", checks::dense_equivalence},
        {"structured-layers", "pauli-subspace", checks::pauli_subspace},
        {"structured-layers", "param-ratio-half", checks::param_ratio_half},
        {"rope-math", "shift-invariance", [] { return checks::rope_shift_invariance(1000); }},
        {"rope-math", "real-complex-score-identity", [] { return checks::real_complex_identity(1000); }},
        {"rope-math", "rotation-composition", checks::rotation_composition},
        {"rope-math", "delta-kernel-normalized", checks::delta_kernel_normalized},
        {"rope-math", "shift-construction-argmax", checks::shift_construction_argmax},
        {"rope-math", "membership-shift-construction", checks::membership_shift_construction},
        {"rope-math", "membership-reflection-residual", checks::membership_reflection},
        {"model", "attention-savings-fractions", checks::savings_fractions},
        {"model", "component-counts-equal-across-modes", checks::component_counts_equal},
        {"model", "crope-half-total-equality", checks::crope_half_totals_equal},
        {"model", "mode-equivalence-at-init", checks::mode_equivalence_at_init},
        {"model", "causality", checks::causality},
        {"model", "position-relativity-in-context", checks::position_relativity},
        {"model", "audit-matches-built-model", checks::audit_matches_built_model},
        {"training", "lr-schedule-endpoints", checks::lr_endpoints},
        {"training", "decoupled-weight-decay-exact", checks::decoupled_decay_exact},
        {"training", "optimizer-preserves-structure", checks::optimizer_preserves_structure},
        {"training", "train-determinism", checks::train_determinism},
        {"training", "eval-purity", checks::eval_purity},
        {"training", "batch-partition", checks::batch_partition},
        {"training", "toy-marker-histogram", checks::toy_histogram},
    };
    return cs;
}

}  // namespace crope
