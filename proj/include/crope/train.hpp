#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "crope/checkpoint.hpp"
#include "crope/config.hpp"
#include "crope/data.hpp"
#include "crope/model.hpp"
#include "crope/optim.hpp"

namespace crope {

struct MetricsRow {
    std::size_t step = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    std::optional<double> val_loss;
    std::size_t tokens_seen = 0;
    long long wall_ms = 0;
};

inline std::string metrics_csv_header() { return "step,lr,train_loss,val_loss,tokens_seen,wall_ms"; }

inline std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream os;
    os.precision(17);
    os << metrics_csv_header() << "\n";
    for (const auto& r : rows) {
        os << r.step << "," << r.lr << "," << r.train_loss << ",";
        if (r.val_loss) os << *r.val_loss;
        os << "," << r.tokens_seen << "," << r.wall_ms << "\n";
    }
    return os.str();
}

inline std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != metrics_csv_header())
        throw std::runtime_error("metrics: bad header '" + line + "'");
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        MetricsRow r;
        std::getline(ls, field, ',');
        r.step = std::stoull(field);
        std::getline(ls, field, ',');
        r.lr = std::stod(field);
        std::getline(ls, field, ',');
        r.train_loss = std::stod(field);
        std::getline(ls, field, ',');
        if (!field.empty()) r.val_loss = std::stod(field);
        std::getline(ls, field, ',');
        r.tokens_seen = std::stoull(field);
        std::getline(ls, field, ',');
        r.wall_ms = std::stoll(field);
        rows.push_back(r);
    }
    return rows;
}

// Reporting-only smoothing; raw values stay the source of truth.
inline std::vector<double> ema_series(const std::vector<double>& xs, double alpha = 0.05) {
    std::vector<double> out;
    out.reserve(xs.size());
    double y = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        y = i == 0 ? xs[i] : (1.0 - alpha) * y + alpha * xs[i];
        out.push_back(y);
    }
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << content;
}

// Mean token-level cross entropy over the given batches; touches no gradient
// or optimizer state. Invariant to how windows are grouped into batches (up
// to float summation order).
template <class T>
double evaluate(const Model<T>& model, const std::vector<Batch>& batches) {
    if (batches.empty()) throw std::invalid_argument("evaluate: empty validation split");
    double total = 0;
    std::size_t tokens = 0;
    for (const auto& b : batches) {
        Tensor<T> logits = model.forward(b.inputs, b.batch, b.seq);
        Tensor<T> loss = cross_entropy(logits, b.targets);
        total += double(loss.item()) * double(b.batch * b.seq);
        tokens += b.batch * b.seq;
    }
    return total / double(tokens);
}

struct TrainResult {
    std::vector<MetricsRow> metrics;
    double final_val_loss = 0.0;
    std::string checkpoint_path;
    std::string metrics_path;
    Model<float> model;
};

inline constexpr double kValSplitFraction = 0.10;

// One full training run: forward / cross-entropy / backward / AdamW with the
// warmup+cosine schedule, periodic logging and validation, final checkpoint.
// Deterministic for a fixed (config, corpus): batch order, init and update
// math all derive from the seeds.
inline TrainResult train(const TrainConfig& cfg, const std::vector<int32_t>& ids, const std::string& out_dir) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    BatchPlan plan = make_batches(ids, cfg.seq_len, cfg.batch_size, kValSplitFraction, cfg.seed);
    Model<float> model(cfg.model);
    AdamW<float> opt(model.params(), {cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay});
    const auto val = plan.val_batches();

    std::vector<MetricsRow> rows;
    const auto t0 = std::chrono::steady_clock::now();
    auto wall_ms = [&] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    };

    double last_val = std::nan("");
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        Batch b = plan.next_train();
        Tensor<float> logits = model.forward(b.inputs, b.batch, b.seq);
        Tensor<float> loss = cross_entropy(logits, b.targets);
        const double train_loss = double(loss.item());
        if (!std::isfinite(train_loss)) {
            const std::string abort_path = out_dir + "/abort.ckpt";
            RngState rs{cfg.seed, plan.epoch(), 0};
            save_checkpoint(model, abort_path, rs, cfg);
            throw std::runtime_error("training: non-finite loss at step " + std::to_string(step) +
                                     "; last checkpoint written to " + abort_path);
        }
        model.zero_grad();
        loss.backward();
        opt.step(lr_at(step, cfg.steps, cfg.warmup_steps, cfg.lr_max, cfg.lr_min));

        const bool want_eval = (step % cfg.eval_every == 0) || step == cfg.steps;
        if (want_eval) last_val = evaluate(model, val);
        if (step % cfg.log_every == 0 || step == cfg.steps) {
            MetricsRow r;
            r.step = step;
            r.lr = lr_at(step, cfg.steps, cfg.warmup_steps, cfg.lr_max, cfg.lr_min);
            r.train_loss = train_loss;
            if (want_eval) r.val_loss = last_val;
            r.tokens_seen = step * b.batch * b.seq;
            r.wall_ms = wall_ms();
            rows.push_back(r);
        }
    }

    TrainResult res{std::move(rows), last_val, out_dir + "/checkpoint.ckpt", out_dir + "/metrics.csv",
                    std::move(model)};
    RngState rs{cfg.seed, plan.epoch(), 0};
    save_checkpoint(res.model, res.checkpoint_path, rs, cfg);
    write_text_file(res.metrics_path, metrics_to_csv(res.metrics));
    return res;
}

inline TrainResult train(const TrainConfig& cfg, const std::string& out_dir) {
    return train(cfg, tokenize_bytes(read_text_file(cfg.data_path)), out_dir);
}

struct ToyTrainResult {
    double accuracy = 0.0;        // argmax at the marker position
    double attention_rate = 0.0;  // marker-row attention argmax at marker+shift
    double final_loss = 0.0;
    ModelConfig model_config;
    Model<float> model;
};

// Trains the 1-layer, 1-head model on the token-dependent position task and
// scores it on a held-out set. The task reads the prediction at the marker
// position, which must attend forward, so the model runs without the causal
// mask.
inline ToyTrainResult toy_task_train(Mode mode, const ToyTaskSpec& spec, std::size_t steps, uint64_t seed,
                                     std::size_t d_model = 32) {
    spec.validate();
    ModelConfig mc;
    mc.n_layers = 1;
    mc.n_heads = 1;
    mc.d_model = d_model;
    mc.d_ff = 2 * d_model;
    mc.vocab_size = spec.vocab_size();
    mc.max_seq_len = spec.seq_len;
    mc.mode = mode;
    mc.seed = seed;
    mc.causal = false;
    mc.validate();

    Model<float> model(mc);
    AdamW<float> opt(model.params(), {});
    Rng train_rng(seed, Rng::stream_of("toy-train"));
    const std::size_t batch = 32;
    const std::size_t warmup = std::min<std::size_t>(50, steps / 4);

    double last_loss = 0;
    for (std::size_t step = 1; step <= steps; ++step) {
        ToyBatch tb = toy_task_generate(spec, batch, train_rng);
        Tensor<float> logits = model.forward(tb.inputs, batch, spec.seq_len);
        Tensor<float> loss = cross_entropy(logits, tb.ce_targets);
        last_loss = double(loss.item());
        model.zero_grad();
        loss.backward();
        opt.step(lr_at(step, steps, warmup, 2e-3, 4e-4));
    }

    Rng held_rng(seed, Rng::stream_of("toy-heldout"));
    const std::size_t n_eval = 512;
    ToyBatch hb = toy_task_generate(spec, n_eval, held_rng);

    Tensor<float> logits = model.forward(hb.inputs, n_eval, spec.seq_len);
    std::size_t correct = 0;
    const std::size_t v = mc.vocab_size;
    for (std::size_t i = 0; i < n_eval; ++i) {
        const auto& s = hb.samples[i];
        const float* row = logits.value().data() + (i * spec.seq_len + s.marker_pos) * v;
        std::size_t am = 0;
        for (std::size_t j = 1; j < v; ++j)
            if (row[j] > row[am]) am = j;
        if (int32_t(am) == s.label) ++correct;
    }

    std::size_t attend_ok = 0;
    for (std::size_t i = 0; i < n_eval; ++i) {
        const auto& s = hb.samples[i];
        Tensor<float> att = model.attention_map(s.tokens, 0, 0);
        const float* row = att.value().data() + s.marker_pos * spec.seq_len;
        std::size_t am = 0;
        for (std::size_t j = 1; j < spec.seq_len; ++j)
            if (row[j] > row[am]) am = j;
        if (am == s.marker_pos + std::size_t(s.shift)) ++attend_ok;
    }

    ToyTrainResult res{double(correct) / double(n_eval), double(attend_ok) / double(n_eval), last_loss, mc,
                       std::move(model)};
    return res;
}

}  // namespace crope
