#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "crope/rng.hpp"

namespace crope {

// Byte-level tokenization: the identity map onto ids 0..255.
inline std::vector<int32_t> tokenize_bytes(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("tokenize_bytes: empty input");
    std::vector<int32_t> ids(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) ids[i] = int32_t(static_cast<unsigned char>(text[i]));
    return ids;
}

inline std::string detokenize_bytes(const std::vector<int32_t>& ids) {
    std::string s(ids.size(), '\0');
    for (std::size_t i = 0; i < ids.size(); ++i) s[i] = char(static_cast<unsigned char>(ids[i]));
    return s;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::invalid_argument("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct Batch {
    std::vector<int32_t> inputs;   // batch x seq, row-major
    std::vector<int32_t> targets;  // same layout, shifted by one
    std::size_t batch = 0;
    std::size_t seq = 0;
};

// Contiguous non-overlapping windows of seq_len+1 ids; the last
// split_fraction of the corpus is held out for validation so shuffled
// training windows can never leak into it.
class BatchPlan {
  public:
    BatchPlan(std::vector<int32_t> ids, std::size_t seq_len, std::size_t batch_size, double split_fraction,
              uint64_t seed)
        : ids_(std::move(ids)), seq_len_(seq_len), batch_size_(batch_size), seed_(seed) {
        if (seq_len == 0 || batch_size == 0) throw std::invalid_argument("batches: zero seq_len or batch_size");
        if (split_fraction < 0.0 || split_fraction >= 1.0)
            throw std::invalid_argument("batches: split_fraction must be in [0, 1)");
        const std::size_t w = seq_len + 1;
        const std::size_t boundary = std::size_t(double(ids_.size()) * (1.0 - split_fraction));
        const std::size_t n_train = boundary / w;
        const std::size_t n_val = (ids_.size() - boundary) / w;
        if (n_train == 0 || (split_fraction > 0.0 && n_val == 0)) {
            const double small = std::min(split_fraction > 0 ? split_fraction : 1.0, 1.0 - split_fraction);
            const std::size_t need = std::size_t(double(w) / small) + w;
            throw std::invalid_argument("batches: corpus of " + std::to_string(ids_.size()) +
                                        " ids too small; need at least ~" + std::to_string(need) +
                                        " for one window per split");
        }
        train_starts_.resize(n_train);
        for (std::size_t i = 0; i < n_train; ++i) train_starts_[i] = i * w;
        val_starts_.resize(n_val);
        for (std::size_t i = 0; i < n_val; ++i) val_starts_[i] = boundary + i * w;
        order_ = train_starts_;
        reshuffle();
    }

    // Next training batch; reshuffles deterministically at each epoch end and
    // drops the ragged tail. Batches never shrink below min(batch_size, #train).
    Batch next_train() {
        const std::size_t eff = std::min(batch_size_, order_.size());
        if (cursor_ + eff > order_.size()) {
            ++epoch_;
            reshuffle();
            cursor_ = 0;
        }
        Batch b = gather(order_.data() + cursor_, eff);
        cursor_ += eff;
        return b;
    }

    // The full validation split, grouped into batches (last one may be short).
    std::vector<Batch> val_batches() const {
        std::vector<Batch> out;
        for (std::size_t i = 0; i < val_starts_.size(); i += batch_size_) {
            const std::size_t n = std::min(batch_size_, val_starts_.size() - i);
            out.push_back(gather(val_starts_.data() + i, n));
        }
        return out;
    }

    std::size_t n_train_windows() const { return train_starts_.size(); }
    std::size_t n_val_windows() const { return val_starts_.size(); }
    const std::vector<std::size_t>& train_starts() const { return train_starts_; }
    const std::vector<std::size_t>& val_starts() const { return val_starts_; }
    uint64_t epoch() const { return epoch_; }

  private:
    Batch gather(const std::size_t* starts, std::size_t n) const {
        Batch b;
        b.batch = n;
        b.seq = seq_len_;
        b.inputs.resize(n * seq_len_);
        b.targets.resize(n * seq_len_);
        for (std::size_t i = 0; i < n; ++i) {
            const int32_t* src = ids_.data() + starts[i];
            std::copy_n(src, seq_len_, b.inputs.data() + i * seq_len_);
            std::copy_n(src + 1, seq_len_, b.targets.data() + i * seq_len_);
        }
        return b;
    }

    void reshuffle() {
        Rng r = Rng(seed_, 0x6261746368ull).split(epoch_);  // per-epoch stream
        order_ = train_starts_;
        for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[r.next_below(i)]);
    }

    std::vector<int32_t> ids_;
    std::size_t seq_len_, batch_size_;
    uint64_t seed_;
    std::vector<std::size_t> train_starts_, val_starts_, order_;
    std::size_t cursor_ = 0;
    uint64_t epoch_ = 0;
};

inline BatchPlan make_batches(std::vector<int32_t> ids, std::size_t seq_len, std::size_t batch_size,
                              double split_fraction, uint64_t seed) {
    return BatchPlan(std::move(ids), seq_len, batch_size, split_fraction, seed);
}

// Token-dependent position task: each sequence of symbols carries exactly one
// marker; the label is the symbol one step ("next") or two steps ("nextnext")
// after the marker, read out at the marker position.
struct ToyTaskSpec {
    std::size_t n_symbols = 8;
    std::size_t seq_len = 16;
    uint64_t seed = 0;

    static constexpr int32_t kNext = 0;
    static constexpr int32_t kNextNext = 1;
    int32_t first_symbol() const { return 2; }
    int32_t pad_id() const { return int32_t(2 + n_symbols); }
    std::size_t vocab_size() const { return n_symbols + 3; }  // NEXT, NEXTNEXT, symbols, PAD

    void validate() const {
        if (seq_len < 4) throw std::invalid_argument("toy task: seq_len must be >= 4");
        if (n_symbols < 2) throw std::invalid_argument("toy task: need at least 2 symbols");
    }
};

struct ToySample {
    std::vector<int32_t> tokens;
    std::size_t marker_pos = 0;
    int shift = 1;   // 1 for NEXT, 2 for NEXTNEXT
    int32_t label = 0;  // symbol at marker_pos + shift
};

struct ToyBatch {
    std::vector<int32_t> inputs;      // n x seq_len
    std::vector<int32_t> ce_targets;  // label at marker position, -1 elsewhere
    std::vector<ToySample> samples;
    std::size_t seq() const { return samples.empty() ? 0 : samples[0].tokens.size(); }
};

inline ToySample toy_task_sample(const ToyTaskSpec& spec, Rng& rng, int shift) {
    ToySample s;
    s.shift = shift;
    s.tokens.resize(spec.seq_len);
    for (auto& t : s.tokens) t = spec.first_symbol() + int32_t(rng.next_below(spec.n_symbols));
    const std::size_t valid = spec.seq_len - std::size_t(shift);  // marker in [0, seq_len - shift)
    if (valid == 0) throw std::invalid_argument("toy task: no valid marker placement");
    s.marker_pos = rng.next_below(valid);
    s.tokens[s.marker_pos] = (shift == 1) ? ToyTaskSpec::kNext : ToyTaskSpec::kNextNext;
    s.label = s.tokens[s.marker_pos + std::size_t(shift)];
    return s;
}

// n sequences, exactly balanced between the two marker kinds.
inline ToyBatch toy_task_generate(const ToyTaskSpec& spec, std::size_t n, Rng& rng) {
    spec.validate();
    ToyBatch b;
    b.inputs.reserve(n * spec.seq_len);
    b.ce_targets.assign(n * spec.seq_len, -1);
    for (std::size_t i = 0; i < n; ++i) {
        ToySample s = toy_task_sample(spec, rng, (i % 2 == 0) ? 1 : 2);
        b.inputs.insert(b.inputs.end(), s.tokens.begin(), s.tokens.end());
        b.ce_targets[i * spec.seq_len + s.marker_pos] = s.label;
        b.samples.push_back(std::move(s));
    }
    return b;
}

inline ToyBatch toy_task_generate(const ToyTaskSpec& spec, std::size_t n) {
    Rng rng(spec.seed, Rng::stream_of("toy"));
    return toy_task_generate(spec, n, rng);
}

}  // namespace crope
