#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "crope/ops.hpp"
#include "crope/rng.hpp"
#include "crope/tensor.hpp"

namespace crope {

// Linear projection whose weight is a grid of 2x2 blocks. In tied mode each
// block is [[a, b], [-b, a]] — the real image of multiplication by the
// complex scalar a - b*i on interleaved (re, im) pairs — and only (a, b) are
// stored. Untied mode stores all four entries per block and is an ordinary
// dense layer. The free parameters are the canonical state; the dense weight
// is materialized on demand, so any update of the free parameters preserves
// the tying structure by construction.
template <class T>
class BlockLinear {
  public:
    BlockLinear() = default;

    BlockLinear(std::size_t in_dim, std::size_t out_dim, bool tied, Rng rng)
        : in_dim_(in_dim), out_dim_(out_dim), tied_(tied) {
        if (in_dim % 2 != 0 || out_dim % 2 != 0)
            throw std::invalid_argument("block_linear: dimensions must be even, got " + std::to_string(in_dim) +
                                        " -> " + std::to_string(out_dim));
        const std::size_t per_block = tied ? 2 : 4;
        blocks_ = Tensor<T>::zeros({out_dim / 2, in_dim / 2, per_block}, true);
        const double std_dev = 1.0 / std::sqrt(double(in_dim));
        for (auto& w : blocks_.value()) w = T(rng.normal() * std_dev);
    }

    std::size_t in_dim() const { return in_dim_; }
    std::size_t out_dim() const { return out_dim_; }
    bool tied() const { return tied_; }
    Tensor<T>& blocks() { return blocks_; }
    const Tensor<T>& blocks() const { return blocks_; }

    // Free scalars actually stored: half the dense count when tied.
    std::size_t param_count() const { return blocks_.numel(); }

    // Dense (out_dim x in_dim) view of the block grid, as a graph node so that
    // gradients flow back onto the free parameters only.
    Tensor<T> materialize() const {
        const std::size_t br = out_dim_ / 2, bc = in_dim_ / 2, pb = tied_ ? 2 : 4;
        auto w = Tensor<T>::zeros({out_dim_, in_dim_}, blocks_.requires_grad());
        const T* src = blocks_.value().data();
        T* dst = w.value().data();
        for (std::size_t r = 0; r < br; ++r) {
            for (std::size_t c = 0; c < bc; ++c) {
                const T* blk = src + (r * bc + c) * pb;
                T* w00 = dst + (2 * r) * in_dim_ + 2 * c;
                T* w10 = dst + (2 * r + 1) * in_dim_ + 2 * c;
                if (tied_) {
                    w00[0] = blk[0];
                    w00[1] = blk[1];
                    w10[0] = -blk[1];
                    w10[1] = blk[0];
                } else {
                    w00[0] = blk[0];
                    w00[1] = blk[1];
                    w10[0] = blk[2];
                    w10[1] = blk[3];
                }
            }
        }
        if (w.requires_grad()) {
            auto blocks = blocks_;
            const bool tied = tied_;
            const std::size_t in_dim = in_dim_;
            w.impl()->parents = {blocks};
            w.impl()->backward = [blocks, tied, br, bc, pb, in_dim](TensorImpl<T>& o) mutable {
                T* g = blocks.grad().data();
                const T* go = o.grad.data();
                for (std::size_t r = 0; r < br; ++r) {
                    for (std::size_t c = 0; c < bc; ++c) {
                        T* gb = g + (r * bc + c) * pb;
                        const T* g00 = go + (2 * r) * in_dim + 2 * c;
                        const T* g10 = go + (2 * r + 1) * in_dim + 2 * c;
                        if (tied) {
                            gb[0] += g00[0] + g10[1];
                            gb[1] += g00[1] - g10[0];
                        } else {
                            gb[0] += g00[0];
                            gb[1] += g00[1];
                            gb[2] += g10[0];
                            gb[3] += g10[1];
                        }
                    }
                }
            };
        }
        return w;
    }

    // y = x W^T for x of shape [n x in_dim]; no bias anywhere in this project.
    Tensor<T> forward(const Tensor<T>& x) const {
        if (x.rank() != 2 || x.cols() != in_dim_)
            throw std::invalid_argument("block_linear: input " + shape_str(x.shape()) + " does not end in " +
                                        std::to_string(in_dim_));
        return matmul(x, materialize(), false, true);
    }

    // Overwrites the block grid from a dense matrix (untied mode only).
    void set_from_dense(const std::vector<T>& w) {
        if (tied_) throw std::logic_error("block_linear: set_from_dense requires untied mode");
        if (w.size() != in_dim_ * out_dim_) throw std::invalid_argument("block_linear: dense size mismatch");
        const std::size_t bc = in_dim_ / 2;
        for (std::size_t r = 0; r < out_dim_ / 2; ++r) {
            for (std::size_t c = 0; c < bc; ++c) {
                T* blk = blocks_.value().data() + (r * bc + c) * 4;
                blk[0] = w[(2 * r) * in_dim_ + 2 * c];
                blk[1] = w[(2 * r) * in_dim_ + 2 * c + 1];
                blk[2] = w[(2 * r + 1) * in_dim_ + 2 * c];
                blk[3] = w[(2 * r + 1) * in_dim_ + 2 * c + 1];
            }
        }
    }

  private:
    std::size_t in_dim_ = 0, out_dim_ = 0;
    bool tied_ = true;
    Tensor<T> blocks_;
};

// Independent check path for the tied layer: performs y~ = W~ x~ in explicit
// complex arithmetic over the interleaved layout, where block (a, b) is the
// complex weight a - b*i. Must agree with BlockLinear::forward elementwise.
inline std::vector<double> complex_oracle_forward(const BlockLinear<double>& layer, const std::vector<double>& x) {
    if (!layer.tied()) throw std::logic_error("complex_oracle_forward: layer is untied");
    if (x.size() != layer.in_dim()) throw std::invalid_argument("complex_oracle_forward: input length mismatch");
    const std::size_t bc = layer.in_dim() / 2, br = layer.out_dim() / 2;
    std::vector<std::complex<double>> xc(bc);
    for (std::size_t t = 0; t < bc; ++t) xc[t] = {x[2 * t], x[2 * t + 1]};
    std::vector<double> y(layer.out_dim());
    const double* blk = layer.blocks().value().data();
    for (std::size_t r = 0; r < br; ++r) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t c = 0; c < bc; ++c) {
            std::complex<double> w{blk[(r * bc + c) * 2], -blk[(r * bc + c) * 2 + 1]};
            acc += w * xc[c];
        }
        y[2 * r] = acc.real();
        y[2 * r + 1] = acc.imag();
    }
    return y;
}

// Coefficients of a 2x2 matrix [[m00, m01], [m10, m11]] in the orthogonal
// basis s0 = I, s1 = [[0,1],[1,0]], s2 = [[0,-1],[1,0]], s3 = [[1,0],[0,-1]].
// Tied blocks live exactly in span{s0, s2}: rotation plus scaling, no
// reflections.
inline std::array<double, 4> pauli_decompose(const std::array<double, 4>& m) {
    return {(m[0] + m[3]) / 2.0, (m[1] + m[2]) / 2.0, (m[2] - m[1]) / 2.0, (m[0] - m[3]) / 2.0};
}

inline std::array<double, 4> pauli_reconstruct(const std::array<double, 4>& c) {
    return {c[0] + c[3], c[1] - c[2], c[1] + c[2], c[0] - c[3]};
}

template <class T>
class RmsNorm {
  public:
    RmsNorm() = default;
    explicit RmsNorm(std::size_t dim, double eps = 1e-6) : dim_(dim), eps_(eps) {
        gain_ = Tensor<T>::full({dim}, T(1), true);
    }

    Tensor<T> forward(const Tensor<T>& x) const { return rms_norm_rows(x, gain_, eps_); }
    Tensor<T>& gain() { return gain_; }
    const Tensor<T>& gain() const { return gain_; }
    std::size_t dim() const { return dim_; }
    double eps() const { return eps_; }

  private:
    std::size_t dim_ = 0;
    double eps_ = 1e-6;
    Tensor<T> gain_;
};

// down( silu(gate(x)) ⊙ up(x) ), all three projections dense and bias-free.
template <class T>
class SwigluFfn {
  public:
    SwigluFfn() = default;
    SwigluFfn(std::size_t d_model, std::size_t d_ff, Rng rng) : d_model_(d_model), d_ff_(d_ff) {
        w_gate_ = init({d_ff, d_model}, d_model, rng.split("gate"));
        w_up_ = init({d_ff, d_model}, d_model, rng.split("up"));
        w_down_ = init({d_model, d_ff}, d_ff, rng.split("down"));
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        auto g = matmul(x, w_gate_, false, true);
        auto u = matmul(x, w_up_, false, true);
        return matmul(mul(silu(g), u), w_down_, false, true);
    }

    std::size_t param_count() const { return 3 * d_model_ * d_ff_; }
    Tensor<T>& w_gate() { return w_gate_; }
    Tensor<T>& w_up() { return w_up_; }
    Tensor<T>& w_down() { return w_down_; }

  private:
    static Tensor<T> init(Shape shape, std::size_t fan_in, Rng rng) {
        auto t = Tensor<T>::zeros(std::move(shape), true);
        const double std_dev = 1.0 / std::sqrt(double(fan_in));
        for (auto& w : t.value()) w = T(rng.normal() * std_dev);
        return t;
    }

    std::size_t d_model_ = 0, d_ff_ = 0;
    Tensor<T> w_gate_, w_up_, w_down_;
};

template <class T>
std::size_t count_params(const BlockLinear<T>& layer) {
    return layer.param_count();
}
template <class T>
std::size_t count_params(const SwigluFfn<T>& ffn) {
    return ffn.param_count();
}
template <class T>
std::size_t count_params(const RmsNorm<T>& norm) {
    return norm.dim();
}

}  // namespace crope
