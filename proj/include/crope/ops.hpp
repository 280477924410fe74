#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "crope/tensor.hpp"

namespace crope {

template <class T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<EMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const EMat<T>>;

namespace detail {

template <class T>
bool any_requires(const std::vector<Tensor<T>>& ts) {
    for (const auto& t : ts)
        if (t.requires_grad()) return true;
    return false;
}

template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

}  // namespace detail

template <class T>
Tensor<T> add(Tensor<T> a, Tensor<T> b) {
    detail::check_same_shape(a, b, "add");
    auto out = Tensor<T>::zeros(a.shape(), a.requires_grad() || b.requires_grad());
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.value()[i] = a.value()[i] + b.value()[i];
    if (out.requires_grad()) {
        out.impl()->parents = {a, b};
        out.impl()->backward = [a, b](TensorImpl<T>& o) mutable {
            if (a.requires_grad()) {
                auto& g = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
            }
            if (b.requires_grad()) {
                auto& g = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
    detail::check_same_shape(a, b, "mul");
    auto out = Tensor<T>::zeros(a.shape(), a.requires_grad() || b.requires_grad());
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.value()[i] = a.value()[i] * b.value()[i];
    if (out.requires_grad()) {
        out.impl()->parents = {a, b};
        out.impl()->backward = [a, b](TensorImpl<T>& o) mutable {
            if (a.requires_grad()) {
                auto& g = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * b.value()[i];
            }
            if (b.requires_grad()) {
                auto& g = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * a.value()[i];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> scale(Tensor<T> a, T c) {
    auto out = Tensor<T>::zeros(a.shape(), a.requires_grad());
    for (std::size_t i = 0; i < a.numel(); ++i) out.value()[i] = a.value()[i] * c;
    if (out.requires_grad()) {
        out.impl()->parents = {a};
        out.impl()->backward = [a, c](TensorImpl<T>& o) mutable {
            auto& g = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * c;
        };
    }
    return out;
}

template <class T>
Tensor<T> sum(Tensor<T> a) {
    auto out = Tensor<T>::zeros(Shape{}, a.requires_grad());
    T s(0);
    for (T v : a.value()) s += v;
    out.value()[0] = s;
    if (out.requires_grad()) {
        out.impl()->parents = {a};
        out.impl()->backward = [a](TensorImpl<T>& o) mutable {
            auto& g = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[0];
        };
    }
    return out;
}

template <class T>
Tensor<T> silu(Tensor<T> a) {
    auto out = Tensor<T>::zeros(a.shape(), a.requires_grad());
    auto sig = std::make_shared<std::vector<T>>(a.numel());
    for (std::size_t i = 0; i < a.numel(); ++i) {
        T z = a.value()[i];
        (*sig)[i] = T(1) / (T(1) + std::exp(-z));
        out.value()[i] = z * (*sig)[i];
    }
    if (out.requires_grad()) {
        out.impl()->parents = {a};
        out.impl()->backward = [a, sig](TensorImpl<T>& o) mutable {
            auto& g = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                T z = a.value()[i];
                T s = (*sig)[i];
                g[i] += o.grad[i] * s * (T(1) + z * (T(1) - s));
            }
        };
    }
    return out;
}

// C = op_a(A) * op_b(B), where op is optional transposition. Kernels are
// Eigen GEMMs; gradients are GEMMs of the same family.
template <class T>
Tensor<T> matmul(Tensor<T> a, Tensor<T> b, bool ta = false, bool tb = false) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument("matmul: expected matrices, got " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()));
    const std::size_t m = ta ? a.cols() : a.rows();
    const std::size_t ka = ta ? a.rows() : a.cols();
    const std::size_t kb = tb ? b.cols() : b.rows();
    const std::size_t n = tb ? b.rows() : b.cols();
    if (ka != kb)
        throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                                    (ta ? "^T" : "") + " x " + shape_str(b.shape()) + (tb ? "^T" : ""));
    auto out = Tensor<T>::zeros({m, n}, a.requires_grad() || b.requires_grad());
    {
        ConstMatMap<T> A(a.value().data(), a.rows(), a.cols());
        ConstMatMap<T> B(b.value().data(), b.rows(), b.cols());
        MatMap<T> C(out.value().data(), m, n);
        if (!ta && !tb)
            C.noalias() = A * B;
        else if (ta && !tb)
            C.noalias() = A.transpose() * B;
        else if (!ta && tb)
            C.noalias() = A * B.transpose();
        else
            C.noalias() = A.transpose() * B.transpose();
    }
    if (out.requires_grad()) {
        out.impl()->parents = {a, b};
        out.impl()->backward = [a, b, ta, tb](TensorImpl<T>& o) mutable {
            ConstMatMap<T> A(a.value().data(), a.rows(), a.cols());
            ConstMatMap<T> B(b.value().data(), b.rows(), b.cols());
            ConstMatMap<T> G(o.grad.data(), o.shape[0], o.shape[1]);
            if (a.requires_grad()) {
                MatMap<T> dA(a.grad().data(), a.rows(), a.cols());
                if (!ta && !tb)
                    dA.noalias() += G * B.transpose();
                else if (ta && !tb)
                    dA.noalias() += B * G.transpose();
                else if (!ta && tb)
                    dA.noalias() += G * B;
                else
                    dA.noalias() += B.transpose() * G.transpose();
            }
            if (b.requires_grad()) {
                MatMap<T> dB(b.grad().data(), b.rows(), b.cols());
                if (!ta && !tb)
                    dB.noalias() += A.transpose() * G;
                else if (ta && !tb)
                    dB.noalias() += A * G;
                else if (!ta && tb)
                    dB.noalias() += G.transpose() * A;
                else
                    dB.noalias() += G.transpose() * A.transpose();
            }
        };
    }
    return out;
}

// Row-wise softmax, stabilized by row-max subtraction.
template <class T>
Tensor<T> softmax_rows(Tensor<T> x) {
    if (x.rank() != 2) throw std::invalid_argument("softmax_rows: expected matrix, got " + shape_str(x.shape()));
    for (T v : x.value())
        if (!std::isfinite(v)) throw std::domain_error("softmax_rows: non-finite input");
    const std::size_t m = x.rows(), n = x.cols();
    auto out = Tensor<T>::zeros(x.shape(), x.requires_grad());
    for (std::size_t i = 0; i < m; ++i) {
        const T* in = x.value().data() + i * n;
        T* p = out.value().data() + i * n;
        T mx = in[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
        T s(0);
        for (std::size_t j = 0; j < n; ++j) {
            p[j] = std::exp(in[j] - mx);
            s += p[j];
        }
        T inv = T(1) / s;
        for (std::size_t j = 0; j < n; ++j) p[j] *= inv;
    }
    if (out.requires_grad()) {
        out.impl()->parents = {x};
        out.impl()->backward = [x, m, n](TensorImpl<T>& o) mutable {
            auto& g = x.grad();
            for (std::size_t i = 0; i < m; ++i) {
                const T* p = o.value.data() + i * n;
                const T* go = o.grad.data() + i * n;
                T dot(0);
                for (std::size_t j = 0; j < n; ++j) dot += go[j] * p[j];
                T* gi = g.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) gi[j] += p[j] * (go[j] - dot);
            }
        };
    }
    return out;
}

// Softmax over a lower-triangular window: row i normalizes columns 0..i and
// zeroes the rest.
template <class T>
Tensor<T> causal_softmax(Tensor<T> x) {
    if (x.rank() != 2 || x.rows() != x.cols())
        throw std::invalid_argument("causal_softmax: expected square matrix, got " + shape_str(x.shape()));
    const std::size_t n = x.rows();
    auto out = Tensor<T>::zeros(x.shape(), x.requires_grad());
    for (std::size_t i = 0; i < n; ++i) {
        const T* in = x.value().data() + i * n;
        T* p = out.value().data() + i * n;
        T mx = in[0];
        for (std::size_t j = 1; j <= i; ++j) mx = std::max(mx, in[j]);
        T s(0);
        for (std::size_t j = 0; j <= i; ++j) {
            p[j] = std::exp(in[j] - mx);
            s += p[j];
        }
        T inv = T(1) / s;
        for (std::size_t j = 0; j <= i; ++j) p[j] *= inv;
    }
    if (out.requires_grad()) {
        out.impl()->parents = {x};
        out.impl()->backward = [x, n](TensorImpl<T>& o) mutable {
            auto& g = x.grad();
            for (std::size_t i = 0; i < n; ++i) {
                const T* p = o.value.data() + i * n;
                const T* go = o.grad.data() + i * n;
                T dot(0);
                for (std::size_t j = 0; j <= i; ++j) dot += go[j] * p[j];
                T* gi = g.data() + i * n;
                for (std::size_t j = 0; j <= i; ++j) gi[j] += p[j] * (go[j] - dot);
            }
        };
    }
    return out;
}

// y_row = x_row / sqrt(mean(x_row^2) + eps) * gain. Pass an undefined gain
// for a plain (gain-free) normalization.
template <class T>
Tensor<T> rms_norm_rows(Tensor<T> x, Tensor<T> gain, double eps) {
    if (x.rank() != 2) throw std::invalid_argument("rms_norm_rows: expected matrix, got " + shape_str(x.shape()));
    const std::size_t m = x.rows(), d = x.cols();
    const bool gained = gain.defined();
    if (gained && gain.numel() != d)
        throw std::invalid_argument("rms_norm_rows: gain length " + std::to_string(gain.numel()) +
                                    " vs width " + std::to_string(d));
    bool req = x.requires_grad() || (gained && gain.requires_grad());
    auto out = Tensor<T>::zeros(x.shape(), req);
    for (std::size_t i = 0; i < m; ++i) {
        const T* in = x.value().data() + i * d;
        T* y = out.value().data() + i * d;
        double ss = 0;
        for (std::size_t j = 0; j < d; ++j) ss += double(in[j]) * double(in[j]);
        double inv = 1.0 / std::sqrt(ss / double(d) + eps);
        for (std::size_t j = 0; j < d; ++j) y[j] = T(double(in[j]) * inv) * (gained ? gain.value()[j] : T(1));
    }
    if (req) {
        out.impl()->parents = gained ? std::vector<Tensor<T>>{x, gain} : std::vector<Tensor<T>>{x};
        out.impl()->backward = [x, gain, gained, m, d, eps](TensorImpl<T>& o) mutable {
            for (std::size_t i = 0; i < m; ++i) {
                const T* in = x.value().data() + i * d;
                const T* go = o.grad.data() + i * d;
                double ss = 0;
                for (std::size_t j = 0; j < d; ++j) ss += double(in[j]) * double(in[j]);
                double r2 = ss / double(d) + eps;
                double inv = 1.0 / std::sqrt(r2);
                if (x.requires_grad()) {
                    double s = 0;  // sum of go * gain * x
                    for (std::size_t j = 0; j < d; ++j)
                        s += double(go[j]) * (gained ? double(gain.value()[j]) : 1.0) * double(in[j]);
                    T* gx = x.grad().data() + i * d;
                    for (std::size_t j = 0; j < d; ++j) {
                        double gj = double(go[j]) * (gained ? double(gain.value()[j]) : 1.0);
                        gx[j] += T(gj * inv - double(in[j]) * s / (double(d) * r2 * std::sqrt(r2)));
                    }
                }
                if (gained && gain.requires_grad()) {
                    T* gg = gain.grad().data();
                    for (std::size_t j = 0; j < d; ++j) gg[j] += go[j] * T(double(in[j]) * inv);
                }
            }
        };
    }
    return out;
}

// Rotates each adjacent coordinate pair of row r by the angle table row r.
// cos/sin tables are row-major [n_rows x d/2]; the inverse rotation is the
// transpose, which is what the backward applies.
template <class T>
Tensor<T> rope_rotate(Tensor<T> x, std::shared_ptr<const std::vector<T>> cos_tab,
                      std::shared_ptr<const std::vector<T>> sin_tab) {
    if (x.rank() != 2 || x.cols() % 2 != 0)
        throw std::invalid_argument("rope_rotate: expected matrix with even width, got " + shape_str(x.shape()));
    const std::size_t m = x.rows(), d = x.cols(), h = d / 2;
    if (cos_tab->size() < m * h || sin_tab->size() < m * h)
        throw std::invalid_argument("rope_rotate: rotation table shorter than " + shape_str(x.shape()));
    auto out = Tensor<T>::zeros(x.shape(), x.requires_grad());
    for (std::size_t i = 0; i < m; ++i) {
        const T* in = x.value().data() + i * d;
        const T* c = cos_tab->data() + i * h;
        const T* s = sin_tab->data() + i * h;
        T* y = out.value().data() + i * d;
        for (std::size_t t = 0; t < h; ++t) {
            y[2 * t] = in[2 * t] * c[t] - in[2 * t + 1] * s[t];
            y[2 * t + 1] = in[2 * t] * s[t] + in[2 * t + 1] * c[t];
        }
    }
    if (out.requires_grad()) {
        out.impl()->parents = {x};
        out.impl()->backward = [x, cos_tab, sin_tab, m, d, h](TensorImpl<T>& o) mutable {
            auto& g = x.grad();
            for (std::size_t i = 0; i < m; ++i) {
                const T* go = o.grad.data() + i * d;
                const T* c = cos_tab->data() + i * h;
                const T* s = sin_tab->data() + i * h;
                T* gi = g.data() + i * d;
                for (std::size_t t = 0; t < h; ++t) {
                    gi[2 * t] += go[2 * t] * c[t] + go[2 * t + 1] * s[t];
                    gi[2 * t + 1] += -go[2 * t] * s[t] + go[2 * t + 1] * c[t];
                }
            }
        };
    }
    return out;
}

// Gathers rows of `table` (V x d) by token id.
template <class T>
Tensor<T> embedding_lookup(Tensor<T> table, std::vector<int32_t> ids) {
    if (table.rank() != 2)
        throw std::invalid_argument("embedding_lookup: table must be a matrix, got " + shape_str(table.shape()));
    const std::size_t v = table.rows(), d = table.cols(), n = ids.size();
    for (int32_t id : ids)
        if (id < 0 || std::size_t(id) >= v)
            throw std::out_of_range("embedding_lookup: token id " + std::to_string(id) + " outside vocab " +
                                    std::to_string(v));
    auto out = Tensor<T>::zeros({n, d}, table.requires_grad());
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(table.value().data() + std::size_t(ids[i]) * d, d, out.value().data() + i * d);
    if (out.requires_grad()) {
        out.impl()->parents = {table};
        out.impl()->backward = [table, ids, d](TensorImpl<T>& o) mutable {
            auto& g = table.grad();
            for (std::size_t i = 0; i < ids.size(); ++i) {
                T* dst = g.data() + std::size_t(ids[i]) * d;
                const T* src = o.grad.data() + i * d;
                for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
            }
        };
    }
    return out;
}

// Copies the rectangle [r0, r1) x [c0, c1); backward scatters into it.
template <class T>
Tensor<T> slice_block(Tensor<T> x, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
    if (x.rank() != 2) throw std::invalid_argument("slice_block: expected matrix, got " + shape_str(x.shape()));
    if (r1 > x.rows() || c1 > x.cols() || r0 >= r1 || c0 >= c1)
        throw std::out_of_range("slice_block: window [" + std::to_string(r0) + "," + std::to_string(r1) + ")x[" +
                                std::to_string(c0) + "," + std::to_string(c1) + ") outside " + shape_str(x.shape()));
    const std::size_t m = r1 - r0, n = c1 - c0, xc = x.cols();
    auto out = Tensor<T>::zeros({m, n}, x.requires_grad());
    for (std::size_t i = 0; i < m; ++i)
        std::copy_n(x.value().data() + (r0 + i) * xc + c0, n, out.value().data() + i * n);
    if (out.requires_grad()) {
        out.impl()->parents = {x};
        out.impl()->backward = [x, r0, c0, m, n, xc](TensorImpl<T>& o) mutable {
            auto& g = x.grad();
            for (std::size_t i = 0; i < m; ++i) {
                T* dst = g.data() + (r0 + i) * xc + c0;
                const T* src = o.grad.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> concat_cols(std::vector<Tensor<T>> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    const std::size_t m = parts[0].rows();
    std::size_t n = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.rows() != m)
            throw std::invalid_argument("concat_cols: row mismatch at part with shape " + shape_str(p.shape()));
        n += p.cols();
    }
    auto out = Tensor<T>::zeros({m, n}, detail::any_requires(parts));
    std::size_t c = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(p.value().data() + i * p.cols(), p.cols(), out.value().data() + i * n + c);
        c += p.cols();
    }
    if (out.requires_grad()) {
        out.impl()->parents = parts;
        out.impl()->backward = [parts, m, n](TensorImpl<T>& o) mutable {
            std::size_t c = 0;
            for (auto& p : parts) {
                if (p.requires_grad()) {
                    auto& g = p.grad();
                    for (std::size_t i = 0; i < m; ++i) {
                        const T* src = o.grad.data() + i * n + c;
                        T* dst = g.data() + i * p.cols();
                        for (std::size_t j = 0; j < p.cols(); ++j) dst[j] += src[j];
                    }
                }
                c += p.cols();
            }
        };
    }
    return out;
}

template <class T>
Tensor<T> concat_rows(std::vector<Tensor<T>> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    const std::size_t n = parts[0].cols();
    std::size_t m = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.cols() != n)
            throw std::invalid_argument("concat_rows: column mismatch at part with shape " + shape_str(p.shape()));
        m += p.rows();
    }
    auto out = Tensor<T>::zeros({m, n}, detail::any_requires(parts));
    std::size_t r = 0;
    for (const auto& p : parts) {
        std::copy_n(p.value().data(), p.numel(), out.value().data() + r * n);
        r += p.rows();
    }
    if (out.requires_grad()) {
        out.impl()->parents = parts;
        out.impl()->backward = [parts, n](TensorImpl<T>& o) mutable {
            std::size_t r = 0;
            for (auto& p : parts) {
                if (p.requires_grad()) {
                    auto& g = p.grad();
                    const T* src = o.grad.data() + r * n;
                    for (std::size_t i = 0; i < p.numel(); ++i) g[i] += src[i];
                }
                r += p.rows();
            }
        };
    }
    return out;
}

// Mean negative log-softmax probability of the targets. Rows whose target is
// `ignore_index` do not contribute. Fused with log-softmax for stability.
template <class T>
Tensor<T> cross_entropy(Tensor<T> logits, std::vector<int32_t> targets, int32_t ignore_index = -1) {
    if (logits.rank() != 2)
        throw std::invalid_argument("cross_entropy: logits must be a matrix, got " + shape_str(logits.shape()));
    const std::size_t m = logits.rows(), v = logits.cols();
    if (targets.size() != m)
        throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                                    std::to_string(m) + " rows");
    std::size_t count = 0;
    for (int32_t t : targets) {
        if (t == ignore_index) continue;
        if (t < 0 || std::size_t(t) >= v)
            throw std::out_of_range("cross_entropy: target " + std::to_string(t) + " outside vocab " +
                                    std::to_string(v));
        ++count;
    }
    if (count == 0) throw std::invalid_argument("cross_entropy: no scored positions");
    auto out = Tensor<T>::zeros(Shape{}, logits.requires_grad());
    // Per-row (max, sum) survive into the backward pass.
    auto stats = std::make_shared<std::vector<std::pair<T, double>>>(m);
    double total = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (targets[i] == ignore_index) continue;
        const T* row = logits.value().data() + i * v;
        T mx = row[0];
        for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        double s = 0;
        for (std::size_t j = 0; j < v; ++j) s += double(std::exp(row[j] - mx));
        (*stats)[i] = {mx, s};
        total += std::log(s) + double(mx) - double(row[std::size_t(targets[i])]);
    }
    out.value()[0] = T(total / double(count));
    if (out.requires_grad()) {
        out.impl()->parents = {logits};
        out.impl()->backward = [logits, targets, stats, ignore_index, m, v, count](TensorImpl<T>& o) mutable {
            auto& g = logits.grad();
            const T go = o.grad[0] / T(count);
            for (std::size_t i = 0; i < m; ++i) {
                if (targets[i] == ignore_index) continue;
                const T* row = logits.value().data() + i * v;
                T* gi = g.data() + i * v;
                const auto [mx, s] = (*stats)[i];
                const double inv = 1.0 / s;
                for (std::size_t j = 0; j < v; ++j) {
                    double p = double(std::exp(row[j] - mx)) * inv;
                    gi[j] += go * T(p - (std::size_t(targets[i]) == j ? 1.0 : 0.0));
                }
            }
        };
    }
    return out;
}

}  // namespace crope
