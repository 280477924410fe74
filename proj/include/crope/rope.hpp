#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace crope {

// Frequency table for rotary rotation: theta_t = base^(-2(t-1)/D) for
// t = 1..D/2, strictly decreasing, theta_1 = 1.
struct RopeConfig {
    std::size_t head_dim = 64;
    double base = 5000.0;
    std::vector<double> freqs;

    RopeConfig() { rebuild(); }
    RopeConfig(std::size_t d, double b) : head_dim(d), base(b) {
        if (d == 0 || d % 2 != 0) throw std::invalid_argument("rope: head_dim must be even and positive");
        rebuild();
    }

    void rebuild() {
        freqs.resize(head_dim / 2);
        for (std::size_t t = 0; t < head_dim / 2; ++t)
            freqs[t] = std::pow(base, -2.0 * double(t) / double(head_dim));
    }
};

using ComplexVec = std::vector<std::complex<double>>;

// Interleaved layout: complex entry t is (v[2t], v[2t+1]).
inline ComplexVec to_complex(const std::vector<double>& v) {
    if (v.size() % 2 != 0) throw std::invalid_argument("to_complex: odd length");
    ComplexVec out(v.size() / 2);
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = {v[2 * t], v[2 * t + 1]};
    return out;
}

inline std::vector<double> to_real(const ComplexVec& v) {
    std::vector<double> out(2 * v.size());
    for (std::size_t t = 0; t < v.size(); ++t) {
        out[2 * t] = v[t].real();
        out[2 * t + 1] = v[t].imag();
    }
    return out;
}

// Rotates pair (v[2t], v[2t+1]) by angle m * theta_t; an isometry.
inline std::vector<double> apply_rotation_real(const std::vector<double>& v, long long m, const RopeConfig& cfg) {
    if (v.size() != cfg.head_dim)
        throw std::invalid_argument("apply_rotation_real: vector length " + std::to_string(v.size()) +
                                    " vs head_dim " + std::to_string(cfg.head_dim));
    std::vector<double> out(v.size());
    for (std::size_t t = 0; t < cfg.head_dim / 2; ++t) {
        const double a = double(m) * cfg.freqs[t];
        const double c = std::cos(a), s = std::sin(a);
        out[2 * t] = v[2 * t] * c - v[2 * t + 1] * s;
        out[2 * t + 1] = v[2 * t] * s + v[2 * t + 1] * c;
    }
    return out;
}

// (R_m q) . (R_n k); depends on positions only through n - m.
inline double score_rope(const std::vector<double>& q, const std::vector<double>& k, long long m, long long n,
                         const RopeConfig& cfg) {
    const auto qr = apply_rotation_real(q, m, cfg);
    const auto kr = apply_rotation_real(k, n, cfg);
    double s = 0;
    for (std::size_t i = 0; i < qr.size(); ++i) s += qr[i] * kr[i];
    return s;
}

// Re[ sum_t conj(q_t) e^{-i(m-n) theta_t} k_t ]; equals score_rope on the
// interleaved real images.
inline double score_complex(const ComplexVec& q, const ComplexVec& k, long long m, long long n,
                            const RopeConfig& cfg) {
    if (q.size() != cfg.head_dim / 2 || k.size() != cfg.head_dim / 2)
        throw std::invalid_argument("score_complex: lengths must equal head_dim/2");
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t t = 0; t < q.size(); ++t) {
        const double a = -double(m - n) * cfg.freqs[t];
        acc += std::conj(q[t]) * std::polar(1.0, a) * k[t];
    }
    return acc.real();
}

// Sinusoidal absolute-position vector on the same frequency table:
// p[2t] = sin(m theta_t), p[2t+1] = cos(m theta_t).
inline std::vector<double> sinusoidal_pe(long long m, const RopeConfig& cfg) {
    std::vector<double> p(cfg.head_dim);
    for (std::size_t t = 0; t < cfg.head_dim / 2; ++t) {
        p[2 * t] = std::sin(double(m) * cfg.freqs[t]);
        p[2 * t + 1] = std::cos(double(m) * cfg.freqs[t]);
    }
    return p;
}

// (x_m + p_m)^T Wq^T Wk (x_n + p_n) with a precomputed sinusoidal table.
inline double score_abs_pe(const std::vector<double>& x_m, const std::vector<double>& x_n, long long m, long long n,
                           const RopeConfig& cfg, const Eigen::MatrixXd& wq, const Eigen::MatrixXd& wk) {
    const std::size_t d = cfg.head_dim;
    if (x_m.size() != d || x_n.size() != d) throw std::invalid_argument("score_abs_pe: vector length mismatch");
    Eigen::VectorXd a(d), b(d);
    const auto pm = sinusoidal_pe(m, cfg), pn = sinusoidal_pe(n, cfg);
    for (std::size_t i = 0; i < d; ++i) {
        a[i] = x_m[i] + pm[i];
        b[i] = x_n[i] + pn[i];
    }
    return (wq * a).dot(wk * b);
}

// (2/D) sum_t cos(delta * theta_t): 1 at delta = 0, even in delta.
inline double delta_kernel(const RopeConfig& cfg, long long delta) {
    double s = 0;
    for (double f : cfg.freqs) s += std::cos(double(delta) * f);
    return 2.0 * s / double(cfg.head_dim);
}

// The projection matrix and sparse token patterns that select a relative
// offset of +1 or +2: Wq columns alternate e^{-i theta_t} and e^{-2i theta_t};
// the "next" pattern puts its weights on even complex slots, "nextnext" on odd
// ones. The resulting query is q_t = (sum_t a_t) e^{-i s theta_t} and the key
// is all-ones.
struct ShiftConstruction {
    int shift = 1;
    Eigen::MatrixXcd wq;        // (D/2) x (D/2)
    Eigen::VectorXcd x_next;    // weights on even slots
    Eigen::VectorXcd x_nextnext;  // weights on odd slots
    Eigen::VectorXcd q;         // wq * pattern for the chosen shift
};

inline ShiftConstruction build_shift_construction(const RopeConfig& cfg, int shift,
                                                  const std::vector<double>& token_weights) {
    if (shift != 1 && shift != 2)
        throw std::invalid_argument("build_shift_construction: shift must be 1 or 2, got " + std::to_string(shift));
    if (cfg.head_dim % 4 != 0)
        throw std::invalid_argument("build_shift_construction: head_dim must be divisible by 4");
    const std::size_t c = cfg.head_dim / 2;
    if (token_weights.size() != cfg.head_dim / 4)
        throw std::invalid_argument("build_shift_construction: expected D/4 token weights");

    ShiftConstruction out;
    out.shift = shift;
    out.wq.resize(c, c);
    for (std::size_t t = 0; t < c; ++t) {
        for (std::size_t j = 0; j < c; ++j) {
            const double mult = (j % 2 == 0) ? 1.0 : 2.0;
            out.wq(t, j) = std::polar(1.0, -mult * cfg.freqs[t]);
        }
    }
    out.x_next = Eigen::VectorXcd::Zero(c);
    out.x_nextnext = Eigen::VectorXcd::Zero(c);
    for (std::size_t i = 0; i < token_weights.size(); ++i) {
        out.x_next(2 * i) = token_weights[i];
        out.x_nextnext(2 * i + 1) = token_weights[i];
    }
    out.q = out.wq * (shift == 1 ? out.x_next : out.x_nextnext);
    return out;
}

// Score profile of the construction over a window, evaluated as the plain
// (non-conjugated) product Re[ sum_t q_t e^{-i(m-n) theta_t} ] with an
// all-ones key, which peaks at n = m + shift.
inline Eigen::MatrixXd shift_attention_profile(const RopeConfig& cfg, const ShiftConstruction& sc,
                                               std::size_t window) {
    Eigen::MatrixXd p(window, window);
    for (std::size_t m = 0; m < window; ++m) {
        for (std::size_t n = 0; n < window; ++n) {
            std::complex<double> acc{0.0, 0.0};
            for (std::size_t t = 0; t < cfg.head_dim / 2; ++t)
                acc += sc.q(t) * std::polar(1.0, -double((long long)m - (long long)n) * cfg.freqs[t]);
            p(m, n) = acc.real();
        }
    }
    return p;
}

struct MembershipResult {
    double residual = 0.0;  // Frobenius norm of X W^T - Q
    double relative = 0.0;  // residual / ||Q||_F
    Eigen::MatrixXcd w;     // best tied (complex) map, rows of W
};

// Least-squares fit of one complex-linear map W sending each input pattern
// (row of `inputs`) to the matching target row. The shift construction is
// exactly representable (residual 0); any map that needs a reflection is not.
inline MembershipResult crope_membership_check(const Eigen::MatrixXcd& targets, const Eigen::MatrixXcd& inputs) {
    if (targets.rows() != inputs.rows() || targets.cols() != inputs.cols())
        throw std::invalid_argument("crope_membership_check: pattern/target shapes differ");
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(inputs, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::MatrixXcd wt = svd.solve(targets);  // inputs * wt ~= targets
    MembershipResult r;
    r.w = wt.transpose();
    r.residual = (inputs * wt - targets).norm();
    const double qn = targets.norm();
    r.relative = qn > 0 ? r.residual / qn : r.residual;
    return r;
}

// Input/target rows for the sigma_3 reflection (complex conjugation on one
// coordinate pair): x -> conj(x) on slot 0. Unreachable for any complex-linear
// map once both 1 and i are probed.
inline std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> reflection_membership_case(std::size_t complex_dim) {
    Eigen::MatrixXcd inputs = Eigen::MatrixXcd::Zero(2, complex_dim);
    Eigen::MatrixXcd targets = Eigen::MatrixXcd::Zero(2, complex_dim);
    inputs(0, 0) = {1.0, 0.0};
    targets(0, 0) = {1.0, 0.0};
    inputs(1, 0) = {0.0, 1.0};
    targets(1, 0) = {0.0, -1.0};
    return {inputs, targets};
}

}  // namespace crope
