#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crope/tensor.hpp"

namespace crope {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_fd = 0.0;
    double worst_ad = 0.0;
};

// Central-difference check of reverse-mode gradients, parameter by parameter.
// `f` must be a deterministic scalar function of the given parameters; run it
// in 64-bit. Relative error is |fd - ad| / max(|fd|, |ad|, 1e-8).
inline GradCheckReport grad_check(const std::function<Tensor<double>()>& f, std::vector<Parameter<double>>& params,
                                  double h = 1e-5) {
    const double kEps = 1e-8;

    double base = f().item();
    if (f().item() != base)
        throw std::runtime_error("grad_check: repeated evaluation mismatch, f is not deterministic");

    for (auto& p : params) p.tensor.zero_grad();
    Tensor<double> loss = f();
    loss.backward();
    std::vector<std::vector<double>> ad;
    ad.reserve(params.size());
    for (auto& p : params) ad.push_back(p.tensor.grad());

    GradCheckReport rep;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& v = params[pi].tensor.value();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double keep = v[i];
            v[i] = keep + h;
            double fp = f().item();
            v[i] = keep - h;
            double fm = f().item();
            v[i] = keep;
            const double fd = (fp - fm) / (2.0 * h);
            const double a = ad[pi][i];
            const double rel = std::abs(fd - a) / std::max({std::abs(fd), std::abs(a), kEps});
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = params[pi].name;
                rep.worst_index = i;
                rep.worst_fd = fd;
                rep.worst_ad = a;
            }
        }
    }
    return rep;
}

}  // namespace crope
