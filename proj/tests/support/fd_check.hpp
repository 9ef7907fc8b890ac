#pragma once

// Central finite-difference gradient checker. Independent of the tape's
// backward rules: it only re-evaluates forward passes at perturbed
// parameter values.

#include <algorithm>
#include <cmath>

#include "cgc/tensor.hpp"

namespace cgc_test {

// build(tape) must construct a fresh forward pass from the CURRENT param
// values and return the scalar loss. Returns the worst relative error
// between tape gradients and central differences over all param entries.
template <typename BuildFn>
double fd_max_rel_error(const std::vector<cgc::Param*>& params, BuildFn build,
                        double step = 1e-5) {
    for (cgc::Param* p : params) p->zero_grad();
    {
        cgc::Tape tape;
        cgc::Tensor loss = build(tape);
        tape.backward(loss);
    }
    const auto eval = [&] {
        cgc::Tape tape;
        return build(tape).scalar();
    };

    double worst = 0.0;
    for (cgc::Param* p : params) {
        for (std::size_t i = 0; i < p->value.rows(); ++i) {
            for (std::size_t j = 0; j < p->value.cols(); ++j) {
                const double orig = p->value(i, j);
                p->value(i, j) = orig + step;
                const double fp = eval();
                p->value(i, j) = orig - step;
                const double fm = eval();
                p->value(i, j) = orig;
                const double numeric = (fp - fm) / (2.0 * step);
                const double analytic = p->grad(i, j);
                const double denom = std::max({1.0, std::abs(numeric), std::abs(analytic)});
                worst = std::max(worst, std::abs(numeric - analytic) / denom);
            }
        }
    }
    return worst;
}

} // namespace cgc_test
