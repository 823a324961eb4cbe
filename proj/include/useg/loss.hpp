#pragma once

#include <cmath>

#include "useg/ops.hpp"

namespace useg {

constexpr double kProbClampLo = 1e-7;
constexpr double kProbClampHi = 1.0 - 1e-7;

// Mean negative log-likelihood over time steps. `target` is one-hot [T, C];
// `probs` are per-step class probabilities whose rows must already sum to 1.
// Probabilities are clamped to [1e-7, 1-1e-7] before the log; saturated
// entries receive zero gradient.
template <typename T>
Var<T> cross_entropy(CtxT<T>& ctx, const TensorT<T>& target, const Var<T>& probs) {
    const TensorT<T>& p = probs.val();
    if (p.shape() != target.shape())
        throw ShapeError("cross_entropy: probs " + shape_str(p.shape()) + " vs target " +
                         shape_str(target.shape()));
    if (p.rank() != 2) throw ShapeError("cross_entropy: expected [T, C]");
    const size_t steps = p.dim(0), classes = p.dim(1);
    for (size_t t = 0; t < steps; ++t) {
        T row = 0;
        for (size_t c = 0; c < classes; ++c) row += p.at2(t, c);
        if (std::fabs(double(row) - 1.0) > 1e-4)
            throw DataError("cross_entropy: probability row " + std::to_string(t) +
                            " sums to " + std::to_string(double(row)));
    }

    const T lo = T(kProbClampLo), hi = T(kProbClampHi);
    T acc = 0;
    for (size_t i = 0; i < p.numel(); ++i) {
        if (target[i] == T(0)) continue;
        const T pc = std::min(hi, std::max(lo, p[i]));
        acc -= target[i] * std::log(pc);
    }
    TensorT<T> out = TensorT<T>::scalar(acc / T(steps));

    Var<T> o = ops::detail::make_out(ctx, std::move(out), probs.tracked());
    if (o.tracked()) {
        auto pn = probs.node(), on = o.node();
        auto tgt = std::make_shared<TensorT<T>>(target);
        ctx.tape->record([pn, on, tgt, steps, lo, hi] {
            const T dy = on->grad[0];
            T* g = pn->grad_ref().data();
            for (size_t i = 0; i < pn->val.numel(); ++i) {
                const T pv = pn->val[i];
                if ((*tgt)[i] != T(0) && pv > lo && pv < hi)
                    g[i] -= dy * (*tgt)[i] / (pv * T(steps));
            }
        });
    }
    return o;
}

// Mean binary cross-entropy over a probability sequence [T] against labels
// in {0, 1}. Inputs outside [0, 1] by more than 1e-6 are rejected.
template <typename T>
Var<T> bce(CtxT<T>& ctx, const TensorT<T>& target, const Var<T>& probs) {
    const TensorT<T>& p = probs.val();
    if (p.shape() != target.shape())
        throw ShapeError("bce: probs " + shape_str(p.shape()) + " vs target " +
                         shape_str(target.shape()));
    const size_t n = p.numel();
    if (n == 0) throw ShapeError("bce: empty input");
    for (size_t i = 0; i < n; ++i)
        if (p[i] < T(-1e-6) || p[i] > T(1.0 + 1e-6))
            throw DataError("bce: probability " + std::to_string(double(p[i])) + " outside [0,1]");

    const T lo = T(kProbClampLo), hi = T(kProbClampHi);
    T acc = 0;
    for (size_t i = 0; i < n; ++i) {
        const T pc = std::min(hi, std::max(lo, p[i]));
        acc -= target[i] * std::log(pc) + (T(1) - target[i]) * std::log(T(1) - pc);
    }
    TensorT<T> out = TensorT<T>::scalar(acc / T(n));

    Var<T> o = ops::detail::make_out(ctx, std::move(out), probs.tracked());
    if (o.tracked()) {
        auto pn = probs.node(), on = o.node();
        auto tgt = std::make_shared<TensorT<T>>(target);
        ctx.tape->record([pn, on, tgt, n, lo, hi] {
            const T dy = on->grad[0];
            T* g = pn->grad_ref().data();
            for (size_t i = 0; i < n; ++i) {
                const T pv = pn->val[i];
                if (pv > lo && pv < hi)
                    g[i] += dy * (-(*tgt)[i] / pv + (T(1) - (*tgt)[i]) / (T(1) - pv)) / T(n);
            }
        });
    }
    return o;
}

}  // namespace useg
