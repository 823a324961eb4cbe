#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "useg/ops.hpp"

namespace useg {

template <typename T>
TensorT<T> uniform_init(Rng& rng, Shape shape, double bound) {
    TensorT<T> t(std::move(shape));
    for (size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
    return t;
}

template <typename T>
struct Conv1dLayer {
    ParamT<T> weight;  // [C_out, C_in, k]
    ParamT<T> bias;    // [C_out]
    size_t stride = 1;
    long pad_l = 0, pad_r = 0;

    Conv1dLayer() = default;

    // Symmetric padding.
    Conv1dLayer(const std::string& name, Rng& rng, size_t c_in, size_t c_out, size_t k,
                size_t stride_, size_t padding)
        : Conv1dLayer(name, rng, c_in, c_out, k, stride_, static_cast<long>(padding),
                      static_cast<long>(padding)) {}

    Conv1dLayer(const std::string& name, Rng& rng, size_t c_in, size_t c_out, size_t k,
                size_t stride_, long pad_l_, long pad_r_)
        : weight(name + ".weight", uniform_init<T>(rng, {c_out, c_in, k}, std::sqrt(1.0 / double(c_in * k)))),
          bias(name + ".bias", uniform_init<T>(rng, {c_out}, std::sqrt(1.0 / double(c_in * k)))),
          stride(stride_),
          pad_l(pad_l_),
          pad_r(pad_r_) {}

    // Length-preserving padding for stride 1: total pad k-1, split so even
    // kernels pad one extra sample on the left.
    static Conv1dLayer same(const std::string& name, Rng& rng, size_t c_in, size_t c_out, size_t k) {
        const long total = static_cast<long>(k) - 1;
        const long left = static_cast<long>(k / 2);
        return Conv1dLayer(name, rng, c_in, c_out, k, 1, left, total - left);
    }

    Var<T> forward(CtxT<T>& ctx, const Var<T>& x) const {
        return ops::conv1d(ctx, x, weight.var(), bias.var(), stride, pad_l, pad_r);
    }

    void collect(std::vector<ParamT<T>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

template <typename T>
struct LinearLayer {
    ParamT<T> weight;  // [d_in, d_out]
    ParamT<T> bias;    // [d_out]

    LinearLayer() = default;

    LinearLayer(const std::string& name, Rng& rng, size_t d_in, size_t d_out)
        : weight(name + ".weight", uniform_init<T>(rng, {d_in, d_out}, std::sqrt(1.0 / double(d_in)))),
          bias(name + ".bias", uniform_init<T>(rng, {d_out}, std::sqrt(1.0 / double(d_in)))) {}

    Var<T> forward(CtxT<T>& ctx, const Var<T>& x) const {
        return ops::linear(ctx, x, weight.var(), bias.var());
    }

    void collect(std::vector<ParamT<T>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

// Per-channel batch normalization over batch and time. Accepts [C, L]
// (treated as batch of one) or [B, C, L]. Running statistics start at
// mean 0 / var 1, so an eval pass before any training is well defined.
template <typename T>
struct BatchNorm1d {
    ParamT<T> gamma;  // [C]
    ParamT<T> beta;   // [C]
    std::vector<T> running_mean;
    std::vector<T> running_var;
    double eps = 1e-3;
    double momentum = 0.1;

    BatchNorm1d() = default;

    BatchNorm1d(const std::string& name, size_t channels, double eps_ = 1e-3, double momentum_ = 0.1)
        : gamma(name + ".weight", TensorT<T>::full({channels}, T(1))),
          beta(name + ".bias", TensorT<T>::zeros({channels})),
          running_mean(channels, T(0)),
          running_var(channels, T(1)),
          eps(eps_),
          momentum(momentum_) {}

    Var<T> forward(CtxT<T>& ctx, const Var<T>& x) {
        const TensorT<T>& xv = x.val();
        if (xv.rank() != 2 && xv.rank() != 3) throw ShapeError("batchnorm1d: rank-2 or rank-3 input");
        const size_t B = xv.rank() == 3 ? xv.dim(0) : 1;
        const size_t C = xv.rank() == 3 ? xv.dim(1) : xv.dim(0);
        const size_t L = xv.rank() == 3 ? xv.dim(2) : xv.dim(1);
        if (C != gamma.numel()) throw ShapeError("batchnorm1d: channel count mismatch");
        const size_t n = B * L;
        if (ctx.training && n < 2) throw ShapeError("batchnorm1d: training requires batch*time >= 2");

        auto xhat = std::make_shared<TensorT<T>>(xv.shape());
        auto inv_std = std::make_shared<std::vector<T>>(C);
        TensorT<T> out(xv.shape());

        for (size_t c = 0; c < C; ++c) {
            T mean, var;
            if (ctx.training) {
                T acc = 0;
                for (size_t b = 0; b < B; ++b) {
                    const T* px = xv.data() + (b * C + c) * L;
                    for (size_t t = 0; t < L; ++t) acc += px[t];
                }
                mean = acc / T(n);
                T vacc = 0;
                for (size_t b = 0; b < B; ++b) {
                    const T* px = xv.data() + (b * C + c) * L;
                    for (size_t t = 0; t < L; ++t) {
                        const T d = px[t] - mean;
                        vacc += d * d;
                    }
                }
                var = vacc / T(n);
                running_mean[c] = T((1.0 - momentum) * running_mean[c] + momentum * mean);
                running_var[c] = T((1.0 - momentum) * running_var[c] + momentum * var);
            } else {
                mean = running_mean[c];
                var = running_var[c];
            }
            const T istd = T(1) / std::sqrt(var + T(eps));
            (*inv_std)[c] = istd;
            const T g = gamma.value()[c], bshift = beta.value()[c];
            for (size_t b = 0; b < B; ++b) {
                const T* px = xv.data() + (b * C + c) * L;
                T* ph = xhat->data() + (b * C + c) * L;
                T* po = out.data() + (b * C + c) * L;
                for (size_t t = 0; t < L; ++t) {
                    const T h = (px[t] - mean) * istd;
                    ph[t] = h;
                    po[t] = g * h + bshift;
                }
            }
        }

        Var<T> o = ops::detail::make_out(ctx, std::move(out),
                                         x.tracked() || gamma.node->tracked || beta.node->tracked);
        if (o.tracked()) {
            auto xn = x.node();
            auto gn = gamma.node;
            auto bn = beta.node;
            auto on = o.node();
            const bool train_stats = ctx.training;
            ctx.tape->record([xn, gn, bn, on, xhat, inv_std, B, C, L, n, train_stats] {
                const TensorT<T>& dy = on->grad;
                for (size_t c = 0; c < C; ++c) {
                    T sum_dy = 0, sum_dy_h = 0;
                    for (size_t b = 0; b < B; ++b) {
                        const T* pdy = dy.data() + (b * C + c) * L;
                        const T* ph = xhat->data() + (b * C + c) * L;
                        for (size_t t = 0; t < L; ++t) {
                            sum_dy += pdy[t];
                            sum_dy_h += pdy[t] * ph[t];
                        }
                    }
                    if (gn->tracked) gn->grad_ref()[c] += sum_dy_h;
                    if (bn->tracked) bn->grad_ref()[c] += sum_dy;
                    if (xn->tracked) {
                        const T g = gn->val[c];
                        const T istd = (*inv_std)[c];
                        const T mean_dy = sum_dy / T(n);
                        const T mean_dy_h = sum_dy_h / T(n);
                        for (size_t b = 0; b < B; ++b) {
                            const T* pdy = dy.data() + (b * C + c) * L;
                            const T* ph = xhat->data() + (b * C + c) * L;
                            T* pg = xn->grad_ref().data() + (b * C + c) * L;
                            if (train_stats) {
                                for (size_t t = 0; t < L; ++t)
                                    pg[t] += g * istd * (pdy[t] - mean_dy - ph[t] * mean_dy_h);
                            } else {
                                for (size_t t = 0; t < L; ++t) pg[t] += g * istd * pdy[t];
                            }
                        }
                    }
                }
            });
        }
        return o;
    }

    void collect(std::vector<ParamT<T>*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
};

// Normalization over the last dimension with learnable scale/shift.
template <typename T>
struct LayerNorm {
    ParamT<T> gamma;  // [d]
    ParamT<T> beta;   // [d]
    double eps = 1e-5;

    LayerNorm() = default;

    LayerNorm(const std::string& name, size_t d)
        : gamma(name + ".weight", TensorT<T>::full({d}, T(1))),
          beta(name + ".bias", TensorT<T>::zeros({d})) {}

    Var<T> forward(CtxT<T>& ctx, const Var<T>& x) const {
        const TensorT<T>& xv = x.val();
        const size_t d = gamma.numel();
        if (xv.rank() == 0 || xv.dim(xv.rank() - 1) != d)
            throw ShapeError("layernorm: last dimension must be " + std::to_string(d));
        const size_t rows = xv.numel() / d;

        auto xhat = std::make_shared<TensorT<T>>(xv.shape());
        auto inv_std = std::make_shared<std::vector<T>>(rows);
        TensorT<T> out(xv.shape());
        for (size_t r = 0; r < rows; ++r) {
            const T* px = xv.data() + r * d;
            T mean = 0;
            for (size_t i = 0; i < d; ++i) mean += px[i];
            mean /= T(d);
            T var = 0;
            for (size_t i = 0; i < d; ++i) {
                const T dv = px[i] - mean;
                var += dv * dv;
            }
            var /= T(d);
            const T istd = T(1) / std::sqrt(var + T(eps));
            (*inv_std)[r] = istd;
            T* ph = xhat->data() + r * d;
            T* po = out.data() + r * d;
            for (size_t i = 0; i < d; ++i) {
                const T h = (px[i] - mean) * istd;
                ph[i] = h;
                po[i] = gamma.value()[i] * h + beta.value()[i];
            }
        }

        Var<T> o = ops::detail::make_out(ctx, std::move(out),
                                         x.tracked() || gamma.node->tracked || beta.node->tracked);
        if (o.tracked()) {
            auto xn = x.node();
            auto gn = gamma.node;
            auto bn = beta.node;
            auto on = o.node();
            ctx.tape->record([xn, gn, bn, on, xhat, inv_std, rows, d] {
                const TensorT<T>& dy = on->grad;
                for (size_t r = 0; r < rows; ++r) {
                    const T* pdy = dy.data() + r * d;
                    const T* ph = xhat->data() + r * d;
                    if (gn->tracked || bn->tracked) {
                        for (size_t i = 0; i < d; ++i) {
                            if (gn->tracked) gn->grad_ref()[i] += pdy[i] * ph[i];
                            if (bn->tracked) bn->grad_ref()[i] += pdy[i];
                        }
                    }
                    if (xn->tracked) {
                        T mean_h = 0, mean_hh = 0;
                        for (size_t i = 0; i < d; ++i) {
                            const T hgrad = pdy[i] * gn->val[i];
                            mean_h += hgrad;
                            mean_hh += hgrad * ph[i];
                        }
                        mean_h /= T(d);
                        mean_hh /= T(d);
                        const T istd = (*inv_std)[r];
                        T* pg = xn->grad_ref().data() + r * d;
                        for (size_t i = 0; i < d; ++i) {
                            const T hgrad = pdy[i] * gn->val[i];
                            pg[i] += istd * (hgrad - mean_h - ph[i] * mean_hh);
                        }
                    }
                }
            });
        }
        return o;
    }

    void collect(std::vector<ParamT<T>*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
};

}  // namespace useg
