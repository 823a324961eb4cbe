#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "useg/gemm.hpp"
#include "useg/tape.hpp"

namespace useg {
namespace ops {

namespace detail {

template <typename T>
Var<T> make_out(CtxT<T>& ctx, TensorT<T> val, bool any_tracked) {
    auto n = std::make_shared<NodeT<T>>();
    n->val = std::move(val);
    n->tracked = ctx.taping() && any_tracked;
    if (n->tracked) n->grad_ref().fill(T(0));
    return Var<T>(n);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise / structural primitives
// ---------------------------------------------------------------------------

template <typename T>
Var<T> add(CtxT<T>& ctx, const Var<T>& a, const Var<T>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    TensorT<T> out(a.shape());
    const T* pa = a.val().data();
    const T* pb = b.val().data();
    T* po = out.data();
    const size_t n = out.numel();
    for (size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];

    Var<T> o = detail::make_out(ctx, std::move(out), a.tracked() || b.tracked());
    if (o.tracked()) {
        auto an = a.node(), bn = b.node(), on = o.node();
        ctx.tape->record([an, bn, on] {
            const TensorT<T>& dy = on->grad;
            if (an->tracked) {
                T* g = an->grad_ref().data();
                for (size_t i = 0; i < dy.numel(); ++i) g[i] += dy[i];
            }
            if (bn->tracked) {
                T* g = bn->grad_ref().data();
                for (size_t i = 0; i < dy.numel(); ++i) g[i] += dy[i];
            }
        });
    }
    return o;
}

template <typename T>
Var<T> scale(CtxT<T>& ctx, const Var<T>& x, T s) {
    TensorT<T> out(x.shape());
    for (size_t i = 0; i < out.numel(); ++i) out[i] = x.val()[i] * s;
    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on, s] {
            T* g = xn->grad_ref().data();
            const TensorT<T>& dy = on->grad;
            for (size_t i = 0; i < dy.numel(); ++i) g[i] += dy[i] * s;
        });
    }
    return o;
}

// Clamp to [lo, hi]; gradient passes only strictly inside the interval, so
// saturated probabilities stop feeding their (potentially infinite) slope.
template <typename T>
Var<T> clamp(CtxT<T>& ctx, const Var<T>& x, T lo, T hi) {
    TensorT<T> out(x.shape());
    for (size_t i = 0; i < out.numel(); ++i) {
        T v = x.val()[i];
        out[i] = v < lo ? lo : (v > hi ? hi : v);
    }
    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on, lo, hi] {
            T* g = xn->grad_ref().data();
            const TensorT<T>& dy = on->grad;
            const TensorT<T>& xv = xn->val;
            for (size_t i = 0; i < dy.numel(); ++i)
                if (xv[i] > lo && xv[i] < hi) g[i] += dy[i];
        });
    }
    return o;
}

template <typename T>
Var<T> transpose2d(CtxT<T>& ctx, const Var<T>& x) {
    if (x.val().rank() != 2) throw ShapeError("transpose2d: rank-2 input required");
    const size_t r = x.val().dim(0), c = x.val().dim(1);
    TensorT<T> out({c, r});
    transpose(r, c, x.val().data(), out.data());
    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on, r, c] {
            TensorT<T> dt({r, c});
            transpose(c, r, on->grad.data(), dt.data());
            T* g = xn->grad_ref().data();
            for (size_t i = 0; i < dt.numel(); ++i) g[i] += dt[i];
        });
    }
    return o;
}

// View with a new shape; gradient passes through unchanged.
template <typename T>
Var<T> reshape(CtxT<T>& ctx, const Var<T>& x, Shape shape) {
    TensorT<T> out = x.val().reshaped(std::move(shape));
    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on] {
            T* g = xn->grad_ref().data();
            for (size_t i = 0; i < on->grad.numel(); ++i) g[i] += on->grad[i];
        });
    }
    return o;
}

template <typename T>
Var<T> sum_all(CtxT<T>& ctx, const Var<T>& x) {
    T acc = 0;
    for (size_t i = 0; i < x.val().numel(); ++i) acc += x.val()[i];
    Var<T> o = detail::make_out(ctx, TensorT<T>::scalar(acc), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on] {
            const T dy = on->grad[0];
            T* g = xn->grad_ref().data();
            for (size_t i = 0; i < xn->val.numel(); ++i) g[i] += dy;
        });
    }
    return o;
}

template <typename T>
Var<T> slice_cols(CtxT<T>& ctx, const Var<T>& x, size_t j0, size_t j1) {
    const size_t rows = x.val().dim(0), cols = x.val().dim(1);
    if (j1 > cols || j0 >= j1) throw ShapeError("slice_cols: bad column range");
    const size_t w = j1 - j0;
    TensorT<T> out({rows, w});
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < w; ++j) out.at2(i, j) = x.val().at2(i, j0 + j);
    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on, rows, w, j0] {
            TensorT<T>& g = xn->grad_ref();
            for (size_t i = 0; i < rows; ++i)
                for (size_t j = 0; j < w; ++j) g.at2(i, j0 + j) += on->grad.at2(i, j);
        });
    }
    return o;
}

template <typename T>
Var<T> concat_cols(CtxT<T>& ctx, const std::vector<Var<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const size_t rows = parts[0].val().dim(0);
    size_t cols = 0;
    bool tracked = false;
    for (const auto& p : parts) {
        if (p.val().dim(0) != rows) throw ShapeError("concat_cols: row mismatch");
        cols += p.val().dim(1);
        tracked = tracked || p.tracked();
    }
    TensorT<T> out({rows, cols});
    size_t off = 0;
    for (const auto& p : parts) {
        const size_t w = p.val().dim(1);
        for (size_t i = 0; i < rows; ++i)
            for (size_t j = 0; j < w; ++j) out.at2(i, off + j) = p.val().at2(i, j);
        off += w;
    }
    Var<T> o = detail::make_out(ctx, std::move(out), tracked);
    if (o.tracked()) {
        std::vector<std::shared_ptr<NodeT<T>>> pn;
        for (const auto& p : parts) pn.push_back(p.node());
        auto on = o.node();
        ctx.tape->record([pn, on, rows] {
            size_t off2 = 0;
            for (const auto& n : pn) {
                const size_t w = n->val.dim(1);
                if (n->tracked) {
                    TensorT<T>& g = n->grad_ref();
                    for (size_t i = 0; i < rows; ++i)
                        for (size_t j = 0; j < w; ++j) g.at2(i, j) += on->grad.at2(i, off2 + j);
                }
                off2 += w;
            }
        });
    }
    return o;
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

template <typename T>
Var<T> relu(CtxT<T>& ctx, const Var<T>& x) {
    TensorT<T> out(x.shape());
    for (size_t i = 0; i < out.numel(); ++i) out[i] = x.val()[i] > T(0) ? x.val()[i] : T(0);
    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on] {
            T* g = xn->grad_ref().data();
            for (size_t i = 0; i < on->grad.numel(); ++i)
                if (xn->val[i] > T(0)) g[i] += on->grad[i];
        });
    }
    return o;
}

// elu(x) = x for x >= 0, exp(x) - 1 otherwise (alpha = 1).
template <typename T>
Var<T> elu(CtxT<T>& ctx, const Var<T>& x) {
    TensorT<T> out(x.shape());
    for (size_t i = 0; i < out.numel(); ++i) {
        const T v = x.val()[i];
        out[i] = v >= T(0) ? v : std::expm1(v);
    }
    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on] {
            T* g = xn->grad_ref().data();
            for (size_t i = 0; i < on->grad.numel(); ++i) {
                const T v = xn->val[i];
                g[i] += on->grad[i] * (v >= T(0) ? T(1) : on->val[i] + T(1));
            }
        });
    }
    return o;
}

template <typename T>
Var<T> sigmoid(CtxT<T>& ctx, const Var<T>& x) {
    TensorT<T> out(x.shape());
    for (size_t i = 0; i < out.numel(); ++i) {
        const T v = x.val()[i];
        if (v >= T(0)) {
            const T e = std::exp(-v);
            out[i] = T(1) / (T(1) + e);
        } else {
            const T e = std::exp(v);
            out[i] = e / (T(1) + e);
        }
    }
    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on] {
            T* g = xn->grad_ref().data();
            for (size_t i = 0; i < on->grad.numel(); ++i) {
                const T s = on->val[i];
                g[i] += on->grad[i] * s * (T(1) - s);
            }
        });
    }
    return o;
}

// Softmax along `axis` of a rank-1 or rank-2 tensor.
template <typename T>
Var<T> softmax(CtxT<T>& ctx, const Var<T>& x, size_t axis) {
    const TensorT<T>& xv = x.val();
    if (xv.rank() == 0 || xv.rank() > 2) throw ShapeError("softmax: rank-1 or rank-2 input required");
    if (axis >= xv.rank()) throw ShapeError("softmax: axis out of range");

    // View as (slices, n) where the softmax runs over n contiguous or strided
    // elements.
    const bool rows = (xv.rank() == 1) || (axis == 1);
    const size_t n = (xv.rank() == 1) ? xv.dim(0) : xv.dim(axis);
    const size_t slices = (xv.rank() == 1) ? 1 : xv.dim(1 - axis);
    const size_t stride = rows ? 1 : xv.dim(1);
    const size_t slice_stride = rows ? n : 1;

    TensorT<T> out(xv.shape());
    for (size_t s = 0; s < slices; ++s) {
        const T* px = xv.data() + s * slice_stride;
        T* po = out.data() + s * slice_stride;
        T mx = -std::numeric_limits<T>::infinity();
        for (size_t i = 0; i < n; ++i) mx = std::max(mx, px[i * stride]);
        T denom = 0;
        for (size_t i = 0; i < n; ++i) {
            const T e = std::exp(px[i * stride] - mx);
            po[i * stride] = e;
            denom += e;
        }
        for (size_t i = 0; i < n; ++i) po[i * stride] /= denom;
    }

    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on, n, slices, stride, slice_stride] {
            T* g = xn->grad_ref().data();
            for (size_t s = 0; s < slices; ++s) {
                const T* py = on->val.data() + s * slice_stride;
                const T* pdy = on->grad.data() + s * slice_stride;
                T dot = 0;
                for (size_t i = 0; i < n; ++i) dot += pdy[i * stride] * py[i * stride];
                T* pg = g + s * slice_stride;
                for (size_t i = 0; i < n; ++i)
                    pg[i * stride] += (pdy[i * stride] - dot) * py[i * stride];
            }
        });
    }
    return o;
}

// ---------------------------------------------------------------------------
// linear algebra layers
// ---------------------------------------------------------------------------

template <typename T>
Var<T> matmul(CtxT<T>& ctx, const Var<T>& a, const Var<T>& b) {
    if (a.val().rank() != 2 || b.val().rank() != 2 || a.val().dim(1) != b.val().dim(0))
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const size_t M = a.val().dim(0), K = a.val().dim(1), N = b.val().dim(1);
    TensorT<T> out({M, N});
    gemm_nn(M, K, N, a.val().data(), b.val().data(), out.data());
    Var<T> o = detail::make_out(ctx, std::move(out), a.tracked() || b.tracked());
    if (o.tracked()) {
        auto an = a.node(), bn = b.node(), on = o.node();
        ctx.tape->record([an, bn, on, M, K, N] {
            if (an->tracked) gemm_nt(M, N, K, on->grad.data(), bn->val.data(), an->grad_ref().data());
            if (bn->tracked) gemm_tn(K, M, N, an->val.data(), on->grad.data(), bn->grad_ref().data());
        });
    }
    return o;
}

// Affine map over the last axis: x[..., d_in] -> x W + b with W[d_in, d_out].
template <typename T>
Var<T> linear(CtxT<T>& ctx, const Var<T>& x, const Var<T>& W, const Var<T>& b) {
    const TensorT<T>& xv = x.val();
    if (W.val().rank() != 2) throw ShapeError("linear: weight must be rank-2");
    const size_t d_in = W.val().dim(0), d_out = W.val().dim(1);
    if (xv.dim(xv.rank() - 1) != d_in)
        throw ShapeError("linear: input inner dimension " + std::to_string(xv.dim(xv.rank() - 1)) +
                         " does not match weight d_in " + std::to_string(d_in));
    if (b.val().numel() != d_out) throw ShapeError("linear: bias length mismatch");

    const size_t rows = xv.numel() / d_in;
    TensorT<T> out(xv.rank() == 1 ? Shape{d_out} : Shape{rows, d_out});
    gemm_nn(rows, d_in, d_out, xv.data(), W.val().data(), out.data());
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < d_out; ++j) out[i * d_out + j] += b.val()[j];

    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked() || W.tracked() || b.tracked());
    if (o.tracked()) {
        auto xn = x.node(), wn = W.node(), bn = b.node(), on = o.node();
        ctx.tape->record([xn, wn, bn, on, rows, d_in, d_out] {
            const T* dy = on->grad.data();
            if (wn->tracked) gemm_tn(d_in, rows, d_out, xn->val.data(), dy, wn->grad_ref().data());
            if (bn->tracked) {
                T* g = bn->grad_ref().data();
                for (size_t i = 0; i < rows; ++i)
                    for (size_t j = 0; j < d_out; ++j) g[j] += dy[i * d_out + j];
            }
            if (xn->tracked) gemm_nt(rows, d_out, d_in, dy, wn->val.data(), xn->grad_ref().data());
        });
    }
    return o;
}

// ---------------------------------------------------------------------------
// convolution and pooling
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void im2col(const TensorT<T>& x, size_t k, size_t stride, long pad_l, size_t L_out, TensorT<T>& col) {
    const size_t C = x.dim(0), L = x.dim(1);
    for (size_t ci = 0; ci < C; ++ci) {
        const T* px = x.data() + ci * L;
        for (size_t kk = 0; kk < k; ++kk) {
            T* pc = col.data() + (ci * k + kk) * L_out;
            for (size_t j = 0; j < L_out; ++j) {
                const long t = static_cast<long>(j * stride + kk) - pad_l;
                pc[j] = (t >= 0 && t < static_cast<long>(L)) ? px[t] : T(0);
            }
        }
    }
}

template <typename T>
void col2im_add(const TensorT<T>& dcol, size_t k, size_t stride, long pad_l, size_t L_out,
                TensorT<T>& dx) {
    const size_t C = dx.dim(0), L = dx.dim(1);
    for (size_t ci = 0; ci < C; ++ci) {
        T* px = dx.data() + ci * L;
        for (size_t kk = 0; kk < k; ++kk) {
            const T* pc = dcol.data() + (ci * k + kk) * L_out;
            for (size_t j = 0; j < L_out; ++j) {
                const long t = static_cast<long>(j * stride + kk) - pad_l;
                if (t >= 0 && t < static_cast<long>(L)) px[t] += pc[j];
            }
        }
    }
}

}  // namespace detail

// Cross-correlation (no kernel flip), asymmetric zero padding. The common
// symmetric case padding=p is pad_l = pad_r = p.
template <typename T>
Var<T> conv1d(CtxT<T>& ctx, const Var<T>& x, const Var<T>& W, const Var<T>& b, size_t stride,
              long pad_l, long pad_r) {
    const TensorT<T>& xv = x.val();
    const TensorT<T>& wv = W.val();
    if (xv.rank() != 2 || wv.rank() != 3)
        throw ShapeError("conv1d: expected x[C_in,L] and weight[C_out,C_in,k]");
    const size_t C_in = xv.dim(0), L = xv.dim(1);
    const size_t C_out = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != C_in)
        throw ShapeError("conv1d: input has " + std::to_string(C_in) + " channels but weight expects " +
                         std::to_string(wv.dim(1)));
    if (b.val().numel() != C_out) throw ShapeError("conv1d: bias length mismatch");
    if (stride < 1) throw ShapeError("conv1d: stride must be >= 1");
    const long padded = static_cast<long>(L) + pad_l + pad_r;
    if (padded < static_cast<long>(k))
        throw ShapeError("conv1d: padded length " + std::to_string(padded) + " shorter than kernel " +
                         std::to_string(k));
    const size_t L_out = static_cast<size_t>((padded - static_cast<long>(k)) / static_cast<long>(stride)) + 1;

    TensorT<T> col({C_in * k, L_out});
    detail::im2col(xv, k, stride, pad_l, L_out, col);

    TensorT<T> out({C_out, L_out});
    gemm_nn(C_out, C_in * k, L_out, wv.data(), col.data(), out.data());
    for (size_t co = 0; co < C_out; ++co) {
        T* po = out.data() + co * L_out;
        const T bias = b.val()[co];
        for (size_t j = 0; j < L_out; ++j) po[j] += bias;
    }

    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked() || W.tracked() || b.tracked());
    if (o.tracked()) {
        auto xn = x.node(), wn = W.node(), bn = b.node(), on = o.node();
        auto col_keep = std::make_shared<TensorT<T>>(std::move(col));
        ctx.tape->record([xn, wn, bn, on, col_keep, C_in, C_out, k, L_out, stride, pad_l] {
            const T* dy = on->grad.data();
            if (wn->tracked)
                gemm_nt(C_out, L_out, C_in * k, dy, col_keep->data(), wn->grad_ref().data());
            if (bn->tracked) {
                T* g = bn->grad_ref().data();
                for (size_t co = 0; co < C_out; ++co) {
                    T acc = 0;
                    for (size_t j = 0; j < L_out; ++j) acc += dy[co * L_out + j];
                    g[co] += acc;
                }
            }
            if (xn->tracked) {
                TensorT<T> dcol({C_in * k, L_out});
                gemm_tn(C_in * k, C_out, L_out, wn->val.data(), dy, dcol.data());
                detail::col2im_add(dcol, k, stride, pad_l, L_out, xn->grad_ref());
            }
        });
    }
    return o;
}

template <typename T>
Var<T> conv1d(CtxT<T>& ctx, const Var<T>& x, const Var<T>& W, const Var<T>& b, size_t stride,
              size_t padding) {
    return conv1d(ctx, x, W, b, stride, static_cast<long>(padding), static_cast<long>(padding));
}

// Max pooling; gradient routes to the first maximum of each window.
template <typename T>
Var<T> maxpool1d(CtxT<T>& ctx, const Var<T>& x, size_t k, size_t stride) {
    const TensorT<T>& xv = x.val();
    if (xv.rank() != 2) throw ShapeError("maxpool1d: rank-2 input required");
    const size_t C = xv.dim(0), L = xv.dim(1);
    if (k > L) throw ShapeError("maxpool1d: window " + std::to_string(k) + " exceeds length " +
                                std::to_string(L));
    if (stride < 1) throw ShapeError("maxpool1d: stride must be >= 1");
    const size_t L_out = (L - k) / stride + 1;

    TensorT<T> out({C, L_out});
    auto argmax = std::make_shared<std::vector<uint32_t>>(C * L_out);
    for (size_t c = 0; c < C; ++c) {
        const T* px = xv.data() + c * L;
        for (size_t j = 0; j < L_out; ++j) {
            const size_t base = j * stride;
            T best = px[base];
            size_t best_i = base;
            for (size_t kk = 1; kk < k; ++kk) {
                if (px[base + kk] > best) {
                    best = px[base + kk];
                    best_i = base + kk;
                }
            }
            out.at2(c, j) = best;
            (*argmax)[c * L_out + j] = static_cast<uint32_t>(best_i);
        }
    }

    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on, argmax, C, L, L_out] {
            T* g = xn->grad_ref().data();
            for (size_t c = 0; c < C; ++c)
                for (size_t j = 0; j < L_out; ++j)
                    g[c * L + (*argmax)[c * L_out + j]] += on->grad.at2(c, j);
        });
    }
    return o;
}

// Nearest-neighbour upsampling along time; backward sums replica gradients.
template <typename T>
Var<T> upsample_nearest(CtxT<T>& ctx, const Var<T>& x, size_t scale) {
    const TensorT<T>& xv = x.val();
    if (xv.rank() != 2) throw ShapeError("upsample_nearest: rank-2 input required");
    if (scale < 1) throw ShapeError("upsample_nearest: scale must be >= 1");
    const size_t C = xv.dim(0), L = xv.dim(1);
    TensorT<T> out({C, L * scale});
    for (size_t c = 0; c < C; ++c) {
        const T* px = xv.data() + c * L;
        T* po = out.data() + c * L * scale;
        for (size_t t = 0; t < L; ++t)
            for (size_t s = 0; s < scale; ++s) po[t * scale + s] = px[t];
    }
    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on, C, L, scale] {
            T* g = xn->grad_ref().data();
            for (size_t c = 0; c < C; ++c) {
                const T* dy = on->grad.data() + c * L * scale;
                for (size_t t = 0; t < L; ++t) {
                    T acc = 0;
                    for (size_t s = 0; s < scale; ++s) acc += dy[t * scale + s];
                    g[c * L + t] += acc;
                }
            }
        });
    }
    return o;
}

// ---------------------------------------------------------------------------
// dropout
// ---------------------------------------------------------------------------

template <typename T>
Var<T> dropout(CtxT<T>& ctx, const Var<T>& x, double rate) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
    if (!ctx.training || rate == 0.0) return x;  // identity, same storage
    if (!ctx.rng) throw ConfigError("dropout: training forward requires an RNG");

    const T keep_scale = T(1.0 / (1.0 - rate));
    auto mask = std::make_shared<std::vector<T>>(x.val().numel());
    TensorT<T> out(x.shape());
    for (size_t i = 0; i < out.numel(); ++i) {
        const T m = ctx.rng->uniform() < rate ? T(0) : keep_scale;
        (*mask)[i] = m;
        out[i] = x.val()[i] * m;
    }
    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on, mask] {
            T* g = xn->grad_ref().data();
            for (size_t i = 0; i < on->grad.numel(); ++i) g[i] += on->grad[i] * (*mask)[i];
        });
    }
    return o;
}

// Drops whole channels of a [C, L] map.
template <typename T>
Var<T> spatial_dropout(CtxT<T>& ctx, const Var<T>& x, double rate) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("spatial_dropout: rate must be in [0, 1)");
    if (x.val().rank() != 2) throw ShapeError("spatial_dropout: rank-2 input required");
    if (!ctx.training || rate == 0.0) return x;
    if (!ctx.rng) throw ConfigError("spatial_dropout: training forward requires an RNG");

    const size_t C = x.val().dim(0), L = x.val().dim(1);
    const T keep_scale = T(1.0 / (1.0 - rate));
    auto mask = std::make_shared<std::vector<T>>(C);
    TensorT<T> out(x.shape());
    for (size_t c = 0; c < C; ++c) {
        const T m = ctx.rng->uniform() < rate ? T(0) : keep_scale;
        (*mask)[c] = m;
        const T* px = x.val().data() + c * L;
        T* po = out.data() + c * L;
        for (size_t t = 0; t < L; ++t) po[t] = px[t] * m;
    }
    Var<T> o = detail::make_out(ctx, std::move(out), x.tracked());
    if (o.tracked()) {
        auto xn = x.node(), on = o.node();
        ctx.tape->record([xn, on, mask, C, L] {
            T* g = xn->grad_ref().data();
            for (size_t c = 0; c < C; ++c) {
                const T m = (*mask)[c];
                const T* dy = on->grad.data() + c * L;
                for (size_t t = 0; t < L; ++t) g[c * L + t] += dy[t] * m;
            }
        });
    }
    return o;
}

}  // namespace ops
}  // namespace useg
