#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "useg/layers.hpp"

namespace useg {

// Interleaved sine/cosine positional encoding over `steps` positions.
// `denom_dim` is the dimension used in the frequency exponent; the standard
// choice is the embedding width itself.
template <typename T>
TensorT<T> positional_encoding(size_t steps, size_t d_model, size_t denom_dim) {
    if (d_model % 2 != 0) throw ConfigError("positional_encoding: d_model must be even");
    if (denom_dim == 0) throw ConfigError("positional_encoding: denominator dimension must be positive");
    TensorT<T> pe({steps, d_model});
    for (size_t pos = 0; pos < steps; ++pos) {
        for (size_t i = 0; 2 * i < d_model; ++i) {
            const double angle =
                double(pos) / std::pow(10000.0, (2.0 * double(i)) / double(denom_dim));
            pe.at2(pos, 2 * i) = T(std::sin(angle));
            pe.at2(pos, 2 * i + 1) = T(std::cos(angle));
        }
    }
    return pe;
}

template <typename T>
TensorT<T> positional_encoding(size_t steps, size_t d_model) {
    return positional_encoding<T>(steps, d_model, d_model);
}

// Full bidirectional multi-head self-attention on tokens [T, d_model].
template <typename T>
struct MultiHeadAttention {
    LinearLayer<T> wq, wk, wv, wo;
    size_t d_model = 0;
    size_t num_heads = 1;
    size_t d_k = 0;
    bool capture_attention = false;
    mutable std::vector<TensorT<T>> last_attention;  // one [T, T] matrix per head

    MultiHeadAttention() = default;

    MultiHeadAttention(const std::string& name, Rng& rng, size_t d_model_, size_t num_heads_)
        : wq(name + ".wq", rng, d_model_, d_model_),
          wk(name + ".wk", rng, d_model_, d_model_),
          wv(name + ".wv", rng, d_model_, d_model_),
          wo(name + ".wo", rng, d_model_, d_model_),
          d_model(d_model_),
          num_heads(num_heads_) {
        if (num_heads == 0 || d_model % num_heads != 0)
            throw ConfigError("attention: num_heads must divide d_model");
        d_k = d_model / num_heads;
    }

    Var<T> forward(CtxT<T>& ctx, const Var<T>& z) const {
        if (z.val().rank() != 2 || z.val().dim(1) != d_model)
            throw ShapeError("attention: tokens must be [T, d_model]");
        const Var<T> q = wq.forward(ctx, z);
        const Var<T> k = wk.forward(ctx, z);
        const Var<T> v = wv.forward(ctx, z);

        if (capture_attention) last_attention.clear();
        const T inv_sqrt_dk = T(1.0 / std::sqrt(double(d_k)));
        std::vector<Var<T>> heads;
        heads.reserve(num_heads);
        for (size_t h = 0; h < num_heads; ++h) {
            const size_t j0 = h * d_k, j1 = (h + 1) * d_k;
            Var<T> qh = ops::slice_cols(ctx, q, j0, j1);
            Var<T> kh = ops::slice_cols(ctx, k, j0, j1);
            Var<T> vh = ops::slice_cols(ctx, v, j0, j1);
            Var<T> logits = ops::scale(ctx, ops::matmul(ctx, qh, ops::transpose2d(ctx, kh)), inv_sqrt_dk);
            if (!logits.val().all_finite()) throw NumericError("attention: non-finite logits");
            Var<T> attn = ops::softmax(ctx, logits, 1);
            if (capture_attention) last_attention.push_back(attn.val());
            heads.push_back(ops::matmul(ctx, attn, vh));
        }
        return wo.forward(ctx, ops::concat_cols(ctx, heads));
    }

    void collect(std::vector<ParamT<T>*>& out) {
        wq.collect(out);
        wk.collect(out);
        wv.collect(out);
        wo.collect(out);
    }
};

// Post-norm transformer encoder layer:
//   Z1 = LN(Z + MHA(Z)); out = LN(Z1 + FFN(Z1))
// with FFN = linear -> ReLU -> dropout -> linear.
template <typename T>
struct TransformerLayer {
    MultiHeadAttention<T> mha;
    LayerNorm<T> ln1, ln2;
    LinearLayer<T> ff1, ff2;
    double dropout_rate = 0.0;

    TransformerLayer() = default;

    TransformerLayer(const std::string& name, Rng& rng, size_t d_model, size_t num_heads,
                     size_t dim_ff, double dropout_rate_)
        : mha(name + ".attn", rng, d_model, num_heads),
          ln1(name + ".ln1", d_model),
          ln2(name + ".ln2", d_model),
          ff1(name + ".ff1", rng, d_model, dim_ff),
          ff2(name + ".ff2", rng, dim_ff, d_model),
          dropout_rate(dropout_rate_) {}

    Var<T> forward(CtxT<T>& ctx, const Var<T>& z) {
        Var<T> z1 = ln1.forward(ctx, ops::add(ctx, z, mha.forward(ctx, z)));
        Var<T> h = ops::relu(ctx, ff1.forward(ctx, z1));
        h = ops::dropout(ctx, h, dropout_rate);
        Var<T> f = ff2.forward(ctx, h);
        return ln2.forward(ctx, ops::add(ctx, z1, f));
    }

    void collect(std::vector<ParamT<T>*>& out) {
        mha.collect(out);
        ln1.collect(out);
        ln2.collect(out);
        ff1.collect(out);
        ff2.collect(out);
    }
};

}  // namespace useg
