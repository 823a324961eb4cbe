#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "useg/attention.hpp"

namespace useg {

enum class HeadType { timestep, window };

struct ConvBlockCfg {
    size_t out_channels = 0;
    size_t kernel = 0;
};

// Declarative description of one U-shaped model. The encoder halves the time
// axis once per block; the decoder mirrors it back up with additive skip
// connections.
struct ModelConfig {
    size_t in_channels = 0;
    size_t window_samples = 0;  // T
    std::vector<ConvBlockCfg> encoder_blocks;
    std::vector<size_t> rescnn_kernels = {3, 3, 3, 3, 2, 3, 2};
    size_t d_model = 0;
    size_t num_heads = 4;
    size_t dim_ff = 0;
    size_t num_tx_layers = 0;
    std::vector<ConvBlockCfg> decoder_blocks;
    HeadType head = HeadType::timestep;
    size_t num_classes = 1;
    double dropout_rate = 0.1;
    bool pe_denom_tokens = false;  // use the condensed length instead of d_model in PE exponents

    size_t depth() const { return encoder_blocks.size(); }
    size_t condensed_len() const { return window_samples >> depth(); }

    // Binary heads emit one sigmoid unit; multi-class heads emit per-class
    // softmax probabilities.
    bool binary_head() const { return num_classes <= 2; }
    size_t head_units() const { return binary_head() ? 1 : num_classes; }

    void validate() const {
        if (in_channels == 0) throw ConfigError("model: in_channels must be positive");
        if (encoder_blocks.empty()) throw ConfigError("model: at least one encoder block required");
        if (decoder_blocks.size() != encoder_blocks.size())
            throw ConfigError("model: decoder must mirror encoder (block counts differ)");
        const size_t n = depth();
        if (window_samples == 0 || (window_samples % (size_t{1} << n)) != 0)
            throw ConfigError("model: window_samples must be divisible by 2^" + std::to_string(n));
        if (d_model != encoder_blocks.back().out_channels)
            throw ConfigError("model: d_model must equal the last encoder out_channels");
        if (num_heads == 0 || d_model % num_heads != 0)
            throw ConfigError("model: num_heads must divide d_model");
        if (num_tx_layers > 0 && dim_ff == 0) throw ConfigError("model: dim_ff must be positive");
        if (decoder_blocks.back().out_channels != encoder_blocks.front().out_channels)
            throw ConfigError("model: final decoder out_channels must equal first encoder out_channels");
        for (size_t j = 0; j < n; ++j) {
            const size_t want = encoder_blocks[n - 1 - j].out_channels;
            if (decoder_blocks[j].out_channels != want)
                throw ConfigError("model: decoder." + std::to_string(j) + " emits " +
                                  std::to_string(decoder_blocks[j].out_channels) +
                                  " channels but the mirrored encoder stage has " + std::to_string(want));
        }
        for (const auto& b : encoder_blocks)
            if (b.out_channels == 0 || b.kernel == 0) throw ConfigError("model: bad encoder block");
        for (const auto& b : decoder_blocks)
            if (b.out_channels == 0 || b.kernel == 0) throw ConfigError("model: bad decoder block");
        for (size_t k : rescnn_kernels)
            if (k == 0) throw ConfigError("model: bad rescnn kernel");
        if (num_classes == 0) throw ConfigError("model: num_classes must be positive");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("model: dropout in [0,1)");
    }
};

// Ordered record of (operator label, output shape) pairs for one forward.
struct ShapeTrace {
    std::vector<std::pair<std::string, Shape>> rows;
    void row(std::string label, Shape s) { rows.emplace_back(std::move(label), std::move(s)); }
};

template <typename T>
struct ResBlock {
    Conv1dLayer<T> conv1, conv2;
    BatchNorm1d<T> bn1, bn2;
    double dropout_rate = 0.0;

    ResBlock() = default;

    ResBlock(const std::string& name, Rng& rng, size_t channels, size_t kernel, double dropout)
        : conv1(Conv1dLayer<T>::same(name + ".conv1", rng, channels, channels, kernel)),
          conv2(Conv1dLayer<T>::same(name + ".conv2", rng, channels, channels, kernel)),
          bn1(name + ".bn1", channels),
          bn2(name + ".bn2", channels),
          dropout_rate(dropout) {}

    Var<T> forward(CtxT<T>& ctx, const Var<T>& x) {
        Var<T> b = ops::spatial_dropout(ctx, ops::relu(ctx, bn1.forward(ctx, conv1.forward(ctx, x))),
                                        dropout_rate);
        b = ops::spatial_dropout(ctx, ops::relu(ctx, bn2.forward(ctx, conv2.forward(ctx, b))),
                                dropout_rate);
        return ops::add(ctx, x, b);
    }

    void collect(std::vector<ParamT<T>*>& out) {
        conv1.collect(out);
        bn1.collect(out);
        conv2.collect(out);
        bn2.collect(out);
    }
};

// Attention pooling over time followed by a linear classifier (window head).
template <typename T>
struct PoolingHead {
    ParamT<T> w_a;  // [H, 1]
    LinearLayer<T> classifier;

    PoolingHead() = default;

    PoolingHead(const std::string& name, Rng& rng, size_t h, size_t classes)
        : w_a(name + ".w_a", uniform_init<T>(rng, {h, 1}, std::sqrt(1.0 / double(h)))),
          classifier(name + ".classifier", rng, h, classes) {}

    // x: [H, T] feature map; returns ([classes] logits, attention weights [T]).
    std::pair<Var<T>, Var<T>> forward(CtxT<T>& ctx, const Var<T>& x) const {
        const size_t t_len = x.val().dim(1);
        Var<T> scores = ops::matmul(ctx, ops::transpose2d(ctx, x), w_a.var());  // [T, 1]
        Var<T> attn = ops::softmax(ctx, ops::reshape(ctx, scores, {t_len}), 0);
        Var<T> pooled = ops::matmul(ctx, x, ops::reshape(ctx, attn, {t_len, 1}));  // [H, 1]
        const size_t h = x.val().dim(0);
        Var<T> logits = classifier.forward(ctx, ops::reshape(ctx, pooled, {h}));
        return {logits, attn};
    }

    void collect(std::vector<ParamT<T>*>& out) {
        out.push_back(&w_a);
        classifier.collect(out);
    }
};

template <typename T>
class ModelT {
public:
    ModelT() = default;

    ModelT(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed);
        const size_t n = cfg_.depth();

        size_t c_prev = cfg_.in_channels;
        for (size_t i = 0; i < n; ++i) {
            const auto& b = cfg_.encoder_blocks[i];
            encoder_.push_back(Conv1dLayer<T>::same("encoder." + std::to_string(i) + ".conv", rng,
                                                    c_prev, b.out_channels, b.kernel));
            c_prev = b.out_channels;
        }
        for (size_t i = 0; i < cfg_.rescnn_kernels.size(); ++i)
            rescnn_.push_back(ResBlock<T>("rescnn." + std::to_string(i), rng, cfg_.d_model,
                                          cfg_.rescnn_kernels[i], cfg_.dropout_rate));
        pe_ = positional_encoding<T>(cfg_.condensed_len(), cfg_.d_model,
                                     cfg_.pe_denom_tokens ? cfg_.condensed_len() : cfg_.d_model);
        for (size_t i = 0; i < cfg_.num_tx_layers; ++i)
            tx_.push_back(TransformerLayer<T>("tx." + std::to_string(i), rng, cfg_.d_model,
                                              cfg_.num_heads, cfg_.dim_ff, cfg_.dropout_rate));
        c_prev = cfg_.d_model;
        for (size_t j = 0; j < n; ++j) {
            const auto& b = cfg_.decoder_blocks[j];
            decoder_.push_back(Conv1dLayer<T>::same("decoder." + std::to_string(j) + ".conv", rng,
                                                    c_prev, b.out_channels, b.kernel));
            c_prev = b.out_channels;
        }
        if (cfg_.head == HeadType::timestep) {
            head_conv_ = Conv1dLayer<T>::same("head.conv", rng, c_prev, cfg_.head_units(),
                                              cfg_.encoder_blocks.front().kernel);
        } else {
            pool_head_ = PoolingHead<T>("head", rng, c_prev, cfg_.head_units());
        }
        index_params();
    }

    const ModelConfig& config() const { return cfg_; }

    // Per-time-step class probabilities: [T] (binary) or [classes, T].
    Var<T> forward_seq(CtxT<T>& ctx, const Var<T>& x, ShapeTrace* trace = nullptr) {
        if (cfg_.head != HeadType::timestep)
            throw ConfigError("forward_seq requires a timestep head");
        Var<T> h = forward_core(ctx, x, trace);
        h = head_conv_.forward(ctx, h);
        if (trace)
            trace->row(conv_label(decoder_.back().weight.value().dim(0), cfg_.head_units(),
                                  /*elu=*/false),
                       h.shape());
        if (cfg_.binary_head()) {
            h = ops::sigmoid(ctx, h);
            h = ops::reshape(ctx, h, {cfg_.window_samples});
            if (trace) trace->row("squeeze", h.shape());
        } else {
            h = ops::softmax(ctx, h, 0);
        }
        return h;
    }

    // Window-level class probabilities: scalar in (0,1) (binary) or [classes].
    Var<T> forward_window(CtxT<T>& ctx, const Var<T>& x, ShapeTrace* trace = nullptr) {
        if (cfg_.head != HeadType::window)
            throw ConfigError("forward_window requires a window head");
        Var<T> h = forward_core(ctx, x, trace);
        auto [logits, attn] = pool_head_.forward(ctx, h);
        last_attention_weights_ = attn.val();
        if (trace) trace->row("attention_pooling", {h.val().dim(0)});
        Var<T> out;
        if (cfg_.binary_head()) {
            if (trace) trace->row("linear", {1});
            out = ops::sigmoid(ctx, logits);
            if (trace) trace->row("sigmoid", {1});
        } else {
            if (trace) trace->row("linear", {cfg_.num_classes});
            out = ops::softmax(ctx, logits, 0);
            if (trace) trace->row("softmax", {cfg_.num_classes});
        }
        return out;
    }

    // Attention weights of the most recent forward_window call.
    const TensorT<T>& last_attention_weights() const { return last_attention_weights_; }

    std::vector<ParamT<T>*>& params() { return params_; }

    void zero_grads() {
        for (auto* p : params_) p->zero_grad();
    }

    size_t count_params() const {
        size_t n = 0;
        for (const auto* p : params_) n += p->numel();
        return n;
    }

    // Section name ("encoder", "rescnn", "tx", "decoder", "head") -> count.
    std::map<std::string, size_t> count_params_by_section() const {
        std::map<std::string, size_t> out;
        for (const auto* p : params_) {
            const std::string section = p->name.substr(0, p->name.find('.'));
            out[section] += p->numel();
        }
        return out;
    }

    std::vector<TransformerLayer<T>>& transformer_layers() { return tx_; }

private:
    static std::string conv_label(size_t c_in, size_t c_out, bool elu) {
        return "conv1d(" + std::to_string(c_in) + "->" + std::to_string(c_out) + ")" +
               (elu ? "+elu" : "");
    }

    Var<T> forward_core(CtxT<T>& ctx, const Var<T>& x, ShapeTrace* trace) {
        if (x.val().rank() != 2 || x.val().dim(0) != cfg_.in_channels ||
            x.val().dim(1) != cfg_.window_samples)
            throw ShapeError("model: input must be (" + std::to_string(cfg_.in_channels) + "," +
                             std::to_string(cfg_.window_samples) + "), got " + shape_str(x.shape()));
        const size_t n = cfg_.depth();

        std::vector<Var<T>> skips;
        skips.reserve(n);
        Var<T> h = x;
        size_t c_prev = cfg_.in_channels;
        for (size_t i = 0; i < n; ++i) {
            h = ops::elu(ctx, encoder_[i].forward(ctx, h));
            if (trace) trace->row(conv_label(c_prev, cfg_.encoder_blocks[i].out_channels, true), h.shape());
            skips.push_back(h);
            h = ops::maxpool1d(ctx, h, 2, 2);
            if (trace) trace->row("maxpool1d", h.shape());
            c_prev = cfg_.encoder_blocks[i].out_channels;
        }

        for (auto& block : rescnn_) h = block.forward(ctx, h);
        if (trace && !rescnn_.empty()) trace->row("rescnn_stack", h.shape());

        if (!tx_.empty()) {
            Var<T> tokens = ops::transpose2d(ctx, h);
            tokens = ops::add(ctx, tokens, Var<T>::constant(pe_));
            for (auto& layer : tx_) tokens = layer.forward(ctx, tokens);
            h = ops::transpose2d(ctx, tokens);
            if (trace) trace->row("positional_encoding+transformer", h.shape());
        }

        for (size_t j = 0; j < n; ++j) {
            h = ops::upsample_nearest(ctx, h, 2);
            if (trace) trace->row("upsample(x2)", h.shape());
            const size_t c_in = h.val().dim(0);
            h = ops::elu(ctx, decoder_[j].forward(ctx, h));
            // Additive skip from the mirrored encoder stage (channel counts
            // match by config validation).
            h = ops::add(ctx, h, skips[n - 1 - j]);
            if (trace) trace->row(conv_label(c_in, cfg_.decoder_blocks[j].out_channels, true), h.shape());
        }
        return h;
    }

    void index_params() {
        params_.clear();
        for (auto& l : encoder_) l.collect(params_);
        for (auto& b : rescnn_) b.collect(params_);
        for (auto& l : tx_) l.collect(params_);
        for (auto& l : decoder_) l.collect(params_);
        if (cfg_.head == HeadType::timestep)
            head_conv_.collect(params_);
        else
            pool_head_.collect(params_);
    }

    ModelConfig cfg_;
    std::vector<Conv1dLayer<T>> encoder_;
    std::vector<ResBlock<T>> rescnn_;
    TensorT<T> pe_;
    std::vector<TransformerLayer<T>> tx_;
    std::vector<Conv1dLayer<T>> decoder_;
    Conv1dLayer<T> head_conv_;
    PoolingHead<T> pool_head_;
    std::vector<ParamT<T>*> params_;
    TensorT<T> last_attention_weights_;
};

using Model = ModelT<float>;

template <typename T = float>
ModelT<T> build_model(const ModelConfig& cfg, uint64_t seed) {
    return ModelT<T>(cfg, seed);
}

// ---------------------------------------------------------------------------
// analytic parameter accounting (no allocation)
// ---------------------------------------------------------------------------

inline size_t transformer_layer_param_count(size_t d_model, size_t dim_ff) {
    return 4 * (d_model * d_model + d_model)  // q, k, v, o projections
           + 2 * d_model * dim_ff + dim_ff + d_model  // feed-forward pair
           + 4 * d_model;                              // two layer norms
}

inline std::map<std::string, size_t> param_count_by_section(const ModelConfig& cfg) {
    cfg.validate();
    std::map<std::string, size_t> out;
    size_t enc = 0, c_prev = cfg.in_channels;
    for (const auto& b : cfg.encoder_blocks) {
        enc += b.out_channels * c_prev * b.kernel + b.out_channels;
        c_prev = b.out_channels;
    }
    out["encoder"] = enc;
    size_t res = 0;
    for (size_t k : cfg.rescnn_kernels)
        res += 2 * (cfg.d_model * cfg.d_model * k + cfg.d_model) + 2 * (2 * cfg.d_model);
    out["rescnn"] = res;
    out["tx"] = cfg.num_tx_layers * transformer_layer_param_count(cfg.d_model, cfg.dim_ff);
    size_t dec = 0;
    c_prev = cfg.d_model;
    for (const auto& b : cfg.decoder_blocks) {
        dec += b.out_channels * c_prev * b.kernel + b.out_channels;
        c_prev = b.out_channels;
    }
    out["decoder"] = dec;
    if (cfg.head == HeadType::timestep) {
        out["head"] = cfg.head_units() * c_prev * cfg.encoder_blocks.front().kernel + cfg.head_units();
    } else {
        out["head"] = c_prev /*w_a*/ + c_prev * cfg.head_units() + cfg.head_units();
    }
    return out;
}

inline size_t param_count(const ModelConfig& cfg) {
    size_t n = 0;
    for (const auto& [section, count] : param_count_by_section(cfg)) n += count;
    return n;
}

// ---------------------------------------------------------------------------
// built-in configurations
// ---------------------------------------------------------------------------

// 19-channel, 60 s @ 256 Hz seizure detector.
inline ModelConfig seizure_config() {
    ModelConfig cfg;
    cfg.in_channels = 19;
    cfg.window_samples = 15360;
    cfg.encoder_blocks = {{32, 11}, {64, 9}, {128, 7}, {256, 7}, {512, 5}};
    cfg.d_model = 512;
    cfg.num_heads = 4;
    cfg.dim_ff = 2048;
    cfg.num_tx_layers = 8;
    cfg.decoder_blocks = {{512, 3}, {256, 5}, {128, 5}, {64, 7}, {32, 7}};
    cfg.head = HeadType::timestep;
    cfg.num_classes = 1;
    return cfg;
}

// 2-channel, 30 s @ 256 Hz five-class sleep stager (window head).
inline ModelConfig sleep_config() {
    ModelConfig cfg;
    cfg.in_channels = 2;
    cfg.window_samples = 7680;
    cfg.encoder_blocks = {{16, 11}, {32, 9}, {64, 7}, {128, 7}};
    cfg.d_model = 128;
    cfg.num_heads = 4;
    cfg.dim_ff = 512;
    cfg.num_tx_layers = 8;
    cfg.decoder_blocks = {{128, 3}, {64, 5}, {32, 5}, {16, 7}};
    cfg.head = HeadType::window;
    cfg.num_classes = 5;
    return cfg;
}

// 23-channel, 10 s @ 200 Hz binary pathology detector (window head).
inline ModelConfig pathological_config() {
    ModelConfig cfg;
    cfg.in_channels = 23;
    cfg.window_samples = 2000;
    cfg.encoder_blocks = {{64, 11}, {128, 9}};
    cfg.d_model = 128;
    cfg.num_heads = 4;
    cfg.dim_ff = 512;
    cfg.num_tx_layers = 8;
    cfg.decoder_blocks = {{128, 3}, {64, 5}};
    cfg.head = HeadType::window;
    cfg.num_classes = 1;
    return cfg;
}

}  // namespace useg
