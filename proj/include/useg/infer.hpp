#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "useg/model.hpp"
#include "useg/recording.hpp"
#include "useg/windowing.hpp"

namespace useg {

// Post-processing knobs for turning probability sequences into events.
struct PostConfig {
    double tau = 0.8;            // decision threshold per class
    double opening_len_s = 0.5;  // opening structuring element
    double closing_len_s = 0.5;  // closing structuring element
    double min_duration_s = 2.0; // discard events shorter than this

    void validate() const {
        if (tau <= 0.0 || tau >= 1.0) throw ConfigError("post: tau must be in (0, 1)");
        if (opening_len_s <= 0.0 || closing_len_s <= 0.0)
            throw ConfigError("post: structuring element lengths must be positive");
        if (min_duration_s < 0.0) throw ConfigError("post: min duration must be >= 0");
    }
};

// Per-sample event probabilities over a whole recording.
struct ProbSequence {
    std::vector<float> values;
    double fs = 0.0;
};

// Window/stride bookkeeping for both inference styles.
struct InferencePlan {
    size_t window_samples = 0;  // w_s
    size_t stride_samples = 0;  // s_s

    static InferencePlan make(double window_s, double fs, double r_overlap) {
        if (r_overlap < 0.0 || r_overlap >= 1.0)
            throw ConfigError("inference: r_overlap must be in [0, 1)");
        InferencePlan p;
        p.window_samples = static_cast<size_t>(std::llround(window_s * fs));
        p.stride_samples = static_cast<size_t>(std::llround((1.0 - r_overlap) * window_s * fs));
        if (p.window_samples == 0 || p.stride_samples == 0)
            throw ConfigError("inference: window or stride rounds to zero samples");
        return p;
    }

    // Non-overlapping pass with a zero-padded final window.
    size_t seq_invocations(size_t length) const {
        return (length + window_samples - 1) / window_samples;
    }

    // Sliding-window pass; requires at least one full window.
    size_t sliding_invocations(size_t length) const {
        if (length < window_samples) return 0;
        return (length - window_samples) / stride_samples + 1;
    }
};

// ---------------------------------------------------------------------------
// time-step inference: cut into non-overlapping windows, zero-pad the tail,
// concatenate per-window probabilities, truncate to the recording length
// ---------------------------------------------------------------------------

template <typename T>
ProbSequence predict_mask(ModelT<T>& model, const Recording& rec, size_t* invocations_out = nullptr) {
    rec.validate();
    const ModelConfig& cfg = model.config();
    if (cfg.head != HeadType::timestep || !cfg.binary_head())
        throw ConfigError("predict_mask: binary timestep head required");
    if (rec.num_channels() != cfg.in_channels)
        throw DataError("predict_mask: recording has " + std::to_string(rec.num_channels()) +
                        " channels, model expects " + std::to_string(cfg.in_channels));

    const size_t L = rec.num_samples();
    const size_t w = cfg.window_samples;
    const size_t B = (L + w - 1) / w;

    ProbSequence out;
    out.fs = rec.fs;
    out.values.resize(L);
    CtxT<T> ctx{nullptr, false, nullptr};
    TensorT<T> x({cfg.in_channels, w});
    for (size_t i = 0; i < B; ++i) {
        const size_t start = i * w;
        const size_t n = std::min(w, L - start);
        x.fill(T(0));
        for (size_t c = 0; c < cfg.in_channels; ++c)
            for (size_t t = 0; t < n; ++t) x.at2(c, t) = T(rec.samples.at2(c, start + t));
        Var<T> p = model.forward_seq(ctx, Var<T>::constant(x));
        for (size_t t = 0; t < n; ++t) out.values[start + t] = float(p.val()[t]);
    }
    if (invocations_out) *invocations_out = B;
    return out;
}

// One score per sliding window: the mean of the per-step probabilities. This
// is the window-classifier stand-in used to benchmark the overlapping
// inference style against the time-step style with the same network.
template <typename T>
std::vector<float> sliding_window_scores(ModelT<T>& model, const Recording& rec,
                                         const InferencePlan& plan,
                                         size_t* invocations_out = nullptr) {
    rec.validate();
    const ModelConfig& cfg = model.config();
    if (plan.window_samples != cfg.window_samples)
        throw ConfigError("sliding_window_scores: plan window does not match the model window");
    if (rec.num_channels() != cfg.in_channels)
        throw DataError("sliding_window_scores: channel mismatch");

    const size_t L = rec.num_samples();
    const size_t B = plan.sliding_invocations(L);
    std::vector<float> scores;
    scores.reserve(B);
    CtxT<T> ctx{nullptr, false, nullptr};
    TensorT<T> x({cfg.in_channels, plan.window_samples});
    for (size_t i = 0; i < B; ++i) {
        const size_t start = i * plan.stride_samples;
        for (size_t c = 0; c < cfg.in_channels; ++c)
            for (size_t t = 0; t < plan.window_samples; ++t)
                x.at2(c, t) = T(rec.samples.at2(c, start + t));
        Var<T> p = model.forward_seq(ctx, Var<T>::constant(x));
        double acc = 0.0;
        for (size_t t = 0; t < plan.window_samples; ++t) acc += double(p.val()[t]);
        scores.push_back(float(acc / double(plan.window_samples)));
    }
    if (invocations_out) *invocations_out = B;
    return scores;
}

// Expansion of window-level scores onto a sample mask. Each stride-sized span
// [i*s_s, (i+1)*s_s) is filled with the thresholded mean of the trailing
// window's worth of scores, i.e. the n_trail = w_s/s_s scores before index i
// (the published pseudocode mixes seconds and window indices; everything here
// is in samples and window indices).
inline Mask expand_window_preds(const std::vector<float>& scores, const InferencePlan& plan,
                                double tau, size_t length) {
    if (plan.stride_samples == 0) throw ConfigError("expand_window_preds: zero stride");
    Mask mask(length, 0);
    const size_t n_trail = static_cast<size_t>(
        std::llround(double(plan.window_samples) / double(plan.stride_samples)));
    for (size_t i = std::max<size_t>(n_trail, 1); i < scores.size(); ++i) {
        const size_t l = i * plan.stride_samples;
        const size_t r = std::min(length, (i + 1) * plan.stride_samples);
        if (l >= length) break;
        double mean = 0.0;
        const size_t lo = i - n_trail;
        for (size_t j = lo; j < i; ++j) mean += double(scores[j]);
        mean /= double(n_trail);
        const uint8_t v = mean > tau ? 1 : 0;
        std::fill(mask.begin() + long(l), mask.begin() + long(r), v);
    }
    return mask;
}

// mask[t] = 1 iff p[t] >= tau (inclusive).
inline Mask threshold_mask(const ProbSequence& p, double tau) {
    if (tau <= 0.0 || tau >= 1.0) throw ConfigError("threshold_mask: tau must be in (0, 1)");
    Mask mask(p.values.size());
    for (size_t i = 0; i < mask.size(); ++i) mask[i] = p.values[i] >= float(tau) ? 1 : 0;
    return mask;
}

// ---------------------------------------------------------------------------
// binary morphology on masks (flat structuring element of n samples, origin
// at floor(n/2); erosion/dilation form an adjunction so opening and closing
// keep their algebraic properties)
// ---------------------------------------------------------------------------

namespace morph {

// erosion: out[i] = AND over b in [-(n/2), n-1-n/2] of x[i+b], zeros outside
inline Mask erode(const Mask& x, size_t n) {
    if (n <= 1) return x;
    const long L = long(x.size());
    const long lo = -long(n / 2), hi = long(n - 1) - long(n / 2);
    std::vector<long> ones(x.size() + 1, 0);
    for (long i = 0; i < L; ++i) ones[i + 1] = ones[i] + (x[size_t(i)] ? 1 : 0);
    Mask out(x.size(), 0);
    for (long i = 0; i < L; ++i) {
        const long a = i + lo, b = i + hi;
        if (a < 0 || b >= L) continue;
        out[size_t(i)] = (ones[b + 1] - ones[a]) == (b - a + 1) ? 1 : 0;
    }
    return out;
}

// adjoint dilation: out[i] = OR over b of x[i-b]
inline Mask dilate(const Mask& x, size_t n) {
    if (n <= 1) return x;
    const long L = long(x.size());
    const long lo = -long(n / 2), hi = long(n - 1) - long(n / 2);
    std::vector<long> ones(x.size() + 1, 0);
    for (long i = 0; i < L; ++i) ones[i + 1] = ones[i] + (x[size_t(i)] ? 1 : 0);
    Mask out(x.size(), 0);
    for (long i = 0; i < L; ++i) {
        const long a = std::max<long>(0, i - hi), b = std::min<long>(L - 1, i - lo);
        if (a > b) continue;
        out[size_t(i)] = (ones[b + 1] - ones[a]) > 0 ? 1 : 0;
    }
    return out;
}

inline Mask opening(const Mask& x, size_t n) { return dilate(erode(x, n), n); }

// computed on a padded axis so dilation support beyond the signal edges is
// seen by the erosion pass; the final crop cannot lose set points
inline Mask closing(const Mask& x, size_t n) {
    if (n <= 1) return x;
    Mask padded(x.size() + 2 * n, 0);
    std::copy(x.begin(), x.end(), padded.begin() + long(n));
    Mask closed = erode(dilate(padded, n), n);
    return Mask(closed.begin() + long(n), closed.begin() + long(n + x.size()));
}

}  // namespace morph

// Opening (removes spurious spikes) followed by closing (fills short gaps).
inline Mask morph_clean(const Mask& mask, const PostConfig& cfg, double fs) {
    cfg.validate();
    const size_t open_n = std::max<size_t>(1, size_t(std::llround(cfg.opening_len_s * fs)));
    const size_t close_n = std::max<size_t>(1, size_t(std::llround(cfg.closing_len_s * fs)));
    return morph::closing(morph::opening(mask, open_n), close_n);
}

// Zero every maximal run of 1s strictly shorter than min_duration_s * fs.
inline Mask remove_short_events(const Mask& mask, const PostConfig& cfg, double fs) {
    const size_t l_min = static_cast<size_t>(std::llround(cfg.min_duration_s * fs));
    if (l_min <= 1) return mask;
    Mask out = mask;
    size_t i = 0;
    while (i < out.size()) {
        if (!out[i]) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j < out.size() && out[j]) ++j;
        if (j - i < l_min) std::fill(out.begin() + long(i), out.begin() + long(j), uint8_t{0});
        i = j;
    }
    return out;
}

// Maximal runs of 1s <-> (onset, duration) tuples. The round trip
// mask -> events -> mask is the identity.
inline EventList mask_to_events(const Mask& mask, double fs, const std::string& label = "sz") {
    EventList out;
    size_t i = 0;
    while (i < mask.size()) {
        if (!mask[i]) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j < mask.size() && mask[j]) ++j;
        out.events.push_back({double(i) / fs, double(j - i) / fs, label});
        i = j;
    }
    return out;
}

inline Mask events_to_mask(const EventList& list, double fs, size_t length) {
    list.validate();
    Mask mask(length, 0);
    for (const auto& e : list.events) {
        const long start = std::llround(e.onset_s * fs);
        long stop = std::llround(e.offset_s() * fs);
        if (start >= long(length)) {
            warn("events_to_mask: event at " + std::to_string(e.onset_s) +
                 " s lies beyond the recording end; dropped");
            continue;
        }
        if (stop > long(length)) {
            warn("events_to_mask: event at " + std::to_string(e.onset_s) +
                 " s extends beyond the recording end; clipped");
            stop = long(length);
        }
        for (long t = std::max<long>(0, start); t < stop; ++t) mask[size_t(t)] = 1;
    }
    return mask;
}

// Full post-processing chain from probabilities to clinical events.
inline EventList postprocess(const ProbSequence& probs, const PostConfig& cfg) {
    Mask mask = threshold_mask(probs, cfg.tau);
    mask = morph_clean(mask, cfg, probs.fs);
    mask = remove_short_events(mask, cfg, probs.fs);
    return mask_to_events(mask, probs.fs);
}

}  // namespace useg
