#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "useg/recording.hpp"
#include "useg/rng.hpp"

namespace useg {

using Mask = std::vector<uint8_t>;

enum class WindowCategory : uint8_t { no_activity, full_activity, partial_activity };

struct LabeledWindow {
    Tensor x;                     // [K, T]
    std::vector<uint8_t> labels;  // per-time-step class ids, length T
    WindowCategory category = WindowCategory::no_activity;
    int window_label = -1;  // set for window-level tasks
};

// Windowing and balanced-sampling parameters.
struct DatasetSpec {
    double window_s = 60.0;   // D_window
    double r_overlap = 0.0;   // in [0, 1)
    double alpha = 0.54;      // full-activity windows per partial window
    double beta = 1.0;        // background windows per partial window
    uint64_t seed = 0;

    void validate() const {
        if (window_s <= 0.0) throw ConfigError("dataset: window_s must be positive");
        if (r_overlap < 0.0 || r_overlap >= 1.0) throw ConfigError("dataset: r_overlap in [0, 1)");
        if (alpha < 0.0 || beta < 0.0) throw ConfigError("dataset: alpha and beta must be >= 0");
    }

    size_t window_samples(double fs) const {
        return static_cast<size_t>(std::llround(window_s * fs));
    }

    size_t stride_samples(double fs) const {
        const auto s = static_cast<size_t>(std::llround((1.0 - r_overlap) * window_s * fs));
        if (s == 0) throw ConfigError("dataset: stride rounds to zero samples");
        return s;
    }
};

inline WindowCategory categorize(const uint8_t* labels, size_t n) {
    size_t active = 0;
    for (size_t i = 0; i < n; ++i)
        if (labels[i] != 0) ++active;
    if (active == 0) return WindowCategory::no_activity;
    if (active == n) return WindowCategory::full_activity;
    return WindowCategory::partial_activity;
}

// Slice a recording into uniform windows starting at multiples of the stride;
// a trailing partial window is dropped.
inline std::vector<LabeledWindow> segment(const Recording& rec, const Mask& mask,
                                          const DatasetSpec& spec) {
    rec.validate();
    spec.validate();
    if (mask.size() != rec.num_samples())
        throw DataError("segment: mask length " + std::to_string(mask.size()) +
                        " != sample count " + std::to_string(rec.num_samples()));

    const size_t T = spec.window_samples(rec.fs);
    const size_t stride = spec.stride_samples(rec.fs);
    const size_t L = rec.num_samples();
    const size_t K = rec.num_channels();

    std::vector<LabeledWindow> out;
    if (T > L) {
        warn("segment: window of " + std::to_string(T) + " samples exceeds recording length " +
             std::to_string(L) + "; no windows produced");
        return out;
    }
    for (size_t start = 0; start + T <= L; start += stride) {
        LabeledWindow w;
        w.x = Tensor({K, T});
        for (size_t c = 0; c < K; ++c)
            std::copy_n(rec.samples.data() + c * L + start, T, w.x.data() + c * T);
        w.labels.assign(mask.begin() + long(start), mask.begin() + long(start + T));
        w.category = categorize(w.labels.data(), T);
        out.push_back(std::move(w));
    }
    return out;
}

// Balanced training set: all partial-activity windows, plus
// round(alpha * |partial|) full-activity and round(beta * |partial|)
// background windows sampled uniformly without replacement. With no partial
// windows the fallback is a min(|full|, |bckg|)-balanced two-class sample.
inline std::vector<LabeledWindow> build_balanced_dataset(const std::vector<LabeledWindow>& windows,
                                                         const DatasetSpec& spec) {
    spec.validate();
    std::vector<size_t> partial, full, bckg;
    for (size_t i = 0; i < windows.size(); ++i) {
        switch (windows[i].category) {
            case WindowCategory::partial_activity: partial.push_back(i); break;
            case WindowCategory::full_activity: full.push_back(i); break;
            case WindowCategory::no_activity: bckg.push_back(i); break;
        }
    }

    Rng rng(spec.seed);
    auto take = [&rng](std::vector<size_t>& pool, size_t want, const char* what) {
        if (want > pool.size()) {
            warn(std::string("balanced dataset: requested ") + std::to_string(want) + " " + what +
                 " windows, only " + std::to_string(pool.size()) + " available");
            want = pool.size();
        }
        // partial Fisher-Yates: the first `want` entries are a uniform sample
        for (size_t i = 0; i < want; ++i) {
            const size_t j = i + size_t(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(want);
    };

    std::vector<size_t> chosen;
    if (partial.empty()) {
        warn("balanced dataset: no partial-activity windows; falling back to two-class balance");
        const size_t n = std::min(full.size(), bckg.size());
        take(full, n, "full-activity");
        take(bckg, n, "background");
    } else {
        take(full, static_cast<size_t>(std::llround(spec.alpha * double(partial.size()))),
             "full-activity");
        take(bckg, static_cast<size_t>(std::llround(spec.beta * double(partial.size()))),
             "background");
    }
    chosen.insert(chosen.end(), partial.begin(), partial.end());
    chosen.insert(chosen.end(), full.begin(), full.end());
    chosen.insert(chosen.end(), bckg.begin(), bckg.end());
    rng.shuffle(chosen);

    std::vector<LabeledWindow> out;
    out.reserve(chosen.size());
    for (size_t i : chosen) out.push_back(windows[i]);
    return out;
}

}  // namespace useg
