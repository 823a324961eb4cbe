#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "useg/infer.hpp"
#include "useg/recording.hpp"

namespace useg {

struct ScoreReport {
    std::string scale;  // "sample" or "event"
    size_t tp = 0, fp = 0, fn = 0;
    double f1 = 0.0, sensitivity = 0.0, precision = 0.0;
    bool sensitivity_defined = true;  // false when tp+fn == 0
    bool precision_defined = true;    // false when tp+fp == 0

    static ScoreReport from_counts(std::string scale, size_t tp, size_t fp, size_t fn) {
        ScoreReport r;
        r.scale = std::move(scale);
        r.tp = tp;
        r.fp = fp;
        r.fn = fn;
        if (tp + fn > 0) {
            r.sensitivity = double(tp) / double(tp + fn);
        } else {
            r.sensitivity_defined = false;
        }
        if (tp + fp > 0) {
            r.precision = double(tp) / double(tp + fp);
        } else {
            r.precision_defined = false;
        }
        const double ps = r.precision + r.sensitivity;
        r.f1 = ps > 0.0 ? 2.0 * r.precision * r.sensitivity / ps : 0.0;
        return r;
    }
};

// Matching tolerances for event-based scoring.
struct ToleranceConfig {
    double pre_ictal_s = 30.0;   // prediction may start this early
    double post_ictal_s = 60.0;  // prediction may end this late
    double merge_gap_s = 90.0;   // events closer than this merge (= pre + post)
    double max_event_s = 300.0;  // longer events are split
    // minimum overlap: any overlap, however brief
};

// ---------------------------------------------------------------------------
// 1 Hz resampling of masks and probabilities
// ---------------------------------------------------------------------------

namespace detail {
inline std::pair<size_t, size_t> second_span(size_t second, double fs, size_t length) {
    const auto a = static_cast<size_t>(std::ceil(double(second) * fs - 1e-9));
    const auto b = static_cast<size_t>(std::ceil(double(second + 1) * fs - 1e-9));
    return {std::min(a, length), std::min(b, length)};
}
}  // namespace detail

// A second is an event second iff strictly more than half of its samples are
// event samples; a trailing partial second uses its contained samples.
inline Mask mask_to_1hz(const Mask& mask, double fs) {
    if (fs < 1.0) throw DataError("mask_to_1hz: fs must be >= 1");
    const size_t seconds = static_cast<size_t>(std::ceil(double(mask.size()) / fs - 1e-9));
    Mask out(seconds, 0);
    for (size_t s = 0; s < seconds; ++s) {
        const auto [a, b] = detail::second_span(s, fs, mask.size());
        size_t active = 0;
        for (size_t i = a; i < b; ++i) active += mask[i] ? 1 : 0;
        out[s] = (2 * active > (b - a)) ? 1 : 0;
    }
    return out;
}

// Per-second mean probability, for threshold-free scoring.
inline std::vector<float> probs_to_1hz(const ProbSequence& p) {
    if (p.fs < 1.0) throw DataError("probs_to_1hz: fs must be >= 1");
    const size_t seconds = static_cast<size_t>(std::ceil(double(p.values.size()) / p.fs - 1e-9));
    std::vector<float> out(seconds, 0.0f);
    for (size_t s = 0; s < seconds; ++s) {
        const auto [a, b] = detail::second_span(s, p.fs, p.values.size());
        double acc = 0.0;
        for (size_t i = a; i < b; ++i) acc += double(p.values[i]);
        out[s] = b > a ? float(acc / double(b - a)) : 0.0f;
    }
    return out;
}

// ---------------------------------------------------------------------------
// sample-based (1 Hz) scoring
// ---------------------------------------------------------------------------

struct ConfusionCounts {
    size_t tp = 0, fp = 0, fn = 0, tn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

inline ConfusionCounts sample_confusion(const Mask& ref_1hz, const Mask& hyp_1hz) {
    if (ref_1hz.size() != hyp_1hz.size())
        throw DataError("sample_score: reference has " + std::to_string(ref_1hz.size()) +
                        " seconds, hypothesis " + std::to_string(hyp_1hz.size()));
    ConfusionCounts c;
    for (size_t i = 0; i < ref_1hz.size(); ++i) {
        const bool r = ref_1hz[i] != 0, h = hyp_1hz[i] != 0;
        if (r && h)
            ++c.tp;
        else if (!r && h)
            ++c.fp;
        else if (r && !h)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

inline ScoreReport sample_score(const Mask& ref_1hz, const Mask& hyp_1hz) {
    const ConfusionCounts c = sample_confusion(ref_1hz, hyp_1hz);
    return ScoreReport::from_counts("sample", c.tp, c.fp, c.fn);
}

// ---------------------------------------------------------------------------
// event-based scoring
// ---------------------------------------------------------------------------

// Merge events separated by less than merge_gap_s, then split events longer
// than max_event_s into consecutive chunks. Idempotent.
inline EventList canonicalize_events(const EventList& list, const ToleranceConfig& tol) {
    list.validate();
    std::vector<Event> merged;
    for (const auto& e : list.events) {
        if (!merged.empty() && e.onset_s - merged.back().offset_s() < tol.merge_gap_s) {
            Event& m = merged.back();
            m.duration_s = std::max(m.offset_s(), e.offset_s()) - m.onset_s;
        } else {
            merged.push_back(e);
        }
    }
    EventList out;
    for (const auto& e : merged) {
        double remaining = e.duration_s;
        double onset = e.onset_s;
        while (remaining > tol.max_event_s) {
            out.events.push_back({onset, tol.max_event_s, e.label});
            onset += tol.max_event_s;
            remaining -= tol.max_event_s;
        }
        out.events.push_back({onset, remaining, e.label});
    }
    out.validate();
    return out;
}

// A reference extended by [-pre, +post] that overlaps any hypothesis (by any
// positive duration) is a TP; unmatched references are FN; hypotheses that
// overlap no extended reference are FP. Inputs are expected canonicalized.
inline ScoreReport event_score(const EventList& ref, const EventList& hyp,
                               const ToleranceConfig& tol) {
    size_t tp = 0, fn = 0;
    std::vector<bool> hyp_hit(hyp.size(), false);
    size_t start = 0;  // sorted sweep over hypotheses
    for (const auto& r : ref.events) {
        const double lo = r.onset_s - tol.pre_ictal_s;
        const double hi = r.offset_s() + tol.post_ictal_s;
        bool matched = false;
        while (start < hyp.size() && hyp.events[start].offset_s() <= lo) ++start;
        for (size_t j = start; j < hyp.size() && hyp.events[j].onset_s < hi; ++j) {
            if (hyp.events[j].offset_s() > lo) {
                matched = true;
                hyp_hit[j] = true;
            }
        }
        matched ? ++tp : ++fn;
    }
    size_t fp = 0;
    for (bool hit : hyp_hit)
        if (!hit) ++fp;
    return ScoreReport::from_counts("event", tp, fp, fn);
}

// ---------------------------------------------------------------------------
// AUROC (rank-based, midrank tie handling)
// ---------------------------------------------------------------------------

inline std::optional<double> auroc(const Mask& ref_1hz, const std::vector<float>& scores_1hz) {
    if (ref_1hz.size() != scores_1hz.size()) throw DataError("auroc: length mismatch");
    const size_t n = ref_1hz.size();
    size_t n_pos = 0;
    for (uint8_t v : ref_1hz) n_pos += v ? 1 : 0;
    const size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores_1hz[a] < scores_1hz[b]; });

    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores_1hz[order[j]] == scores_1hz[order[i]]) ++j;
        const double midrank = 0.5 * double(i + 1 + j);  // 1-based average rank of the tie block
        for (size_t k = i; k < j; ++k)
            if (ref_1hz[order[k]]) pos_rank_sum += midrank;
        i = j;
    }
    const double u = pos_rank_sum - double(n_pos) * double(n_pos + 1) / 2.0;
    return u / (double(n_pos) * double(n_neg));
}

// ---------------------------------------------------------------------------
// window-task metrics
// ---------------------------------------------------------------------------

struct WindowMetrics {
    double balanced_accuracy = 0.0;
    double cohen_kappa = 0.0;
    double weighted_f1 = 0.0;
};

inline WindowMetrics window_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                    size_t num_classes) {
    if (y_true.empty() || y_true.size() != y_pred.size())
        throw DataError("window_metrics: empty input or length mismatch");
    const size_t n = y_true.size();
    std::vector<std::vector<size_t>> m(num_classes, std::vector<size_t>(num_classes, 0));
    for (size_t i = 0; i < n; ++i) {
        if (y_true[i] < 0 || size_t(y_true[i]) >= num_classes || y_pred[i] < 0 ||
            size_t(y_pred[i]) >= num_classes)
            throw DataError("window_metrics: label out of range");
        ++m[size_t(y_true[i])][size_t(y_pred[i])];
    }

    WindowMetrics out;
    // balanced accuracy: mean recall over classes with support
    double recall_sum = 0.0;
    size_t supported = 0;
    for (size_t c = 0; c < num_classes; ++c) {
        const size_t support = std::accumulate(m[c].begin(), m[c].end(), size_t{0});
        if (support == 0) continue;
        ++supported;
        recall_sum += double(m[c][c]) / double(support);
    }
    out.balanced_accuracy = supported ? recall_sum / double(supported) : 0.0;

    // Cohen's kappa with marginal-product expected agreement
    double p_o = 0.0, p_e = 0.0;
    for (size_t c = 0; c < num_classes; ++c) {
        p_o += double(m[c][c]) / double(n);
        size_t row = 0, col = 0;
        for (size_t j = 0; j < num_classes; ++j) {
            row += m[c][j];
            col += m[j][c];
        }
        p_e += (double(row) / double(n)) * (double(col) / double(n));
    }
    out.cohen_kappa = (1.0 - p_e) > 1e-12 ? (p_o - p_e) / (1.0 - p_e) : (p_o >= 1.0 - 1e-12 ? 1.0 : 0.0);

    // support-weighted mean of per-class F1
    double wf1 = 0.0;
    for (size_t c = 0; c < num_classes; ++c) {
        size_t row = 0, col = 0;
        for (size_t j = 0; j < num_classes; ++j) {
            row += m[c][j];
            col += m[j][c];
        }
        if (row == 0) continue;
        const double prec = col ? double(m[c][c]) / double(col) : 0.0;
        const double rec = double(m[c][c]) / double(row);
        const double f1 = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        wf1 += f1 * double(row) / double(n);
    }
    out.weighted_f1 = wf1;
    return out;
}

}  // namespace useg
