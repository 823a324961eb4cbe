#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "useg/recording.hpp"
#include "useg/rng.hpp"

namespace useg {

// Synthetic EEG-like corpus generator: 1/f^slope background noise per channel
// with amplitude-modulated oscillation bursts superimposed on every channel.
struct SynthSpec {
    size_t channels = 2;
    double fs = 64.0;
    double duration_s = 600.0;
    double events_per_hour = 12.0;
    double event_min_s = 8.0;
    double event_max_s = 20.0;
    double event_freq_hz = 4.0;
    double amplitude_ratio = 4.0;  // burst amplitude relative to background RMS
    double noise_slope = 1.0;      // spectral exponent of the background
    uint64_t seed = 0;

    void validate() const {
        if (channels == 0) throw ConfigError("synth: channels must be positive");
        if (fs <= 0.0) throw ConfigError("synth: fs must be positive");
        if (duration_s <= 0.0) throw ConfigError("synth: duration must be positive");
        if (events_per_hour < 0.0) throw ConfigError("synth: event rate must be >= 0");
        if (event_min_s <= 0.0 || event_max_s < event_min_s)
            throw ConfigError("synth: bad event duration range");
        if (event_freq_hz <= 0.0 || event_freq_hz >= fs / 2.0)
            throw ConfigError("synth: event frequency must be below Nyquist");
        if (amplitude_ratio < 0.0) throw ConfigError("synth: amplitude ratio must be >= 0");
    }
};

namespace detail {

// Real noise with power spectrum ~ 1/f^slope, unit RMS.
inline std::vector<double> colored_noise(Rng& rng, size_t n, double slope) {
    std::vector<dsp::cplx> spec(n, dsp::cplx(0, 0));
    for (size_t k = 1; k <= n / 2; ++k) {
        const double mag = 1.0 / std::pow(double(k), slope / 2.0);
        const dsp::cplx v(rng.normal() * mag, rng.normal() * mag);
        spec[k] = v;
        if (k != n - k && n - k < n) spec[n - k] = std::conj(v);
    }
    if (n % 2 == 0) spec[n / 2] = dsp::cplx(spec[n / 2].real(), 0.0);
    dsp::fft(spec, true);
    std::vector<double> out(n);
    double rms = 0.0;
    for (size_t i = 0; i < n; ++i) {
        out[i] = spec[i].real();
        rms += out[i] * out[i];
    }
    rms = std::sqrt(rms / double(n));
    if (rms > 0)
        for (double& v : out) v /= rms;
    return out;
}

}  // namespace detail

// Deterministic per seed. The returned EventList is the exact ground truth.
inline std::pair<Recording, EventList> generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const size_t n = static_cast<size_t>(std::llround(spec.duration_s * spec.fs));

    // draw non-overlapping event intervals
    EventList truth;
    const double expected = spec.events_per_hour * spec.duration_s / 3600.0;
    const size_t count = rng.poisson(expected);
    std::vector<Event> placed;
    for (size_t i = 0; i < count; ++i) {
        for (int attempt = 0; attempt < 64; ++attempt) {
            Event e;
            e.duration_s = rng.uniform(spec.event_min_s, spec.event_max_s);
            if (e.duration_s >= spec.duration_s) continue;
            e.onset_s = rng.uniform(0.0, spec.duration_s - e.duration_s);
            bool clash = false;
            for (const auto& p : placed)
                if (e.onset_s < p.offset_s() + 1.0 && p.onset_s < e.offset_s() + 1.0) {
                    clash = true;
                    break;
                }
            if (!clash) {
                placed.push_back(e);
                break;
            }
        }
    }
    std::sort(placed.begin(), placed.end(),
              [](const Event& a, const Event& b) { return a.onset_s < b.onset_s; });
    truth.events = std::move(placed);
    truth.validate();

    Recording rec;
    rec.fs = spec.fs;
    rec.channels.reserve(spec.channels);
    for (size_t c = 0; c < spec.channels; ++c) rec.channels.push_back("ch" + std::to_string(c));
    rec.samples = Tensor({spec.channels, n});

    for (size_t c = 0; c < spec.channels; ++c) {
        const std::vector<double> noise = detail::colored_noise(rng, n, spec.noise_slope);
        for (size_t i = 0; i < n; ++i) rec.samples.at2(c, i) = float(noise[i]);
    }
    // burst = Hann-enveloped oscillation, added to all channels with a
    // channel-specific phase
    for (const auto& e : truth.events) {
        const size_t i0 = static_cast<size_t>(std::llround(e.onset_s * spec.fs));
        const size_t i1 = std::min(n, static_cast<size_t>(std::llround(e.offset_s() * spec.fs)));
        const size_t len = i1 - i0;
        if (len == 0) continue;
        for (size_t c = 0; c < spec.channels; ++c) {
            const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            for (size_t i = 0; i < len; ++i) {
                const double t = double(i0 + i) / spec.fs;
                const double env = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * double(i) /
                                                         double(std::max<size_t>(len - 1, 1))));
                rec.samples.at2(c, i0 + i) +=
                    float(spec.amplitude_ratio * env *
                          std::sin(2.0 * std::numbers::pi * spec.event_freq_hz * t + phase));
            }
        }
    }
    return {std::move(rec), std::move(truth)};
}

}  // namespace useg
