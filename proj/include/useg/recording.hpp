#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "useg/dsp.hpp"
#include "useg/tensor.hpp"

namespace useg {

namespace fs = std::filesystem;

// Multi-channel sampled signal; the unit of ingestion and inference.
struct Recording {
    std::vector<std::string> channels;
    double fs = 0.0;
    Tensor samples;  // [K, L], channel-major

    size_t num_channels() const { return samples.rank() == 2 ? samples.dim(0) : 0; }
    size_t num_samples() const { return samples.rank() == 2 ? samples.dim(1) : 0; }
    double duration_s() const { return double(num_samples()) / fs; }

    void validate() const {
        if (fs <= 0.0) throw DataError("recording: sampling frequency must be positive");
        if (samples.rank() != 2 || num_samples() < 1) throw DataError("recording: empty sample array");
        if (channels.size() != num_channels())
            throw DataError("recording: channel name count " + std::to_string(channels.size()) +
                            " != channel rows " + std::to_string(num_channels()));
    }
};

// One annotated interval, in seconds.
struct Event {
    double onset_s = 0.0;
    double duration_s = 0.0;
    std::string label = "sz";

    double offset_s() const { return onset_s + duration_s; }
};

// Sorted, disjoint intervals.
struct EventList {
    std::vector<Event> events;

    size_t size() const { return events.size(); }
    bool empty() const { return events.empty(); }
    auto begin() const { return events.begin(); }
    auto end() const { return events.end(); }

    void validate() const {
        double prev_end = -1.0;
        double prev_onset = -std::numeric_limits<double>::infinity();
        for (const auto& e : events) {
            if (e.duration_s <= 0.0) throw DataError("event list: non-positive duration");
            if (e.onset_s <= prev_onset) throw DataError("event list: onsets not strictly increasing");
            if (e.onset_s < prev_end) throw DataError("event list: overlapping intervals");
            prev_onset = e.onset_s;
            prev_end = e.offset_s();
        }
    }
};

// ---------------------------------------------------------------------------
// on-disk container: <dir>/meta.json + <dir>/data.bin (little-endian float32)
// ---------------------------------------------------------------------------

inline void save_recording(const Recording& rec, const fs::path& dir) {
    rec.validate();
    fs::create_directories(dir);
    nlohmann::json meta;
    meta["channels"] = rec.channels;
    meta["fs"] = rec.fs;
    meta["num_samples"] = rec.num_samples();
    meta["dtype"] = "f32le";
    std::ofstream mf(dir / "meta.json");
    if (!mf) throw DataError("cannot write " + (dir / "meta.json").string());
    mf << meta.dump(2) << "\n";

    std::ofstream df(dir / "data.bin", std::ios::binary);
    if (!df) throw DataError("cannot write " + (dir / "data.bin").string());
    df.write(reinterpret_cast<const char*>(rec.samples.data()),
             std::streamsize(rec.samples.numel() * sizeof(float)));
}

inline Recording load_recording(const fs::path& dir) {
    std::ifstream mf(dir / "meta.json");
    if (!mf) throw DataError("cannot read " + (dir / "meta.json").string());
    nlohmann::json meta = nlohmann::json::parse(mf);
    if (meta.value("dtype", "f32le") != "f32le")
        throw DataError("recording " + dir.string() + ": unsupported dtype");

    Recording rec;
    rec.channels = meta.at("channels").get<std::vector<std::string>>();
    rec.fs = meta.at("fs").get<double>();
    const size_t n = meta.at("num_samples").get<size_t>();
    const size_t k = rec.channels.size();

    rec.samples = Tensor({k, n});
    std::ifstream df(dir / "data.bin", std::ios::binary);
    if (!df) throw DataError("cannot read " + (dir / "data.bin").string());
    df.read(reinterpret_cast<char*>(rec.samples.data()), std::streamsize(k * n * sizeof(float)));
    if (df.gcount() != std::streamsize(k * n * sizeof(float)))
        throw DataError("recording " + dir.string() + ": data.bin truncated");
    rec.validate();
    return rec;
}

// ---------------------------------------------------------------------------
// annotation TSV: onset <tab> duration <tab> eventType, seconds with two
// decimals, one row per event
// ---------------------------------------------------------------------------

inline std::string events_to_tsv(const EventList& list) {
    std::string out = "onset\tduration\teventType\n";
    char buf[96];
    for (const auto& e : list.events) {
        std::snprintf(buf, sizeof(buf), "%.2f\t%.2f\t%s\n", e.onset_s, e.duration_s, e.label.c_str());
        out += buf;
    }
    return out;
}

inline void save_events_tsv(const EventList& list, const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << events_to_tsv(list);
}

inline EventList parse_events_tsv(const std::string& text, const std::string& origin = "tsv") {
    EventList out;
    size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line != "onset\tduration\teventType")
                throw DataError(origin + ": bad TSV header '" + line + "'");
            continue;
        }
        Event e;
        char label[64] = {0};
        if (std::sscanf(line.c_str(), "%lf\t%lf\t%63s", &e.onset_s, &e.duration_s, label) != 3)
            throw DataError(origin + ": bad TSV row '" + line + "'");
        e.label = label;
        out.events.push_back(e);
    }
    out.validate();
    return out;
}

inline EventList load_events_tsv(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read " + path.string());
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_events_tsv(text, path.string());
}

// ---------------------------------------------------------------------------
// preprocessing
// ---------------------------------------------------------------------------

// Fourier-method resampling to a new rate; duration is preserved.
inline Recording resample(const Recording& rec, double target_fs) {
    rec.validate();
    if (target_fs <= 0.0) throw DataError("resample: target rate must be positive");
    if (!rec.samples.all_finite()) throw DataError("resample: non-finite samples");
    if (target_fs == rec.fs) return rec;

    const size_t k = rec.num_channels(), n = rec.num_samples();
    const size_t m = static_cast<size_t>(std::llround(double(n) * target_fs / rec.fs));
    Recording out;
    out.channels = rec.channels;
    out.fs = target_fs;
    out.samples = Tensor({k, m});
    std::vector<double> ch(n);
    for (size_t c = 0; c < k; ++c) {
        for (size_t i = 0; i < n; ++i) ch[i] = rec.samples.at2(c, i);
        const std::vector<double> res = dsp::resample_fourier(ch, m);
        for (size_t i = 0; i < m; ++i) out.samples.at2(c, i) = float(res[i]);
    }
    return out;
}

// Band-pass (4th-order Butterworth edges) plus notch biquads (Q = 30), all
// applied forward-backward for zero phase.
inline Recording filter_bank(const Recording& rec, double band_lo, double band_hi,
                             const std::vector<double>& notches) {
    rec.validate();
    const double nyq = rec.fs / 2.0;
    if (!(band_lo > 0.0 && band_lo < band_hi && band_hi < nyq))
        throw DataError("filter_bank: band (" + std::to_string(band_lo) + ", " +
                        std::to_string(band_hi) + ") must satisfy 0 < lo < hi < fs/2");
    for (double f : notches)
        if (f <= 0.0 || f >= nyq) throw DataError("filter_bank: notch outside (0, fs/2)");

    std::vector<dsp::Biquad> sos = dsp::butterworth4_highpass(band_lo, rec.fs);
    for (const auto& b : dsp::butterworth4_lowpass(band_hi, rec.fs)) sos.push_back(b);
    for (double f : notches) sos.push_back(dsp::biquad_notch(f, rec.fs, 30.0));

    const size_t k = rec.num_channels(), n = rec.num_samples();
    const size_t padlen = static_cast<size_t>(3.0 * rec.fs);
    Recording out = rec;
    std::vector<double> ch(n);
    for (size_t c = 0; c < k; ++c) {
        for (size_t i = 0; i < n; ++i) ch[i] = rec.samples.at2(c, i);
        const std::vector<double> y = dsp::filtfilt(sos, ch, padlen);
        for (size_t i = 0; i < n; ++i) out.samples.at2(c, i) = float(y[i]);
    }
    return out;
}

// Per-channel Gaussian normalization: mean 0, sample standard deviation 1
// (denominator L-1). Constant channels are zeroed with a warning.
inline Recording normalize_channels(const Recording& rec) {
    rec.validate();
    const size_t k = rec.num_channels(), n = rec.num_samples();
    if (n < 2) throw DataError("normalize_channels: at least two samples required");
    Recording out = rec;
    for (size_t c = 0; c < k; ++c) {
        double mean = 0.0;
        for (size_t i = 0; i < n; ++i) mean += rec.samples.at2(c, i);
        mean /= double(n);
        double ss = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double d = rec.samples.at2(c, i) - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / double(n - 1));
        if (sd < 1e-8) {
            warn("normalize_channels: channel " +
                 (c < rec.channels.size() ? rec.channels[c] : std::to_string(c)) +
                 " has zero variance; output zeroed");
            for (size_t i = 0; i < n; ++i) out.samples.at2(c, i) = 0.0f;
        } else {
            for (size_t i = 0; i < n; ++i)
                out.samples.at2(c, i) = float((rec.samples.at2(c, i) - mean) / sd);
        }
    }
    return out;
}

}  // namespace useg
