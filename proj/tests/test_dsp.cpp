#include <catch2/catch_amalgamated.hpp>

#include "useg/dsp.hpp"
#include "useg/recording.hpp"
#include "useg/rng.hpp"

using namespace useg;

namespace {

std::vector<dsp::cplx> naive_dft(const std::vector<dsp::cplx>& x, bool inverse) {
    const size_t n = x.size();
    std::vector<dsp::cplx> out(n, dsp::cplx(0, 0));
    const double sign = inverse ? 1.0 : -1.0;
    for (size_t k = 0; k < n; ++k)
        for (size_t t = 0; t < n; ++t) {
            const double ang = sign * 2.0 * std::numbers::pi * double(k) * double(t) / double(n);
            out[k] += x[t] * dsp::cplx(std::cos(ang), std::sin(ang));
        }
    if (inverse)
        for (auto& v : out) v /= double(n);
    return out;
}

Recording sine_recording(double freq, double fs, double duration_s, size_t channels = 1) {
    Recording rec;
    rec.fs = fs;
    const size_t n = size_t(std::llround(duration_s * fs));
    rec.samples = Tensor({channels, n});
    for (size_t c = 0; c < channels; ++c) {
        rec.channels.push_back("ch" + std::to_string(c));
        for (size_t i = 0; i < n; ++i)
            rec.samples.at2(c, i) = float(std::sin(2.0 * std::numbers::pi * freq * double(i) / fs));
    }
    return rec;
}

// RMS over the central half, away from filter edge transients.
double central_rms(const Recording& rec, size_t channel = 0) {
    const size_t n = rec.num_samples();
    double acc = 0.0;
    size_t cnt = 0;
    for (size_t i = n / 4; i < 3 * n / 4; ++i, ++cnt) {
        const double v = rec.samples.at2(channel, i);
        acc += v * v;
    }
    return std::sqrt(acc / double(cnt));
}

}  // namespace

TEST_CASE("fft matches a naive dft for awkward sizes") {
    Rng rng(13);
    for (size_t n : {size_t{8}, size_t{12}, size_t{17}, size_t{30}, size_t{100}}) {
        std::vector<dsp::cplx> x(n);
        for (auto& v : x) v = dsp::cplx(rng.normal(), rng.normal());
        auto got = x;
        dsp::fft(got, false);
        const auto want = naive_dft(x, false);
        for (size_t k = 0; k < n; ++k) {
            REQUIRE(got[k].real() == Catch::Approx(want[k].real()).margin(1e-9));
            REQUIRE(got[k].imag() == Catch::Approx(want[k].imag()).margin(1e-9));
        }
        dsp::fft(got, true);  // round trip
        for (size_t k = 0; k < n; ++k)
            REQUIRE(got[k].real() == Catch::Approx(x[k].real()).margin(1e-9));
    }
}

TEST_CASE("fourier resampling preserves a band-limited tone") {
    Recording rec = sine_recording(5.0, 512.0, 2.0);
    Recording out = resample(rec, 256.0);
    REQUIRE(out.fs == 256.0);
    REQUIRE(out.num_samples() == 512);

    // compare against the analytic 5 Hz sine on the new grid
    double max_err = 0.0;
    for (size_t i = 0; i < out.num_samples(); ++i) {
        const double want = std::sin(2.0 * std::numbers::pi * 5.0 * double(i) / 256.0);
        max_err = std::max(max_err, std::fabs(double(out.samples.at2(0, i)) - want));
    }
    REQUIRE(max_err < 0.01);

    // RMS (energy) preserved within 1%
    REQUIRE(central_rms(out) == Catch::Approx(central_rms(rec)).epsilon(0.01));
}

TEST_CASE("resample edge behavior") {
    Recording rec = sine_recording(3.0, 512.0, 10.0);
    SECTION("identity when rates match") {
        Recording out = resample(rec, 512.0);
        REQUIRE(out.samples.vec() == rec.samples.vec());
    }
    SECTION("length arithmetic") {
        Recording out = resample(rec, 256.0);
        REQUIRE(out.num_samples() == 2560);
    }
    SECTION("upsampling round trips") {
        Recording up = resample(rec, 1024.0);
        REQUIRE(up.num_samples() == 10240);
        Recording back = resample(up, 512.0);
        double max_err = 0.0;
        for (size_t i = 0; i < rec.num_samples(); ++i)
            max_err = std::max(max_err,
                               std::fabs(double(back.samples.at2(0, i)) - double(rec.samples.at2(0, i))));
        REQUIRE(max_err < 1e-3);
    }
    SECTION("non-finite samples rejected") {
        rec.samples.at2(0, 5) = std::numeric_limits<float>::quiet_NaN();
        REQUIRE_THROWS_AS(resample(rec, 256.0), DataError);
    }
}

TEST_CASE("filter bank attenuates notched tones and passes mid-band") {
    const double fs = 256.0;
    const std::vector<double> notches = {1.0, 60.0};

    SECTION("60 Hz mains tone is crushed") {
        Recording rec = sine_recording(60.0, fs, 8.0);
        Recording out = filter_bank(rec, 0.5, 100.0, notches);
        REQUIRE(central_rms(out) <= 0.1 * central_rms(rec));
    }
    SECTION("10 Hz content passes within 12%") {
        Recording rec = sine_recording(10.0, fs, 8.0);
        Recording out = filter_bank(rec, 0.5, 100.0, notches);
        REQUIRE(central_rms(out) == Catch::Approx(central_rms(rec)).epsilon(0.12));
    }
    SECTION("passband ripple within 1 dB across the mid-band") {
        for (double f : {8.0, 20.0, 35.0, 50.0, 80.0}) {
            Recording rec = sine_recording(f, fs, 8.0);
            Recording out = filter_bank(rec, 0.5, 100.0, notches);
            const double gain_db = 20.0 * std::log10(central_rms(out) / central_rms(rec));
            REQUIRE(std::fabs(gain_db) <= 1.0);
        }
    }
    SECTION("notch attenuation of at least 20 dB") {
        Recording rec = sine_recording(60.0, fs, 8.0);
        Recording out = filter_bank(rec, 0.5, 100.0, notches);
        const double gain_db = 20.0 * std::log10(central_rms(out) / central_rms(rec));
        REQUIRE(gain_db <= -20.0);
    }
    SECTION("zero signal stays zero") {
        Recording rec = sine_recording(10.0, fs, 2.0);
        rec.samples.fill(0.0f);
        Recording out = filter_bank(rec, 0.5, 100.0, notches);
        for (size_t i = 0; i < out.num_samples(); ++i)
            REQUIRE(out.samples.at2(0, i) == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("band outside Nyquist rejected") {
        Recording rec = sine_recording(10.0, fs, 2.0);
        REQUIRE_THROWS_AS(filter_bank(rec, 0.5, 128.0, {}), DataError);
        REQUIRE_THROWS_AS(filter_bank(rec, 0.0, 100.0, {}), DataError);
        REQUIRE_THROWS_AS(filter_bank(rec, 0.5, 100.0, {130.0}), DataError);
    }
}

TEST_CASE("channel normalization") {
    Recording rec;
    rec.fs = 10.0;
    rec.channels = {"a", "b"};
    rec.samples = Tensor({2, 3}, {1, 2, 3, 7, 7, 7});

    std::vector<std::string> warnings;
    auto old_sink = warn_sink();
    warn_sink() = [&](const std::string& m) { warnings.push_back(m); };

    Recording out = normalize_channels(rec);
    REQUIRE(out.samples.at2(0, 0) == Catch::Approx(-1.0).margin(1e-6));
    REQUIRE(out.samples.at2(0, 1) == Catch::Approx(0.0).margin(1e-6));
    REQUIRE(out.samples.at2(0, 2) == Catch::Approx(1.0).margin(1e-6));

    // constant channel zeroed with a warning
    for (size_t i = 0; i < 3; ++i) REQUIRE(out.samples.at2(1, i) == 0.0f);
    REQUIRE(warnings.size() == 1);

    // idempotence on the normalized channel
    Recording again = normalize_channels(out);
    for (size_t i = 0; i < 3; ++i)
        REQUIRE(again.samples.at2(0, i) == Catch::Approx(out.samples.at2(0, i)).margin(1e-5));

    warn_sink() = old_sink;
}

TEST_CASE("gaussian-normalized random channel has unit sample sd") {
    Rng rng(3);
    Recording rec;
    rec.fs = 100.0;
    rec.channels = {"x"};
    rec.samples = Tensor({1, 4096});
    for (size_t i = 0; i < 4096; ++i) rec.samples.at2(0, i) = float(rng.normal() * 3.0 + 1.5);
    Recording out = normalize_channels(rec);
    double mean = 0.0;
    for (size_t i = 0; i < 4096; ++i) mean += out.samples.at2(0, i);
    mean /= 4096.0;
    double ss = 0.0;
    for (size_t i = 0; i < 4096; ++i) {
        const double d = out.samples.at2(0, i) - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / 4095.0);
    REQUIRE(mean == Catch::Approx(0.0).margin(1e-5));
    REQUIRE(sd == Catch::Approx(1.0).margin(1e-4));
}
