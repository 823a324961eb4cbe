#include <catch2/catch_amalgamated.hpp>

#include "useg/infer.hpp"
#include "useg/model.hpp"

using namespace useg;

namespace {

ModelConfig micro_config() {
    ModelConfig cfg;
    cfg.in_channels = 1;
    cfg.window_samples = 16;
    cfg.encoder_blocks = {{4, 3}};
    cfg.rescnn_kernels = {3};
    cfg.d_model = 4;
    cfg.num_heads = 2;
    cfg.dim_ff = 8;
    cfg.num_tx_layers = 1;
    cfg.decoder_blocks = {{4, 3}};
    cfg.head = HeadType::timestep;
    cfg.num_classes = 1;
    cfg.dropout_rate = 0.0;
    return cfg;
}

Recording noise_recording(double fs, size_t length, uint64_t seed = 1, size_t channels = 1) {
    Rng rng(seed);
    Recording rec;
    rec.fs = fs;
    rec.samples = Tensor({channels, length});
    for (size_t c = 0; c < channels; ++c) {
        rec.channels.push_back("ch" + std::to_string(c));
        for (size_t i = 0; i < length; ++i) rec.samples.at2(c, i) = float(rng.normal());
    }
    return rec;
}

// definition-level oracle on a padded axis
Mask oracle_erode(const Mask& x, size_t n) {
    const long L = long(x.size());
    const long lo = -long(n / 2), hi = long(n - 1) - long(n / 2);
    Mask out(x.size(), 0);
    for (long i = 0; i < L; ++i) {
        bool all = true;
        for (long b = lo; b <= hi; ++b) {
            const long j = i + b;
            if (j < 0 || j >= L || !x[size_t(j)]) {
                all = false;
                break;
            }
        }
        out[size_t(i)] = all ? 1 : 0;
    }
    return out;
}

Mask oracle_dilate(const Mask& x, size_t n) {
    const long L = long(x.size());
    const long lo = -long(n / 2), hi = long(n - 1) - long(n / 2);
    Mask out(x.size(), 0);
    for (long i = 0; i < L; ++i) {
        bool any = false;
        for (long b = lo; b <= hi; ++b) {
            const long j = i - b;
            if (j >= 0 && j < L && x[size_t(j)]) {
                any = true;
                break;
            }
        }
        out[size_t(i)] = any ? 1 : 0;
    }
    return out;
}

Mask oracle_opening(const Mask& x, size_t n) { return oracle_dilate(oracle_erode(x, n), n); }

Mask oracle_closing(const Mask& x, size_t n) {
    Mask padded(x.size() + 2 * n, 0);
    std::copy(x.begin(), x.end(), padded.begin() + long(n));
    Mask closed = oracle_erode(oracle_dilate(padded, n), n);
    return Mask(closed.begin() + long(n), closed.begin() + long(n + x.size()));
}

bool subset(const Mask& a, const Mask& b) {  // a ⊆ b
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] && !b[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("inference plan invocation counts") {
    InferencePlan plan = InferencePlan::make(16.0, 1.0, 0.0);
    REQUIRE(plan.window_samples == 16);
    REQUIRE(plan.seq_invocations(48) == 3);
    REQUIRE(plan.seq_invocations(40) == 3);   // 2.5 windows -> 3 with padding
    REQUIRE(plan.seq_invocations(96) == 2 * plan.seq_invocations(48));

    REQUIRE_THROWS_AS(InferencePlan::make(16.0, 1.0, 1.0), ConfigError);

    InferencePlan sliding = InferencePlan::make(16.0, 1.0, 0.75);
    REQUIRE(sliding.stride_samples == 4);
    REQUIRE(sliding.sliding_invocations(16 * 100) == (1600 - 16) / 4 + 1);
}

TEST_CASE("invocation ratio approaches 1/(1-r) for long recordings") {
    for (double r : {0.5, 0.75, 0.8}) {
        InferencePlan plan = InferencePlan::make(16.0, 4.0, r);
        const size_t L = 100 * plan.window_samples;
        const double ratio =
            double(plan.sliding_invocations(L)) / double(plan.seq_invocations(L));
        REQUIRE(ratio == Catch::Approx(1.0 / (1.0 - r)).epsilon(0.05));
    }
}

TEST_CASE("predict_mask concatenates and truncates window outputs") {
    auto model = build_model(micro_config(), 3);
    const size_t w = 16;

    SECTION("exact multiple of the window") {
        Recording rec = noise_recording(16.0, 3 * w);
        size_t invocations = 0;
        ProbSequence probs = predict_mask(model, rec, &invocations);
        REQUIRE(invocations == 3);
        REQUIRE(probs.values.size() == rec.num_samples());
        for (float p : probs.values) {
            REQUIRE(p >= 0.0f);
            REQUIRE(p <= 1.0f);
        }
    }
    SECTION("fractional tail is zero-padded then truncated") {
        Recording rec = noise_recording(16.0, size_t(2.5 * w));
        size_t invocations = 0;
        ProbSequence probs = predict_mask(model, rec, &invocations);
        REQUIRE(invocations == 3);
        REQUIRE(probs.values.size() == rec.num_samples());

        // last window output equals a manual forward of the zero-padded tail
        CtxT<float> ctx{nullptr, false, nullptr};
        Tensor x({1, w});
        for (size_t t = 0; t < w / 2; ++t) x.at2(0, t) = rec.samples.at2(0, 2 * w + t);
        Var<float> p = model.forward_seq(ctx, Var<float>::constant(x));
        for (size_t t = 0; t < w / 2; ++t)
            REQUIRE(probs.values[2 * w + t] == Catch::Approx(p.val()[t]).margin(1e-6));
    }
    SECTION("channel mismatch rejected") {
        Recording rec = noise_recording(16.0, 32, 1, 2);
        REQUIRE_THROWS_AS(predict_mask(model, rec), DataError);
    }
}

TEST_CASE("expand_window_preds follows the trailing-mean pseudocode") {
    InferencePlan plan = InferencePlan::make(4.0, 1.0, 0.75);  // w_s=4, s_s=1, n_trail=4
    const size_t L = 16;

    SECTION("all-ones scores fill the covered span") {
        std::vector<float> scores(13, 1.0f);
        Mask mask = expand_window_preds(scores, plan, 0.5, L);
        for (size_t t = 0; t < 4; ++t) REQUIRE(mask[t] == 0);  // before first covered span
        for (size_t t = 4; t < std::min<size_t>(L, 13); ++t) REQUIRE(mask[t] == 1);
    }
    SECTION("alternating scores average to 0.5 and fail a 0.8 threshold") {
        std::vector<float> scores;
        for (int i = 0; i < 12; ++i) scores.push_back(i % 2 ? 0.0f : 1.0f);
        Mask mask = expand_window_preds(scores, plan, 0.8, L);
        for (uint8_t v : mask) REQUIRE(v == 0);
    }
    SECTION("trailing mean excludes the current window score") {
        std::vector<float> scores = {0, 0, 0, 0, 1, 1, 1, 1};
        Mask mask = expand_window_preds(scores, plan, 0.5, L);
        REQUIRE(mask[4] == 0);  // mean of scores[0..4) = 0
        REQUIRE(mask[5] == 0);  // mean of scores[1..5) = 0.25
        REQUIRE(mask[6] == 0);  // mean of scores[2..6) = 0.5, threshold is strict
        REQUIRE(mask[7] == 1);  // mean of scores[3..7) = 0.75
        for (size_t t = 8; t < L; ++t) REQUIRE(mask[t] == 0);  // no scores cover the tail
    }
}

TEST_CASE("threshold_mask is inclusive and monotone") {
    ProbSequence p;
    p.fs = 4.0;
    p.values = {0.8f, 0.8f, 0.8f};
    Mask m = threshold_mask(p, 0.8);
    REQUIRE(m == Mask{1, 1, 1});

    p.values = {0.1f, 0.9f};
    REQUIRE(threshold_mask(p, 0.5) == Mask{0, 1});

    Rng rng(7);
    p.values.resize(500);
    for (auto& v : p.values) v = float(rng.uniform());
    Mask low = threshold_mask(p, 0.3), high = threshold_mask(p, 0.7);
    REQUIRE(subset(high, low));

    REQUIRE_THROWS_AS(threshold_mask(p, 0.0), ConfigError);
    REQUIRE_THROWS_AS(threshold_mask(p, 1.0), ConfigError);
}

TEST_CASE("morphology spec cases") {
    SECTION("opening removes an isolated spike") {
        Mask m(11, 0);
        m[5] = 1;
        REQUIRE(morph::opening(m, 3) == Mask(11, 0));
    }
    SECTION("closing fills a one-sample gap") {
        Mask m = {0, 1, 1, 1, 0, 1, 1, 1, 0};
        Mask want = {0, 1, 1, 1, 1, 1, 1, 1, 0};
        REQUIRE(morph::closing(m, 3) == want);
    }
    SECTION("all zeros stay zero") {
        Mask m(16, 0);
        REQUIRE(morph_clean(m, PostConfig{}, 4.0) == m);
    }
}

TEST_CASE("morphology algebra against the definition oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t L = 20 + size_t(rng.below(60));
        const size_t n = 2 + size_t(rng.below(5));
        Mask m(L, 0);
        for (auto& v : m) v = rng.uniform() < 0.45 ? 1 : 0;

        const Mask open1 = morph::opening(m, n);
        const Mask close1 = morph::closing(m, n);
        REQUIRE(open1 == oracle_opening(m, n));
        REQUIRE(close1 == oracle_closing(m, n));

        REQUIRE(subset(open1, m));                       // anti-extensive
        REQUIRE(subset(m, close1));                      // extensive
        REQUIRE(morph::opening(open1, n) == open1);      // idempotent
        REQUIRE(morph::closing(close1, n) == close1);    // idempotent
    }
}

TEST_CASE("short events are removed strictly below the minimum duration") {
    PostConfig cfg;
    cfg.min_duration_s = 2.0;
    const double fs = 4.0;  // L_min = 8 samples

    Mask m(32, 0);
    for (size_t i = 2; i < 9; ++i) m[i] = 1;    // run of 7 < 8 -> removed
    for (size_t i = 16; i < 24; ++i) m[i] = 1;  // run of exactly 8 -> kept
    Mask out = remove_short_events(m, cfg, fs);
    for (size_t i = 2; i < 9; ++i) REQUIRE(out[i] == 0);
    for (size_t i = 16; i < 24; ++i) REQUIRE(out[i] == 1);

    SECTION("zero minimum duration is the identity") {
        cfg.min_duration_s = 0.0;
        REQUIRE(remove_short_events(m, cfg, fs) == m);
    }
    SECTION("sample arithmetic at 256 Hz") {
        cfg.min_duration_s = 2.0;
        Mask long_mask(1024, 0);
        for (size_t i = 100; i < 400; ++i) long_mask[i] = 1;  // 300 < 512
        Mask cleaned = remove_short_events(long_mask, cfg, 256.0);
        REQUIRE(cleaned == Mask(1024, 0));
    }
    SECTION("never creates ones") {
        REQUIRE(subset(out, m));
    }
}

TEST_CASE("mask and event conversions are exact inverses") {
    SECTION("hand case at 256 Hz") {
        Mask m(2048, 0);
        for (size_t i = 256; i < 512; ++i) m[i] = 1;
        for (size_t i = 1024; i < 1280; ++i) m[i] = 1;
        EventList list = mask_to_events(m, 256.0);
        REQUIRE(list.size() == 2);
        REQUIRE(list.events[0].onset_s == Catch::Approx(1.0));
        REQUIRE(list.events[0].duration_s == Catch::Approx(1.0));
        REQUIRE(list.events[1].onset_s == Catch::Approx(4.0));
        REQUIRE(list.events[1].duration_s == Catch::Approx(1.0));
    }
    SECTION("empty mask gives an empty list") {
        REQUIRE(mask_to_events(Mask(64, 0), 16.0).empty());
    }
    SECTION("round trip identity on random masks") {
        Rng rng(101);
        for (int trial = 0; trial < 1000; ++trial) {
            const size_t L = 10 + size_t(rng.below(200));
            const double fs = 1.0 + double(rng.below(100));
            Mask m(L, 0);
            for (auto& v : m) v = rng.uniform() < 0.35 ? 1 : 0;
            const EventList list = mask_to_events(m, fs);
            list.validate();
            REQUIRE(events_to_mask(list, fs, L) == m);
        }
    }
    SECTION("events beyond the end are clipped with a warning") {
        std::vector<std::string> warnings;
        auto old_sink = warn_sink();
        warn_sink() = [&](const std::string& m) { warnings.push_back(m); };
        EventList list;
        list.events = {{1.0, 10.0, "sz"}};
        Mask m = events_to_mask(list, 4.0, 16);  // recording ends at 4 s
        REQUIRE(warnings.size() == 1);
        for (size_t i = 4; i < 16; ++i) REQUIRE(m[i] == 1);
        warn_sink() = old_sink;
    }
}

TEST_CASE("thresholded masks keep the subset relation before morphology") {
    auto model = build_model(micro_config(), 9);
    Recording rec = noise_recording(16.0, 160);
    ProbSequence probs = predict_mask(model, rec);
    Mask prev = threshold_mask(probs, 0.2);
    for (double tau : {0.4, 0.6, 0.8, 0.9}) {
        Mask cur = threshold_mask(probs, tau);
        REQUIRE(subset(cur, prev));
        prev = cur;
    }
}
