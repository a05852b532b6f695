#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "dstf/prep.hpp"
#include "dstf/recording.hpp"
#include "dstf/rng.hpp"
#include "dstf/spectral.hpp"

using namespace dstf;

namespace {

constexpr double kPi = 3.14159265358979323846;

double dtft_magnitude(const std::vector<double>& h, double freq_hz, double rate) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t n = 0; n < h.size(); ++n) {
        double phase = -2.0 * kPi * freq_hz * double(n) / rate;
        acc += h[n] * std::complex<double>(std::cos(phase), std::sin(phase));
    }
    return std::abs(acc);
}

Recording two_channel_recording(std::size_t n, double rate) {
    Recording rec;
    rec.id = "prep-fixture";
    rec.channels = {"F3-M2", "F4-M1"};
    rec.sample_rate = rate;
    rec.data.assign(2, std::vector<float>(n));
    for (std::size_t i = 0; i < n; ++i) {
        rec.data[0][i] = static_cast<float>(i);
        rec.data[1][i] = static_cast<float>(std::sin(0.01 * double(i)));
    }
    return rec;
}

}  // namespace

TEST_CASE("lowpass design: symmetric taps with unit DC gain") {
    for (std::size_t order : {3ul, 11ul, 101ul, 257ul}) {
        auto h = design_lowpass(30.0, order, 200.0);
        REQUIRE(h.size() == order);
        for (std::size_t i = 0; i < order; ++i) CHECK(h[i] == h[order - 1 - i]);
        double sum = 0.0;
        for (double v : h) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("lowpass design: default config passes 10 Hz and kills 60 Hz") {
    auto h = design_lowpass(30.0, 101, 200.0);
    double pass = dtft_magnitude(h, 10.0, 200.0);
    double stop = dtft_magnitude(h, 60.0, 200.0);
    CHECK(pass >= 0.99);
    CHECK(pass <= 1.01);
    CHECK(stop < 0.05);
}

TEST_CASE("lowpass design rejects invalid parameters") {
    CHECK_THROWS_AS(design_lowpass(0.0, 101, 200.0), std::invalid_argument);
    CHECK_THROWS_AS(design_lowpass(100.0, 101, 200.0), std::invalid_argument);  // >= Nyquist
    CHECK_THROWS_AS(design_lowpass(30.0, 100, 200.0), std::invalid_argument);   // even
    CHECK_THROWS_AS(design_lowpass(30.0, 1, 200.0), std::invalid_argument);     // too short
}

TEST_CASE("zero-phase filter: DC gain, impulse response, alignment") {
    auto h = design_lowpass(30.0, 101, 200.0);

    SUBCASE("constant in, same constant out") {
        std::vector<double> x(500, 3.25);
        auto y = filter_zero_phase(x, h);
        REQUIRE(y.size() == x.size());
        for (double v : y) CHECK(v == doctest::Approx(3.25).epsilon(1e-12));
    }
    SUBCASE("impulse comes back as the centered tap sequence") {
        std::vector<double> x(501, 0.0);
        x[250] = 1.0;
        auto y = filter_zero_phase(x, h);
        for (std::size_t d = 0; d <= 50; ++d) {
            CHECK(y[250 + d] == h[50 + d]);
            CHECK(y[250 - d] == h[50 - d]);
        }
        CHECK(y[250 + 51] == 0.0);
        CHECK(y[150] == 0.0);
    }
    SUBCASE("signal shorter than half the order is rejected") {
        std::vector<double> x(50, 1.0);
        CHECK_THROWS_AS(filter_zero_phase(x, h), std::invalid_argument);
    }
}

TEST_CASE("zero-phase filter is linear") {
    auto h = design_lowpass(30.0, 101, 200.0);
    Rng rng(11);
    std::vector<double> x(400), y(400), mix(400);
    const double a = 1.7, b = -0.4;
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = rng.normal();
        y[i] = rng.normal();
        mix[i] = a * x[i] + b * y[i];
    }
    auto fx = filter_zero_phase(x, h);
    auto fy = filter_zero_phase(y, h);
    auto fmix = filter_zero_phase(mix, h);
    for (std::size_t i = 0; i < x.size(); ++i) {
        double want = a * fx[i] + b * fy[i];
        double scale = std::max(1.0, std::abs(want));
        CHECK(std::abs(fmix[i] - want) / scale <= 1e-9);
    }
}

TEST_CASE("filtering a mixed sinusoid wipes out the 60 Hz component") {
    const double rate = 200.0;
    const std::size_t n = 6000;  // 30 s
    Recording rec;
    rec.id = "mix";
    rec.channels = {"F3-M2"};
    rec.sample_rate = rate;
    rec.data.assign(1, std::vector<float>(n));
    for (std::size_t i = 0; i < n; ++i) {
        double t = double(i) / rate;
        rec.data[0][i] = static_cast<float>(std::sin(2.0 * kPi * 10.0 * t) +
                                            std::sin(2.0 * kPi * 60.0 * t));
    }
    auto coeffs = design_lowpass(30.0, 101, rate);
    Recording filtered = filter_signal(rec, coeffs);

    auto psd_of = [&](const Recording& r) {
        std::vector<std::vector<double>> ch(1);
        ch[0].assign(r.data[0].begin(), r.data[0].end());
        return welch_psd(ch, rate, WelchConfig{});
    };
    PsdEstimate before = psd_of(rec);
    PsdEstimate after = psd_of(filtered);
    // locate the 60 Hz peak bin on the unfiltered signal
    std::size_t peak = 0;
    for (std::size_t k = 0; k < before.freqs.size(); ++k)
        if (before.freqs[k] > 45.0 && before.power[0][k] > before.power[0][peak])
            peak = k;
    CHECK(before.freqs[peak] == doctest::Approx(60.0).epsilon(0.02));
    CHECK(after.power[0][peak] < 0.01 * before.power[0][peak]);
}

TEST_CASE("channel selection keeps order and names missing labels") {
    Recording rec = two_channel_recording(100, 200.0);

    SUBCASE("identity") {
        Recording same = select_channels(rec, {"F3-M2", "F4-M1"});
        CHECK(same.channels == rec.channels);
        CHECK(same.data == rec.data);
        CHECK(same.id == rec.id);
    }
    SUBCASE("subset") {
        Recording one = select_channels(rec, {"F4-M1"});
        REQUIRE(one.channels.size() == 1);
        CHECK(one.channels[0] == "F4-M1");
        CHECK(one.data[0] == rec.data[1]);
    }
    SUBCASE("reorder") {
        Recording swapped = select_channels(rec, {"F4-M1", "F3-M2"});
        CHECK(swapped.data[0] == rec.data[1]);
        CHECK(swapped.data[1] == rec.data[0]);
    }
    SUBCASE("missing label is named") {
        CHECK_THROWS_WITH_AS(select_channels(rec, {"X9"}), doctest::Contains("X9"),
                             std::invalid_argument);
    }
}

TEST_CASE("downsampling decimates and rescales annotations") {
    Recording rec = two_channel_recording(3000, 200.0);
    rec.stage_annotations = {{0, SleepStage::W}, {600, SleepStage::N2}};

    Recording down = downsample(rec, 100.0);
    CHECK(down.sample_rate == 100.0);
    REQUIRE(down.n_samples() == 1500);
    for (std::size_t i = 0; i < 1500; ++i) {
        CHECK(down.data[0][i] == rec.data[0][2 * i]);
        CHECK(down.data[1][i] == rec.data[1][2 * i]);
    }
    REQUIRE(down.stage_annotations.size() == 2);
    CHECK(down.stage_annotations[0].start_sample == 0);
    CHECK(down.stage_annotations[1].start_sample == 300);

    CHECK_THROWS_AS(downsample(rec, 150.0), std::invalid_argument);
}

TEST_CASE("window extraction: floor count, alignment, stage lookup") {
    SUBCASE("95 s at 100 Hz gives 3 windows at 0/3000/6000") {
        Recording rec = two_channel_recording(9500, 100.0);
        auto wins = extract_windows(rec, 30.0);
        REQUIRE(wins.size() == 3);
        CHECK(wins[0].start_sample == 0);
        CHECK(wins[1].start_sample == 3000);
        CHECK(wins[2].start_sample == 6000);
        CHECK(wins[0].n_times() == 3000);
        CHECK(wins[0].n_channels() == 2);
        CHECK(wins[1].recording_id == "prep-fixture");
        CHECK(!wins[0].stage.has_value());  // no annotations on this fixture
        // contents really are the slice
        for (std::size_t i = 0; i < 3000; ++i)
            CHECK(wins[1].data[0][i] == double(rec.data[0][3000 + i]));
    }
    SUBCASE("29 s recording is too short") {
        Recording rec = two_channel_recording(2900, 100.0);
        CHECK_THROWS_AS(extract_windows(rec, 30.0), std::invalid_argument);
    }
    SUBCASE("non-integer window length is rejected") {
        Recording rec = two_channel_recording(9500, 100.0);
        CHECK_THROWS_AS(extract_windows(rec, 0.305), std::invalid_argument);
    }
}

TEST_CASE("preprocessing keeps windows aligned with the original timeline") {
    SynthSpec spec;
    spec.n_recordings = 1;
    spec.duration_s = 300.0;
    spec.n_channels = 4;  // extra channels get dropped by keep_channels
    spec.stage_profile = default_stage_profile();
    spec.seed = 5;
    Recording rec = generate_synthetic(spec)[0];

    PrepConfig cfg;
    Recording prepped = preprocess(rec, cfg);
    CHECK(prepped.channels == std::vector<std::string>{"F3-M2", "F4-M1"});
    CHECK(prepped.sample_rate == 100.0);
    CHECK(prepped.n_samples() == rec.n_samples() / 2);

    auto wins = extract_windows(prepped, cfg.window_s);
    REQUIRE(wins.size() == 10);
    for (std::size_t w = 0; w < wins.size(); ++w) {
        CHECK(wins[w].start_sample == w * 3000);
        // epochs are 30 s and window k covers seconds [30k, 30(k+1)), so the
        // stage must match the source annotation exactly
        REQUIRE(wins[w].stage.has_value());
        CHECK(*wins[w].stage == rec.stage_annotations[w].stage);
    }
}

TEST_CASE("window normalization: zero mean, unit sd, idempotent, degenerate policy") {
    SUBCASE("simple channel") {
        Window w;
        w.data = {{1.0, 2.0, 3.0, 4.0}};
        Window n = normalize_window(w);
        double mean = (n.data[0][0] + n.data[0][1] + n.data[0][2] + n.data[0][3]) / 4.0;
        double var = 0.0;
        for (double v : n.data[0]) var += (v - mean) * (v - mean);
        var /= 4.0;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
        CHECK(!n.degenerate);
    }
    SUBCASE("idempotence") {
        Window w;
        w.data.resize(2);
        Rng rng(3);
        for (auto& ch : w.data) {
            ch.resize(3000);
            for (double& v : ch) v = 5.0 + 2.5 * rng.normal();
        }
        Window once = normalize_window(w);
        Window twice = normalize_window(once);
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t i = 0; i < 3000; ++i)
                CHECK(std::abs(twice.data[c][i] - once.data[c][i]) < 1e-9);
    }
    SUBCASE("population (not sample) standard deviation") {
        Window w;
        w.data = {{0.0, 1.0}};
        Window n = normalize_window(w);
        // mean 0.5, population sd 0.5 -> values exactly -1 and 1
        CHECK(n.data[0][0] == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(n.data[0][1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("constant channel becomes zeros and flags the window") {
        Window w;
        w.data = {{0.1, 0.1, 0.1, 0.1, 0.1}, {1.0, 2.0, 3.0, 4.0, 5.0}};
        Window n = normalize_window(w);
        CHECK(n.degenerate);
        for (double v : n.data[0]) CHECK(v == 0.0);
        // the healthy channel is still normalized
        double mean = 0.0;
        for (double v : n.data[1]) mean += v;
        CHECK(std::abs(mean / 5.0) < 1e-9);
    }
}
