#include <algorithm>
#include <cmath>
#include <complex>

#include "doctest.h"
#include "helpers.hpp"
#include "naln/attribution.hpp"
#include "naln/errors.hpp"

using namespace naln;

namespace {

// O(N^2) reference transform straight from the definition
std::vector<double> oracle_power_two_sided(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<double> power(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            acc += x[i] * std::polar(1.0, -2.0 * M_PI * double(k) * double(i) / double(n));
        power[k] = std::norm(acc) / static_cast<double>(n);
    }
    return power;
}

EncoderConfig tiny_nice() {
    EncoderConfig cfg;
    cfg.family = EncoderFamily::nice_conv;
    cfg.input_channels = 4;
    cfg.input_samples = 16;
    cfg.embed_dim = 4;
    cfg.temporal_kernel = 5;
    cfg.temporal_filters = 2;
    cfg.spatial_filters = 3;
    cfg.pool_width = 3;
    cfg.seed = 11;
    return cfg;
}

AttributionMap map_from(std::vector<std::size_t> dims, const std::vector<double>& vals) {
    AttributionMap m;
    m.values = Tensor::from(std::move(dims), vals);
    return m;
}

}  // namespace

TEST_SUITE("attribution") {

TEST_CASE("default band layout") {
    BandSpec spec = BandSpec::eeg_default(125.0);
    REQUIRE(spec.bands.size() == 5);
    CHECK(spec.bands[0].name == "Delta");
    CHECK(spec.bands[2].lo_hz == 8.0);
    CHECK(spec.bands[2].hi_hz == 12.0);
    CHECK(spec.bands[4].hi_hz == 125.0);
    spec.validate(125.0);

    CHECK_THROWS_AS(BandSpec::eeg_default(25.0), ParameterError);

    BandSpec gap = spec;
    gap.bands[1].lo_hz = 5.0;
    CHECK_THROWS_AS(gap.validate(125.0), ParameterError);
    BandSpec short_spec = spec;
    short_spec.bands.back().hi_hz = 100.0;
    CHECK_THROWS_AS(short_spec.validate(125.0), ParameterError);
    BandSpec offset = spec;
    offset.bands[0].lo_hz = 0.5;
    CHECK_THROWS_AS(offset.validate(125.0), ParameterError);
}

TEST_CASE("periodogram of a constant is pure DC") {
    std::vector<double> x(16, 1.5);
    PSD psd = periodogram(x, 128.0);
    REQUIRE(psd.power.size() == 9);
    CHECK(psd.power[0] == doctest::Approx(16.0 * 1.5 * 1.5).epsilon(1e-12));
    for (std::size_t k = 1; k < psd.power.size(); ++k) CHECK(psd.power[k] < 1e-9);
    CHECK(psd.frequencies[1] == doctest::Approx(8.0));
    CHECK(psd.frequencies.back() == doctest::Approx(64.0));
}

TEST_CASE("sinusoid on an exact bin concentrates there") {
    const std::size_t n = 32;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * M_PI * 3.0 * double(i) / double(n));
    PSD psd = periodogram(x, 32.0);
    CHECK(psd.power[3] == doctest::Approx(double(n) / 2.0).epsilon(1e-9));
    for (std::size_t k = 0; k < psd.power.size(); ++k)
        if (k != 3) CHECK(psd.power[k] < 1e-9);
}

TEST_CASE("total one-sided power equals time-domain energy") {
    Rng rng(71);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.integer(80);  // mixes radix-2 and direct paths
        std::vector<double> x(n);
        for (double& v : x) v = rng.normal();
        PSD psd = periodogram(x, 100.0);
        double freq_sum = 0.0, time_sum = 0.0;
        for (double p : psd.power) {
            CHECK(p >= 0.0);
            freq_sum += p;
        }
        for (double v : x) time_sum += v * v;
        CHECK(freq_sum == doctest::Approx(time_sum).epsilon(1e-9));
    }
}

TEST_CASE("fast transform matches the direct definition") {
    Rng rng(73);
    std::vector<double> x(64);
    for (double& v : x) v = rng.normal();
    PSD psd = periodogram(x, 64.0);
    std::vector<double> ref = oracle_power_two_sided(x);
    for (std::size_t k = 0; k < psd.power.size(); ++k) {
        const bool shared = k == 0 || k == 32;
        const double expect = shared ? ref[k] : 2.0 * ref[k];
        CHECK(psd.power[k] == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK_THROWS_AS(periodogram({1.0}, 10.0), ParameterError);
    CHECK_THROWS_AS(periodogram({1.0, 2.0}, 0.0), ParameterError);
}

TEST_CASE("band fractions form a probability vector") {
    Rng rng(79);
    std::vector<double> x(250);
    for (double& v : x) v = rng.normal();
    PSD psd = periodogram(x, 250.0);
    auto fractions = band_energies(psd, BandSpec::eeg_default(125.0));
    REQUIRE(fractions.size() == 5);
    double total = 0.0;
    for (const auto& [name, f] : fractions) {
        CHECK(f >= 0.0);
        total += f;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("pure tones land in their bands") {
    const double fs = 250.0;
    const std::size_t n = 250;

    std::vector<double> alpha_tone(n);
    for (std::size_t i = 0; i < n; ++i)
        alpha_tone[i] = std::sin(2.0 * M_PI * 10.0 * double(i) / fs);
    auto fractions = band_energies(periodogram(alpha_tone, fs), BandSpec::eeg_default(fs / 2.0));
    CHECK(fractions[2].first == "Alpha");
    CHECK(fractions[2].second > 0.99);

    std::vector<double> dc(n, 0.7);
    auto dc_fractions = band_energies(periodogram(dc, fs), BandSpec::eeg_default(fs / 2.0));
    CHECK(dc_fractions[0].first == "Delta");
    CHECK(dc_fractions[0].second == doctest::Approx(1.0).epsilon(1e-12));

    // alternating signal sits exactly on the Nyquist bin, closed by Gamma
    std::vector<double> nyq(50);
    for (std::size_t i = 0; i < 50; ++i) nyq[i] = (i % 2 == 0) ? 1.0 : -1.0;
    auto nyq_fractions = band_energies(periodogram(nyq, fs), BandSpec::eeg_default(fs / 2.0));
    CHECK(nyq_fractions[4].first == "Gamma");
    CHECK(nyq_fractions[4].second == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> silent(n, 0.0);
    CHECK_THROWS_AS(band_energies(periodogram(silent, fs), BandSpec::eeg_default(fs / 2.0)),
                    DegenerateInputError);
}

TEST_CASE("sensitivity maps stay in bounds and replicate across channels") {
    EncoderConfig cfg = tiny_nice();
    EncoderParams params = init_params(cfg);
    Rng rng(83);
    Tensor epoch = testutil::random_tensor({4, 16}, rng);
    Tensor target = testutil::random_tensor({4}, rng);

    AttributionMap map = gradcam(params, epoch, target, 7);
    CHECK(map.values.dim(0) == 4);
    CHECK(map.values.dim(1) == 16);
    CHECK(map.epoch_id == 7);
    CHECK(map.source_layer == "projection_input");
    CHECK(!map.zero_gradient);
    for (double v : map.values.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    for (std::size_t t = 0; t < 16; ++t) {
        CHECK(map.values.at(0, t) == map.values.at(1, t));
        CHECK(map.values.at(0, t) == map.values.at(3, t));
    }
}

TEST_CASE("a linear projection places the peak on the strongest weight") {
    EncoderConfig cfg;
    cfg.family = EncoderFamily::nice_conv;
    cfg.input_channels = 3;
    cfg.input_samples = 16;
    cfg.embed_dim = 2;
    cfg.temporal_kernel = 1;
    cfg.temporal_filters = 1;
    cfg.spatial_filters = 1;
    cfg.pool_width = 1;
    cfg.seed = 5;
    EncoderParams params = init_params(cfg);

    // first output row has a unique strongest weight at time 11, second row is
    // flat so its gradient cannot disturb the profile
    Tensor proj_w = params.find("proj_w");
    REQUIRE(proj_w.dim(0) == 2);
    REQUIRE(proj_w.dim(1) == 16);
    for (std::size_t j = 0; j < 16; ++j) {
        proj_w.mutable_data()[0 * 16 + j] = (j % 3 == 0) ? -0.4 : 0.1 * double(j % 7);
        proj_w.mutable_data()[1 * 16 + j] = 0.0;
    }
    proj_w.mutable_data()[0 * 16 + 11] = 2.0;
    Tensor proj_b = params.find("proj_b");
    proj_b.mutable_data()[0] = 0.0;
    proj_b.mutable_data()[1] = 1.0;

    Rng rng(89);
    Tensor epoch = testutil::random_tensor({3, 16}, rng);
    Tensor target = Tensor::from({2}, {1.0, 0.0});

    AttributionMap map = gradcam(params, epoch, target);
    CHECK(!map.zero_gradient);
    CHECK(map.values.at(0, 11) == 1.0);
    for (std::size_t t = 0; t < 16; ++t)
        if (t != 11) CHECK(map.values.at(0, t) < 1.0);
    // clipped negative weights bottom out at zero
    CHECK(map.values.at(0, 0) == 0.0);
}

TEST_CASE("maps are invariant to positive rescaling of the target") {
    EncoderConfig cfg = tiny_nice();
    EncoderParams params = init_params(cfg);
    Rng rng(97);
    Tensor epoch = testutil::random_tensor({4, 16}, rng);
    Tensor target = testutil::random_tensor({4}, rng);
    AttributionMap base = gradcam(params, epoch, target);

    for (double factor : {2.0, 0.5, 1024.0}) {  // exactly representable scalings
        Tensor scaled = Tensor::zeros({4});
        for (std::size_t k = 0; k < 4; ++k) scaled.mutable_data()[k] = factor * target.at(k);
        AttributionMap again = gradcam(params, epoch, scaled);
        CHECK(again.values.data() == base.values.data());
    }
    Tensor odd = Tensor::zeros({4});
    for (std::size_t k = 0; k < 4; ++k) odd.mutable_data()[k] = 3.7 * target.at(k);
    AttributionMap near = gradcam(params, epoch, odd);
    for (std::size_t i = 0; i < base.values.size(); ++i)
        CHECK(near.values.data()[i] == doctest::Approx(base.values.data()[i]).epsilon(1e-9));
}

TEST_CASE("degenerate gradients yield a flagged all-zero map") {
    EncoderConfig cfg = tiny_nice();
    EncoderParams params = init_params(cfg);
    Tensor proj_w = params.find("proj_w");
    std::fill(proj_w.mutable_data().begin(), proj_w.mutable_data().end(), 0.0);
    Tensor proj_b = params.find("proj_b");
    for (std::size_t k = 0; k < 4; ++k) proj_b.mutable_data()[k] = 1.0;

    Rng rng(101);
    Tensor epoch = testutil::random_tensor({4, 16}, rng);
    Tensor target = testutil::random_tensor({4}, rng);
    AttributionMap map = gradcam(params, epoch, target);
    CHECK(map.zero_gradient);
    for (double v : map.values.data()) CHECK(v == 0.0);
}

TEST_CASE("gradcam input validation") {
    EncoderConfig mlp;
    mlp.family = EncoderFamily::residual_mlp;
    mlp.input_channels = 4;
    mlp.input_samples = 16;
    mlp.embed_dim = 4;
    mlp.hidden_width = 8;
    mlp.depth = 1;
    EncoderParams params = init_params(mlp);
    Rng rng(103);
    Tensor epoch = testutil::random_tensor({4, 16}, rng);
    CHECK_THROWS_AS(gradcam(params, epoch, testutil::random_tensor({4}, rng)), CapabilityError);

    EncoderParams conv = init_params(tiny_nice());
    CHECK_THROWS_AS(gradcam(conv, epoch, testutil::random_tensor({5}, rng)), ShapeError);
}

TEST_CASE("threshold histogram on small order-statistics fixtures") {
    AttributionMap m = map_from({1, 5}, {0.1, 0.2, 0.3, 0.4, 0.5});
    // p=75 over 5 points interpolates to 0.4; only 0.5 lies strictly above
    std::vector<std::size_t> counts = threshold_histogram({m}, 75.0);
    CHECK(counts == std::vector<std::size_t>{0, 0, 0, 0, 1});

    // p=62.5 interpolates halfway between 0.3 and 0.4
    counts = threshold_histogram({m}, 62.5);
    CHECK(counts == std::vector<std::size_t>{0, 0, 0, 1, 1});
}

TEST_CASE("uniform values put one percent above the 99th percentile") {
    Rng rng(107);
    std::vector<double> vals(10000);
    for (double& v : vals) v = rng.uniform(0.0, 1.0);
    AttributionMap m = map_from({1, 10000}, vals);
    std::vector<std::size_t> counts = threshold_histogram({m}, 99.0);
    std::size_t total = 0;
    for (std::size_t c : counts) total += c;
    CHECK(total >= 99);
    CHECK(total <= 101);
}

TEST_CASE("spikes and constants at the threshold boundary") {
    std::vector<double> bg(64, 0.0);
    bg[10] = 1.0;
    std::vector<std::size_t> counts = threshold_histogram({map_from({1, 64}, bg)}, 99.0);
    for (std::size_t t = 0; t < 64; ++t) CHECK(counts[t] == (t == 10 ? 1u : 0u));

    std::vector<double> flat(64, 0.42);
    counts = threshold_histogram({map_from({1, 64}, flat)}, 99.0);
    for (std::size_t c : counts) CHECK(c == 0);
}

TEST_CASE("thresholds are computed per seed before pooling") {
    std::vector<double> ramp(10);
    for (std::size_t i = 0; i < 10; ++i) ramp[i] = 0.05 + 0.09 * double(i);
    std::vector<double> shrunk(ramp);
    for (double& v : shrunk) v *= 0.1;  // same shape, different scale

    std::vector<std::size_t> one = threshold_histogram({map_from({1, 10}, ramp)}, 80.0);
    std::vector<std::vector<AttributionMap>> seeds = {{map_from({1, 10}, ramp)},
                                                      {map_from({1, 10}, shrunk)}};
    std::vector<std::size_t> both = threshold_histogram(seeds, 80.0);
    for (std::size_t t = 0; t < 10; ++t) CHECK(both[t] == 2 * one[t]);
}

TEST_CASE("threshold histogram validation") {
    AttributionMap m = map_from({1, 4}, {0.1, 0.2, 0.3, 0.4});
    CHECK_THROWS_AS(threshold_histogram({m}, 0.0), ParameterError);
    CHECK_THROWS_AS(threshold_histogram({m}, 100.0), ParameterError);
    CHECK_THROWS_AS(threshold_histogram(std::vector<AttributionMap>{}, 99.0), ParameterError);
    AttributionMap other = map_from({1, 5}, {0.1, 0.2, 0.3, 0.4, 0.5});
    CHECK_THROWS_AS(threshold_histogram({m, other}, 99.0), ShapeError);
}

TEST_CASE("electrode aggregation") {
    SUBCASE("single active channel takes all the mass") {
        AttributionMap m = map_from({3, 4}, {0, 0, 0, 0, 0.5, 0.5, 0.5, 0.5, 0, 0, 0, 0});
        std::vector<double> scores = electrode_aggregate({m});
        CHECK(scores == std::vector<double>{0.0, 1.0, 0.0});
    }

    SUBCASE("uniform maps split evenly") {
        AttributionMap m = map_from({4, 3}, std::vector<double>(12, 0.25));
        std::vector<double> scores = electrode_aggregate({m});
        for (double s : scores) CHECK(s == doctest::Approx(0.25).epsilon(1e-12));
    }

    SUBCASE("two maps of different lengths average by sample") {
        AttributionMap a = map_from({2, 4}, {0.2, 0.2, 0.2, 0.2, 0.4, 0.4, 0.4, 0.4});
        AttributionMap b = map_from({2, 2}, {0.8, 0.8, 0.2, 0.2});
        std::vector<double> scores = electrode_aggregate({a, b});
        // channel means over all 6 samples: (0.8+1.6)/6 and (1.6+0.4)/6
        const double c0 = 2.4 / 6.0, c1 = 2.0 / 6.0;
        CHECK(scores[0] == doctest::Approx(c0 / (c0 + c1)).epsilon(1e-12));
        CHECK(scores[1] == doctest::Approx(c1 / (c0 + c1)).epsilon(1e-12));
    }

    SUBCASE("validation") {
        CHECK_THROWS_AS(electrode_aggregate({}), ParameterError);
        AttributionMap a = map_from({2, 2}, {0.1, 0.1, 0.1, 0.1});
        AttributionMap b = map_from({3, 2}, std::vector<double>(6, 0.1));
        CHECK_THROWS_AS(electrode_aggregate({a, b}), ShapeError);
        AttributionMap zero = map_from({2, 2}, {0, 0, 0, 0});
        CHECK_THROWS_AS(electrode_aggregate({zero}), DegenerateInputError);
    }
}

TEST_CASE("band comparison") {
    std::vector<std::string> names = {"low", "high"};

    SUBCASE("identical groups give t = 0, p = 1") {
        std::vector<std::vector<double>> g = {{0.3, 0.7}, {0.4, 0.6}};
        auto rows = band_compare(g, g, names);
        REQUIRE(rows.size() == 2);
        for (const auto& r : rows) {
            CHECK(r.test.t == 0.0);
            CHECK(r.test.p == 1.0);
        }
        CHECK(rows[0].band == "low");
        CHECK(rows[1].band == "high");
    }

    SUBCASE("closed-form two-seed comparison") {
        std::vector<std::vector<double>> a = {{0.5, 0.5}, {0.6, 0.4}};
        std::vector<std::vector<double>> b = {{0.1, 0.9}, {0.2, 0.8}};
        auto rows = band_compare(a, b, names);
        const double t = 4.0 * std::sqrt(2.0);
        CHECK(rows[0].test.t == doctest::Approx(t).epsilon(1e-12));
        CHECK(rows[0].test.df == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(rows[0].test.p == doctest::Approx(1.0 - t / std::sqrt(2.0 + t * t)).epsilon(1e-9));
        CHECK(rows[0].mean_a == doctest::Approx(0.55).epsilon(1e-12));
        CHECK(rows[0].mean_b == doctest::Approx(0.15).epsilon(1e-12));
        CHECK(rows[1].test.t < 0.0);
    }

    SUBCASE("validation") {
        std::vector<std::vector<double>> ok = {{0.5, 0.5}, {0.6, 0.4}};
        CHECK_THROWS_AS(band_compare({{0.5, 0.5}}, ok, names), ParameterError);
        CHECK_THROWS_AS(band_compare(ok, {{0.1}, {0.2, 0.8}}, names), ShapeError);
        std::vector<std::vector<double>> flat = {{0.5, 0.5}, {0.5, 0.5}};
        CHECK_THROWS_AS(band_compare(flat, flat, names), StatisticsError);
    }
}

TEST_CASE("text emitters") {
    CHECK(histogram_to_csv({3, 0, 7}) == "time_index,count\n0,3\n1,0\n2,7\n");

    CHECK(electrode_scores_to_text({"Cz", "Pz"}, {0.25, 0.75}) ==
          "channel,score\nCz,0.250000\nPz,0.750000\n");
    CHECK_THROWS_AS(electrode_scores_to_text({"Cz"}, {0.5, 0.5}), ShapeError);

    BandComparison row;
    row.band = "Alpha";
    row.mean_a = 0.5;
    row.se_a = 0.05;
    row.mean_b = 0.15;
    row.se_b = 0.05;
    row.test.t = 5.656854;
    row.test.df = 2.0;
    row.test.p = 0.029857;
    CHECK(band_table_to_text({row}) ==
          "band,mean_a,se_a,mean_b,se_b,t,df,p\n"
          "Alpha,0.500000,0.050000,0.150000,0.050000,5.656854,2,0.029857\n");
}

}  // TEST_SUITE
