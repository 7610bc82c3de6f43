#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "naln/encoders.hpp"
#include "naln/errors.hpp"
#include "naln/preproc.hpp"
#include "naln/rng.hpp"

using namespace naln;

namespace {

EncoderConfig tiny_nice(std::uint64_t seed = 0) {
    EncoderConfig cfg;
    cfg.family = EncoderFamily::nice_conv;
    cfg.input_channels = 4;
    cfg.input_samples = 16;
    cfg.embed_dim = 4;
    cfg.temporal_kernel = 5;
    cfg.temporal_filters = 2;
    cfg.spatial_filters = 3;
    cfg.pool_width = 3;
    cfg.seed = seed;
    return cfg;
}

EncoderConfig tiny_eegnet(std::uint64_t seed = 0) {
    EncoderConfig cfg = tiny_nice(seed);
    cfg.family = EncoderFamily::eegnet_conv;
    cfg.second_kernel = 2;
    cfg.second_filters = 2;
    return cfg;
}

EncoderConfig tiny_mlp(std::uint64_t seed = 0) {
    EncoderConfig cfg;
    cfg.family = EncoderFamily::residual_mlp;
    cfg.input_channels = 4;
    cfg.input_samples = 16;
    cfg.embed_dim = 4;
    cfg.hidden_width = 8;
    cfg.depth = 2;
    cfg.seed = seed;
    return cfg;
}

std::vector<Tensor> param_tensors(const EncoderParams& p) {
    std::vector<Tensor> out;
    for (const auto& [name, t] : p.parameters) {
        (void)name;
        out.push_back(t);
    }
    return out;
}

}  // namespace

TEST_SUITE("encoders") {

TEST_CASE("initialization is seed-deterministic") {
    EncoderParams a = init_params(tiny_nice(7));
    EncoderParams b = init_params(tiny_nice(7));
    REQUIRE(a.parameters.size() == b.parameters.size());
    for (std::size_t i = 0; i < a.parameters.size(); ++i)
        CHECK(a.parameters[i].second.data() == b.parameters[i].second.data());

    EncoderParams c = init_params(tiny_nice(8));
    bool any_diff = false;
    for (std::size_t i = 0; i < a.parameters.size(); ++i)
        if (a.parameters[i].second.data() != c.parameters[i].second.data()) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("weight init matches fan-in scaling") {
    // in_w has fan_in = C·T = 100 and 100×100 = 10^4 draws
    EncoderConfig cfg;
    cfg.family = EncoderFamily::residual_mlp;
    cfg.input_channels = 10;
    cfg.input_samples = 10;
    cfg.embed_dim = 2;
    cfg.hidden_width = 100;
    cfg.depth = 0;
    cfg.seed = 21;
    Tensor w = init_params(cfg).find("in_w");
    REQUIRE(w.size() == 10000);
    double sum = 0.0, sq = 0.0;
    for (double v : w.data()) {
        sum += v;
        sq += v * v;
    }
    const double mean = sum / w.size();
    const double stdev = std::sqrt(sq / w.size() - mean * mean);
    const double target = std::sqrt(2.0 / 100.0);
    CHECK(std::fabs(stdev - target) / target < 0.10);

    // biases zero, gains one
    EncoderParams nice = init_params(tiny_nice());
    for (double v : nice.find("proj_b").data()) CHECK(v == 0.0);
    for (double v : nice.find("temporal_gain").data()) CHECK(v == 1.0);
}

TEST_CASE("zero input with zero biases maps to the zero embedding") {
    EncoderParams params = init_params(tiny_nice(3));
    Tensor out = encode(params, Tensor::zeros({4, 16}));
    REQUIRE(out.dims() == std::vector<std::size_t>{4});
    for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("temporal weights are irrelevant on zero input") {
    Rng rng(55);
    EncoderParams a = init_params(tiny_nice(3));
    for (double& v : a.find("temporal_bias").mutable_data()) v = 0.37;
    EncoderParams b = a;
    for (auto& [name, t] : b.parameters)
        if (name == "temporal_w") t = testutil::random_tensor(t.dims(), rng);
    Tensor pa = projection_activations(a, Tensor::zeros({4, 16}));
    Tensor pb = projection_activations(b, Tensor::zeros({4, 16}));
    CHECK(pa.data() == pb.data());
}

TEST_CASE("declared output and projection geometry") {
    EncoderConfig cfg = tiny_nice();
    // T1 = 16-5+1 = 12, pooled by 3 -> 4
    auto [features, timepoints] = projection_geometry(cfg);
    CHECK(features == 3);
    CHECK(timepoints == 4);
    EncoderParams params = init_params(cfg);
    CHECK(params.find("proj_w").dims() == std::vector<std::size_t>{4, 12});

    auto [mf, mt] = projection_geometry(tiny_mlp());
    CHECK(mf == 8);
    CHECK(mt == 0);

    EncoderConfig big;
    big.family = EncoderFamily::nice_conv;
    big.input_channels = 63;
    big.input_samples = 250;
    big.embed_dim = 32;
    Tensor out = encode(init_params(big), Tensor::zeros({63, 250}));
    CHECK(out.dims() == std::vector<std::size_t>{32});
}

TEST_CASE("encode_batch matches per-epoch encode bitwise") {
    Rng rng(12);
    EncoderParams params = init_params(tiny_nice(5));
    Tensor batch = testutil::random_tensor({4, 4, 16}, rng);
    Tensor out = encode_batch(params, batch);
    REQUIRE(out.dims() == std::vector<std::size_t>{4, 4});

    EpochSet view;
    view.epochs = batch;
    view.sample_rate_hz = 1;
    view.labels = {0, 1, 2, 3};
    for (std::size_t i = 0; i < 4; ++i) {
        Tensor single = encode(params, view.epoch(i));
        for (std::size_t j = 0; j < 4; ++j) CHECK(out.at(i, j) == single.at(j));
    }

    // permuting rows permutes outputs
    Tensor permuted = Tensor::zeros({4, 4, 16});
    const std::size_t order[4] = {2, 0, 3, 1};
    for (std::size_t i = 0; i < 4; ++i)
        std::copy(batch.data().begin() + order[i] * 64, batch.data().begin() + (order[i] + 1) * 64,
                  permuted.mutable_data().begin() + i * 64);
    Tensor pout = encode_batch(params, permuted);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(pout.at(i, j) == out.at(order[i], j));
}

TEST_CASE("projection activations feed the final linear layer") {
    EncoderParams params = init_params(tiny_nice(9));
    for (auto& [name, t] : params.parameters) {
        (void)name;
        t.set_requires_grad(true);
    }
    Rng rng(4);
    Tensor epoch = testutil::random_tensor({4, 16}, rng);

    Tape tape;
    EncodeTrace trace = encode_traced(params, epoch, &tape);
    backward(sum(trace.embedding, &tape), tape);

    // d(sum of outputs)/d(activation j) = sum over rows of proj_w column j
    Tensor proj_w = params.find("proj_w");
    REQUIRE(trace.projection_input.has_grad());
    for (std::size_t j = 0; j < proj_w.dim(1); ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < proj_w.dim(0); ++i) col += proj_w.at(i, j);
        CHECK(trace.projection_input.grad()[j] == doctest::Approx(col).epsilon(1e-12));
    }
}

TEST_CASE("finite differences validate encoder gradients for all families") {
    Rng rng(31);
    for (const EncoderConfig& cfg : {tiny_nice(1), tiny_eegnet(2), tiny_mlp(3)}) {
        EncoderParams params = init_params(cfg);
        Tensor epoch = testutil::random_tensor({4, 16}, rng);
        Tensor w = testutil::random_tensor({4}, rng);
        auto fwd = [&](Tape* t) { return sum(mul(encode(params, epoch, t), w, t), t); };
        CHECK(testutil::check_gradients(param_tensors(params), fwd) < 1e-4);
    }
}

TEST_CASE("config validation rejects impossible geometry") {
    EncoderConfig cfg = tiny_nice();
    cfg.temporal_kernel = 17;
    CHECK_THROWS_AS(init_params(cfg), ParameterError);

    cfg = tiny_nice();
    cfg.embed_dim = 0;
    CHECK_THROWS_AS(init_params(cfg), ParameterError);

    cfg = tiny_nice();
    cfg.pool_width = 13;  // T1 = 12
    CHECK_THROWS_AS(init_params(cfg), ParameterError);

    EncoderParams params = init_params(tiny_nice());
    CHECK_THROWS_AS(encode(params, Tensor::zeros({4, 15})), ShapeError);
    CHECK_THROWS_AS(params.find("nope"), ParameterError);
    CHECK_THROWS_AS(family_from_name("transformer"), ParameterError);
}

}  // TEST_SUITE
