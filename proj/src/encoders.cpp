#include "naln/encoders.hpp"

#include <cmath>

#include "naln/errors.hpp"
#include "naln/rng.hpp"

namespace naln {

std::string family_name(EncoderFamily f) {
    switch (f) {
        case EncoderFamily::nice_conv: return "nice_conv";
        case EncoderFamily::eegnet_conv: return "eegnet_conv";
        case EncoderFamily::residual_mlp: return "residual_mlp";
    }
    throw ParameterError("unknown encoder family code");
}

EncoderFamily family_from_name(const std::string& name) {
    if (name == "nice_conv") return EncoderFamily::nice_conv;
    if (name == "eegnet_conv") return EncoderFamily::eegnet_conv;
    if (name == "residual_mlp") return EncoderFamily::residual_mlp;
    throw ParameterError("unknown encoder family \"" + name + "\"");
}

namespace {

std::size_t pooled_len(std::size_t t, std::size_t width, std::size_t stride) {
    return (t - width) / stride + 1;
}

// conv stack geometry shared by validate/init/forward
struct ConvShape {
    std::size_t t1, t2;       // after temporal conv, after pool
    std::size_t t3 = 0, t4 = 0;  // eegnet second block
};

ConvShape conv_shape(const EncoderConfig& c) {
    ConvShape s;
    s.t1 = c.input_samples - c.temporal_kernel + 1;
    s.t2 = pooled_len(s.t1, c.pool_width, c.pool_width);
    if (c.family == EncoderFamily::eegnet_conv) {
        s.t3 = s.t2 - c.second_kernel + 1;
        s.t4 = pooled_len(s.t3, 2, 2);
    }
    return s;
}

}  // namespace

void EncoderConfig::validate() const {
    if (embed_dim < 1) throw ParameterError("embed_dim must be >= 1");
    if (input_channels < 1 || input_samples < 1)
        throw ParameterError("encoder input geometry must be positive");
    switch (family) {
        case EncoderFamily::nice_conv:
        case EncoderFamily::eegnet_conv: {
            if (temporal_filters < 1 || spatial_filters < 1)
                throw ParameterError("filter counts must be >= 1");
            if (temporal_kernel < 1 || temporal_kernel > input_samples)
                throw ParameterError("temporal kernel width " + std::to_string(temporal_kernel) +
                                     " does not fit input length " + std::to_string(input_samples));
            const std::size_t t1 = input_samples - temporal_kernel + 1;
            if (pool_width < 1 || pool_width > t1)
                throw ParameterError("pool width " + std::to_string(pool_width) +
                                     " does not fit post-conv length " + std::to_string(t1));
            if (family == EncoderFamily::eegnet_conv) {
                const std::size_t t2 = pooled_len(t1, pool_width, pool_width);
                if (second_filters < 1) throw ParameterError("second_filters must be >= 1");
                if (second_kernel < 1 || second_kernel > t2)
                    throw ParameterError("second kernel width does not fit pooled length " +
                                         std::to_string(t2));
                if (t2 - second_kernel + 1 < 2)
                    throw ParameterError("second block output too short to pool");
            }
            break;
        }
        case EncoderFamily::residual_mlp:
            if (hidden_width < 1) throw ParameterError("hidden_width must be >= 1");
            break;
    }
}

std::pair<std::size_t, std::size_t> projection_geometry(const EncoderConfig& c) {
    c.validate();
    const ConvShape s = conv_shape(c);
    switch (c.family) {
        case EncoderFamily::nice_conv: return {c.spatial_filters, s.t2};
        case EncoderFamily::eegnet_conv: return {c.second_filters * c.spatial_filters, s.t4};
        case EncoderFamily::residual_mlp: return {c.hidden_width, 0};
    }
    throw ParameterError("unknown encoder family code");
}

Tensor EncoderParams::find(const std::string& name) const {
    for (const auto& [n, t] : parameters)
        if (n == name) return t;
    throw ParameterError("no parameter named \"" + name + "\"");
}

bool EncoderParams::all_finite() const {
    for (const auto& [n, t] : parameters) {
        (void)n;
        if (!t.all_finite()) return false;
    }
    return true;
}

namespace {

Tensor uniform_fan_in(std::vector<std::size_t> dims, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(dims));
    for (double& v : t.mutable_data()) v = rng.uniform(-bound, bound);
    return t;
}

}  // namespace

EncoderParams init_params(const EncoderConfig& config) {
    config.validate();
    Rng rng(config.seed);
    EncoderParams params;
    params.config = config;
    auto push = [&](const std::string& name, Tensor t) { params.parameters.emplace_back(name, std::move(t)); };

    const std::size_t c = config.input_channels, d = config.embed_dim;
    switch (config.family) {
        case EncoderFamily::nice_conv: {
            const ConvShape s = conv_shape(config);
            const std::size_t ft = config.temporal_filters, fs = config.spatial_filters;
            push("temporal_w", uniform_fan_in({ft, 1, config.temporal_kernel}, config.temporal_kernel, rng));
            push("temporal_gain", Tensor::full({ft * c}, 1.0));
            push("temporal_bias", Tensor::zeros({ft * c}));
            push("spatial_w", uniform_fan_in({fs, ft * c, 1}, ft * c, rng));
            push("spatial_gain", Tensor::full({fs}, 1.0));
            push("spatial_bias", Tensor::zeros({fs}));
            push("proj_w", uniform_fan_in({d, fs * s.t2}, fs * s.t2, rng));
            push("proj_b", Tensor::zeros({d}));
            break;
        }
        case EncoderFamily::eegnet_conv: {
            const ConvShape s = conv_shape(config);
            const std::size_t ft = config.temporal_filters, fs = config.spatial_filters;
            const std::size_t f2 = config.second_filters;
            push("temporal_w", uniform_fan_in({ft, 1, config.temporal_kernel}, config.temporal_kernel, rng));
            push("temporal_gain", Tensor::full({ft * c}, 1.0));
            push("temporal_bias", Tensor::zeros({ft * c}));
            push("spatial_w", uniform_fan_in({fs, ft * c, 1}, ft * c, rng));
            push("spatial_gain", Tensor::full({fs}, 1.0));
            push("spatial_bias", Tensor::zeros({fs}));
            push("second_w", uniform_fan_in({f2, 1, config.second_kernel}, config.second_kernel, rng));
            push("second_gain", Tensor::full({f2 * fs}, 1.0));
            push("second_bias", Tensor::zeros({f2 * fs}));
            push("proj_w", uniform_fan_in({d, f2 * fs * s.t4}, f2 * fs * s.t4, rng));
            push("proj_b", Tensor::zeros({d}));
            break;
        }
        case EncoderFamily::residual_mlp: {
            const std::size_t flat = c * config.input_samples, h = config.hidden_width;
            push("in_w", uniform_fan_in({h, flat}, flat, rng));
            push("in_b", Tensor::zeros({h}));
            for (std::size_t i = 0; i < config.depth; ++i) {
                const std::string tag = "block" + std::to_string(i);
                push(tag + "_w", uniform_fan_in({h, h}, h, rng));
                push(tag + "_b", Tensor::zeros({h}));
            }
            push("proj_w", uniform_fan_in({d, h}, h, rng));
            push("proj_b", Tensor::zeros({d}));
            break;
        }
    }
    return params;
}

namespace {

Tensor linear(const Tensor& w, const Tensor& b, const Tensor& x_col, Tape* tape) {
    Tensor y = matmul(w, x_col, tape);
    return add(y, reshape(b, {b.size(), 1}, tape), tape);
}

// Shared forward pass; fills *proj_out with the flattened projection-layer
// input when requested.
Tensor forward(const EncoderParams& params, const Tensor& epoch, Tape* tape, Tensor* proj_out) {
    const EncoderConfig& cfg = params.config;
    if (epoch.rank() != 2 || epoch.dim(0) != cfg.input_channels || epoch.dim(1) != cfg.input_samples)
        throw ShapeError("epoch dims " + dims_to_string(epoch.dims()) + " do not match encoder input " +
                         std::to_string(cfg.input_channels) + "x" + std::to_string(cfg.input_samples));

    auto scaled_elu = [&](const Tensor& x, const std::string& tag) {
        Tensor y = scale_channels(x, params.find(tag + "_gain"), tape);
        y = add_channels(y, params.find(tag + "_bias"), tape);
        return elu(y, tape);
    };

    Tensor flat_proj;  // projection-layer input, flattened to a column
    switch (cfg.family) {
        case EncoderFamily::nice_conv: {
            Tensor h = conv_temporal(epoch, params.find("temporal_w"), 1, tape);
            h = scaled_elu(h, "temporal");
            h = conv_spatial(h, params.find("spatial_w"), tape);
            h = scaled_elu(h, "spatial");
            h = avg_pool1d(h, cfg.pool_width, cfg.pool_width, tape);
            flat_proj = reshape(h, {h.size(), 1}, tape);
            break;
        }
        case EncoderFamily::eegnet_conv: {
            Tensor h = conv_temporal(epoch, params.find("temporal_w"), 1, tape);
            h = scaled_elu(h, "temporal");
            h = conv_spatial(h, params.find("spatial_w"), tape);
            h = scaled_elu(h, "spatial");
            h = avg_pool1d(h, cfg.pool_width, cfg.pool_width, tape);
            h = conv_temporal(h, params.find("second_w"), 1, tape);
            h = scaled_elu(h, "second");
            h = avg_pool1d(h, 2, 2, tape);
            flat_proj = reshape(h, {h.size(), 1}, tape);
            break;
        }
        case EncoderFamily::residual_mlp: {
            Tensor h = reshape(epoch, {epoch.size(), 1}, tape);
            h = elu(linear(params.find("in_w"), params.find("in_b"), h, tape), tape);
            for (std::size_t i = 0; i < cfg.depth; ++i) {
                const std::string tag = "block" + std::to_string(i);
                Tensor branch = elu(linear(params.find(tag + "_w"), params.find(tag + "_b"), h, tape), tape);
                h = add(h, branch, tape);
            }
            flat_proj = h;
            break;
        }
    }
    if (proj_out) *proj_out = flat_proj;
    Tensor out = linear(params.find("proj_w"), params.find("proj_b"), flat_proj, tape);
    return reshape(out, {cfg.embed_dim}, tape);
}

}  // namespace

Tensor encode(const EncoderParams& params, const Tensor& epoch, Tape* tape) {
    return forward(params, epoch, tape, nullptr);
}

Tensor encode_batch(const EncoderParams& params, const Tensor& epochs, Tape* tape) {
    if (epochs.rank() != 3)
        throw ShapeError("encode_batch expects n×C×T, got " + dims_to_string(epochs.dims()));
    const std::size_t n = epochs.dim(0), c = epochs.dim(1), t = epochs.dim(2);
    std::vector<Tensor> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor ep = Tensor::zeros({c, t});
        std::copy(epochs.data().begin() + i * c * t, epochs.data().begin() + (i + 1) * c * t,
                  ep.mutable_data().begin());
        rows.push_back(forward(params, ep, tape, nullptr));
    }
    return row_stack(rows, tape);
}

Tensor projection_activations(const EncoderParams& params, const Tensor& epoch, Tape* tape) {
    Tensor proj;
    forward(params, epoch, tape, &proj);
    return proj;
}

EncodeTrace encode_traced(const EncoderParams& params, const Tensor& epoch, Tape* tape) {
    EncodeTrace trace;
    trace.embedding = forward(params, epoch, tape, &trace.projection_input);
    return trace;
}

}  // namespace naln
