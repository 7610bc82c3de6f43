#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "naln/tensor.hpp"

namespace naln {

enum class EncoderFamily { nice_conv, eegnet_conv, residual_mlp };

std::string family_name(EncoderFamily f);
EncoderFamily family_from_name(const std::string& name);  // ParameterError on unknown

// Architecture descriptor. Same config (including seed) always initializes to
// bit-identical parameters.
struct EncoderConfig {
    EncoderFamily family = EncoderFamily::nice_conv;
    std::size_t input_channels = 0;  // C
    std::size_t input_samples = 0;   // T
    std::size_t embed_dim = 0;       // d

    // conv families
    std::size_t temporal_kernel = 25;
    std::size_t temporal_filters = 40;
    std::size_t spatial_filters = 40;
    std::size_t pool_width = 5;

    // eegnet_conv second block
    std::size_t second_kernel = 5;
    std::size_t second_filters = 2;

    // residual_mlp
    std::size_t hidden_width = 256;
    std::size_t depth = 2;

    std::uint64_t seed = 0;

    void validate() const;  // throws ParameterError on impossible geometry
};

struct EncoderParams {
    EncoderConfig config;
    std::vector<std::pair<std::string, Tensor>> parameters;  // named, in creation order

    Tensor find(const std::string& name) const;  // ParameterError when absent
    bool all_finite() const;
};

// Projection-layer input geometry: (feature maps, time points). Families
// whose projection input carries no time axis report time = 0.
std::pair<std::size_t, std::size_t> projection_geometry(const EncoderConfig& config);

// Kaiming-style uniform init, bound sqrt(6/fan_in); biases zero, gains one.
EncoderParams init_params(const EncoderConfig& config);

// One epoch (C×T) to a d-vector. Records on the tape when given one.
Tensor encode(const EncoderParams& params, const Tensor& epoch, Tape* tape = nullptr);

// Row i is exactly encode(params, epochs[i]).
Tensor encode_batch(const EncoderParams& params, const Tensor& epochs, Tape* tape = nullptr);

// The activation tensor feeding the final linear projection, tape-connected.
Tensor projection_activations(const EncoderParams& params, const Tensor& epoch, Tape* tape = nullptr);

// Single forward pass exposing both the embedding and the projection input,
// sharing one graph (needed when gradients must reach the latter).
struct EncodeTrace {
    Tensor embedding;         // d
    Tensor projection_input;  // flattened projection-layer input
};
EncodeTrace encode_traced(const EncoderParams& params, const Tensor& epoch, Tape* tape);

}  // namespace naln
