#pragma once

#include <cstdint>

#include "naln/embedding.hpp"
#include "naln/preproc.hpp"

namespace naln {

enum class AlignmentMode { aligned, misaligned };

std::string alignment_name(AlignmentMode m);
AlignmentMode alignment_from_name(const std::string& name);

// Class-conditioned epochs with an early temporal envelope, plus two embedding
// spaces per class: one matching the latent code and one progressively warped
// by a rotation and an odd nonlinearity.
struct SynthConfig {
    std::size_t n_classes = 64;
    std::size_t embed_dim = 32;
    std::size_t channels = 16;
    std::size_t samples = 64;
    double sample_rate_hz = 250.0;
    double noise_std = 0.05;
    AlignmentMode alignment_mode = AlignmentMode::aligned;
    double misalignment_strength = 0.0;  // blend weight, 0 keeps the latent code
    std::size_t n_repetitions = 4;
    double embed_noise_std = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthData {
    EpochSet epochs;
    EmbeddingSet aligned;
    EmbeddingSet misaligned;
};

SynthData generate(const SynthConfig& cfg);

}  // namespace naln
