#pragma once

#include <cstddef>
#include <cstdint>

namespace naln {

// Optimization protocol. Defaults: batch 128, lr 2e-4, temperature 0.04,
// early stop after 25 epochs without validation improvement, 90/10 split.
struct TrainConfig {
    double learning_rate = 2e-4;
    std::size_t batch_size = 128;
    double temperature = 0.04;
    std::size_t max_epochs = 50;
    std::size_t patience = 25;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const;  // throws ParameterError
};

}  // namespace naln
