#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "naln/embedding.hpp"
#include "naln/encoders.hpp"
#include "naln/preproc.hpp"
#include "naln/tensor.hpp"
#include "naln/train_config.hpp"

namespace naln {

// Symmetric contrastive loss over matched rows of W and V:
//   L = -(1/N) Σ_i [log softmax_row(S/τ)_ii + log softmax_col(S/τ)_ii]
// with S the cosine similarity matrix. Exactly zero for N = 1.
Tensor infonce_loss(const Tensor& w, const Tensor& v, double tau, Tape* tape = nullptr);

// Seeded shuffle split into disjoint, exhaustive (train, val) index sets.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(std::size_t n,
                                                                              double val_fraction,
                                                                              std::uint64_t seed);

// Adam moments, one slot per parameter tensor, β1=0.9 β2=0.999 ε=1e-8.
struct AdamState {
    std::size_t step = 0;
    std::vector<std::vector<double>> m, v;
};

// Applies one update from the gradients currently held by the parameters.
// Parameters without a populated gradient are left untouched.
void adam_step(EncoderParams& params, AdamState& state, double learning_rate);

struct TrainReport {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_loss;
    std::size_t stopped_epoch = 0;           // epochs actually run
    double best_val_loss = 0.0;              // +inf when no epoch ran
    std::string checkpoint_ref;              // filled by callers that persist params
};

// Minibatch InfoNCE against frozen image embeddings, early stopping on
// validation loss, returns the best-validation parameters.
std::pair<EncoderParams, TrainReport> fit(const EncoderConfig& encoder_config, const EpochSet& train_epochs,
                                          const EmbeddingSet& image_embeddings, const TrainConfig& cfg);

}  // namespace naln
