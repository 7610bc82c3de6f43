#include <algorithm>
#include <set>
#include <string>

#include "naln/embedding.hpp"
#include "naln/errors.hpp"
#include "naln/preproc.hpp"
#include "naln/train_config.hpp"

namespace naln {

void Recording::validate() const {
    if (samples.rank() != 2)
        throw ShapeError("recording samples must be C×T, got " + dims_to_string(samples.dims()));
    if (!(sample_rate_hz > 0.0)) throw ParameterError("recording sample rate must be positive");
    if (!channel_names.empty() && channel_names.size() != samples.dim(0))
        throw ShapeError("channel name count " + std::to_string(channel_names.size()) +
                         " does not match channel axis " + std::to_string(samples.dim(0)));
    for (const auto& [onset, label] : events) {
        (void)label;
        if (onset >= samples.dim(1))
            throw DataError("event onset " + std::to_string(onset) + " outside recording of length " +
                            std::to_string(samples.dim(1)));
    }
}

Tensor EpochSet::epoch(std::size_t i) const {
    if (epochs.rank() != 3 || i >= epochs.dim(0))
        throw ShapeError("epoch index " + std::to_string(i) + " out of range for " +
                         dims_to_string(epochs.dims()));
    const std::size_t c = epochs.dim(1), t = epochs.dim(2);
    Tensor out = Tensor::zeros({c, t});
    std::copy(epochs.data().begin() + i * c * t, epochs.data().begin() + (i + 1) * c * t,
              out.mutable_data().begin());
    return out;
}

void EpochSet::validate() const {
    if (epochs.rank() != 3)
        throw ShapeError("epochs must be n×C×T, got " + dims_to_string(epochs.dims()));
    if (!(sample_rate_hz > 0.0)) throw ParameterError("epoch set sample rate must be positive");
    if (labels.size() != epochs.dim(0))
        throw ShapeError("label count " + std::to_string(labels.size()) + " does not match epoch count " +
                         std::to_string(epochs.dim(0)));
    if (!repetition_index.empty() && repetition_index.size() != labels.size())
        throw ShapeError("repetition index length does not match epoch count");
}

void EmbeddingSet::validate() const {
    if (vectors.rank() != 2)
        throw ShapeError("embeddings must be n×d, got " + dims_to_string(vectors.dims()));
    if (ids.size() != vectors.dim(0))
        throw ShapeError("id count " + std::to_string(ids.size()) + " does not match row count " +
                         std::to_string(vectors.dim(0)));
    std::set<int> seen(ids.begin(), ids.end());
    if (seen.size() != ids.size()) throw DataError("embedding ids are not unique");
    if (!vectors.all_finite()) throw DataError("embedding set contains non-finite values");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
    if (batch_size == 0) throw ParameterError("batch_size must be positive");
    if (!(temperature > 0.0)) throw ParameterError("temperature must be positive");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ParameterError("val_fraction must be in (0,1)");
    if (patience > max_epochs) throw ParameterError("patience exceeds max_epochs");
}

}  // namespace naln
