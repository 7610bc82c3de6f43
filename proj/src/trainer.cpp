#include "naln/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "naln/errors.hpp"
#include "naln/rng.hpp"

namespace naln {

Tensor infonce_loss(const Tensor& w, const Tensor& v, double tau, Tape* tape) {
    if (!(tau > 0.0)) throw ParameterError("temperature must be positive");
    if (w.rank() != 2 || v.rank() != 2 || w.dim(0) != v.dim(0) || w.dim(1) != v.dim(1))
        throw ShapeError("infonce operands must both be N×d, got " + dims_to_string(w.dims()) + " and " +
                         dims_to_string(v.dims()));
    const auto n = static_cast<double>(w.dim(0));

    Tensor logits = scale(cosine_similarity_matrix(w, v, tape), 1.0 / tau, tape);
    Tensor diag = diagonal(logits, tape);
    Tensor row_terms = sub(logsumexp_rows(logits, tape), diag, tape);
    Tensor col_terms = sub(logsumexp_rows(transpose2d(logits, tape), tape), diag, tape);
    return scale(sum(add(row_terms, col_terms, tape), tape), 1.0 / n, tape);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(std::size_t n,
                                                                              double val_fraction,
                                                                              std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ParameterError("val_fraction must be in (0,1)");
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng(seed);
    rng.shuffle(ids);

    const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
    if (n_val == 0 || n_val >= n)
        throw ParameterError("split leaves an empty side: " + std::to_string(n - n_val) + "/" +
                             std::to_string(n_val) + " of " + std::to_string(n));
    std::vector<std::size_t> val(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
    return {train, val};
}

void adam_step(EncoderParams& params, AdamState& state, double learning_rate) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (state.m.empty()) {
        state.m.resize(params.parameters.size());
        state.v.resize(params.parameters.size());
        for (std::size_t i = 0; i < params.parameters.size(); ++i) {
            state.m[i].assign(params.parameters[i].second.size(), 0.0);
            state.v[i].assign(params.parameters[i].second.size(), 0.0);
        }
    }
    if (state.m.size() != params.parameters.size())
        throw ContractError("optimizer state does not match parameter list");

    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

    for (std::size_t i = 0; i < params.parameters.size(); ++i) {
        auto& [name, tensor] = params.parameters[i];
        if (!tensor.has_grad()) continue;
        const std::vector<double>& g = tensor.grad();
        std::vector<double>& p = tensor.mutable_data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (std::isnan(g[j])) throw TrainingError("NaN gradient in parameter \"" + name + "\"");
            state.m[i][j] = beta1 * state.m[i][j] + (1.0 - beta1) * g[j];
            state.v[i][j] = beta2 * state.v[i][j] + (1.0 - beta2) * g[j] * g[j];
            const double mhat = state.m[i][j] / bc1;
            const double vhat = state.v[i][j] / bc2;
            p[j] -= learning_rate * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

namespace {

EncoderParams deep_copy(const EncoderParams& src) {
    EncoderParams out;
    out.config = src.config;
    for (const auto& [name, t] : src.parameters)
        out.parameters.emplace_back(name, Tensor::from(t.dims(), t.data()));
    return out;
}

// image embedding rows for the given epoch indices, as a frozen tensor
Tensor target_rows(const EpochSet& epochs, const std::vector<std::size_t>& idx,
                   const EmbeddingSet& images, const std::map<int, std::size_t>& row_of) {
    const std::size_t d = images.dim();
    Tensor v = Tensor::zeros({idx.size(), d});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::size_t row = row_of.at(epochs.labels[idx[i]]);
        std::copy(images.vectors.data().begin() + row * d, images.vectors.data().begin() + (row + 1) * d,
                  v.mutable_data().begin() + i * d);
    }
    return v;
}

Tensor epoch_rows(const EpochSet& epochs, const std::vector<std::size_t>& idx) {
    const std::size_t c = epochs.channels(), t = epochs.samples();
    Tensor batch = Tensor::zeros({idx.size(), c, t});
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(epochs.epochs.data().begin() + idx[i] * c * t,
                  epochs.epochs.data().begin() + (idx[i] + 1) * c * t,
                  batch.mutable_data().begin() + i * c * t);
    return batch;
}

}  // namespace

std::pair<EncoderParams, TrainReport> fit(const EncoderConfig& encoder_config, const EpochSet& train_epochs,
                                          const EmbeddingSet& image_embeddings, const TrainConfig& cfg) {
    cfg.validate();
    train_epochs.validate();
    image_embeddings.validate();

    std::map<int, std::size_t> row_of;
    for (std::size_t i = 0; i < image_embeddings.ids.size(); ++i) row_of[image_embeddings.ids[i]] = i;
    for (int label : train_epochs.labels)
        if (!row_of.count(label))
            throw DataError("no image embedding for label " + std::to_string(label));

    EncoderParams params = init_params(encoder_config);
    TrainReport report;
    report.best_val_loss = std::numeric_limits<double>::infinity();
    if (cfg.max_epochs == 0) return {params, report};

    for (auto& [name, t] : params.parameters) {
        (void)name;
        t.set_requires_grad(true);
    }

    auto [train_ids, val_ids] = split_train_val(train_epochs.count(), cfg.val_fraction, cfg.seed);
    Tensor val_epochs = epoch_rows(train_epochs, val_ids);
    Tensor val_targets = target_rows(train_epochs, val_ids, image_embeddings, row_of);

    AdamState adam;
    EncoderParams best = deep_copy(params);
    std::size_t since_best = 0;
    Rng batch_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        batch_rng.shuffle(train_ids);
        double loss_sum = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < train_ids.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, train_ids.size());
            if (stop - start < 2) continue;  // a single pair carries no contrast
            std::vector<std::size_t> batch(train_ids.begin() + static_cast<std::ptrdiff_t>(start),
                                           train_ids.begin() + static_cast<std::ptrdiff_t>(stop));

            Tape tape;
            Tensor w = encode_batch(params, epoch_rows(train_epochs, batch), &tape);
            Tensor v = target_rows(train_epochs, batch, image_embeddings, row_of);
            Tensor loss = infonce_loss(w, v, cfg.temperature, &tape);

            for (auto& [name, t] : params.parameters) {
                (void)name;
                t.zero_grad();
            }
            backward(loss, tape);
            adam_step(params, adam, cfg.learning_rate);
            loss_sum += loss.value();
            ++n_batches;
        }
        report.train_loss.push_back(n_batches ? loss_sum / static_cast<double>(n_batches) : 0.0);

        Tensor vw = encode_batch(params, val_epochs);
        const double vloss = infonce_loss(vw, val_targets, cfg.temperature).value();
        report.val_loss.push_back(vloss);
        report.stopped_epoch = epoch + 1;

        if (vloss < report.best_val_loss) {
            report.best_val_loss = vloss;
            best = deep_copy(params);
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return {best, report};
}

}  // namespace naln
