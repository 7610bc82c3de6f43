#include "naln/synthgen.hpp"

#include <cmath>

#include "naln/errors.hpp"
#include "naln/rng.hpp"
#include "naln/tensor.hpp"

namespace naln {

namespace {

void unit_normalize(std::vector<double>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw NumericalError("degenerate latent vector");
    for (double& x : v) x /= norm;
}

// orthonormal basis from a Gaussian square matrix, modified Gram-Schmidt
std::vector<double> random_orthogonal(std::size_t d, Rng& rng) {
    std::vector<double> q(d * d);
    for (double& x : q) x = rng.normal();
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            double dot = 0.0;
            for (std::size_t r = 0; r < d; ++r) dot += q[r * d + i] * q[r * d + j];
            for (std::size_t r = 0; r < d; ++r) q[r * d + j] -= dot * q[r * d + i];
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < d; ++r) norm += q[r * d + j] * q[r * d + j];
        norm = std::sqrt(norm);
        if (norm < 1e-12) throw NumericalError("rank-deficient rotation draw");
        for (std::size_t r = 0; r < d; ++r) q[r * d + j] /= norm;
    }
    return q;
}

}  // namespace

std::string alignment_name(AlignmentMode m) {
    return m == AlignmentMode::aligned ? "aligned" : "misaligned";
}

AlignmentMode alignment_from_name(const std::string& name) {
    if (name == "aligned") return AlignmentMode::aligned;
    if (name == "misaligned") return AlignmentMode::misaligned;
    throw ParameterError("unknown alignment mode \"" + name + "\"");
}

void SynthConfig::validate() const {
    if (n_classes < 2) throw ParameterError("n_classes must be >= 2");
    if (embed_dim < 1 || channels < 1 || samples < 1)
        throw ParameterError("embed_dim, channels, and samples must be >= 1");
    if (!(sample_rate_hz > 0.0)) throw ParameterError("sample_rate_hz must be positive");
    if (noise_std < 0.0 || embed_noise_std < 0.0)
        throw ParameterError("noise standard deviations must be nonnegative");
    if (misalignment_strength < 0.0 || misalignment_strength > 1.0)
        throw ParameterError("misalignment_strength must lie in [0, 1]");
    if (n_repetitions < 1) throw ParameterError("n_repetitions must be >= 1");
}

SynthData generate(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t k = cfg.n_classes, d = cfg.embed_dim, c = cfg.channels, t = cfg.samples;
    Rng rng(cfg.seed);

    // fixed draw order: latents, mixing, rotation, embedding noise, epoch noise
    std::vector<std::vector<double>> z(k, std::vector<double>(d));
    for (auto& zk : z) {
        for (double& x : zk) x = rng.normal();
        unit_normalize(zk);
    }

    std::vector<double> mixing(c * d);
    for (double& x : mixing) x = rng.normal();

    const std::vector<double> rot = random_orthogonal(d, rng);

    std::vector<std::vector<double>> eps(k, std::vector<double>(d));
    for (auto& ek : eps)
        for (double& x : ek) x = rng.normal();

    SynthData out;
    out.aligned.vectors = Tensor::zeros({k, d});
    out.misaligned.vectors = Tensor::zeros({k, d});
    const double gamma = cfg.misalignment_strength;
    for (std::size_t i = 0; i < k; ++i) {
        out.aligned.ids.push_back(static_cast<int>(i));
        out.misaligned.ids.push_back(static_cast<int>(i));

        std::vector<double> rotated(d, 0.0);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t s = 0; s < d; ++s) rotated[r] += rot[r * d + s] * z[i][s];
        for (double& x : rotated) x = x * x * x;  // odd nonlinearity
        unit_normalize(rotated);

        for (std::size_t j = 0; j < d; ++j) {
            const double noise = cfg.embed_noise_std * eps[i][j];
            out.aligned.vectors.mutable_data()[i * d + j] = z[i][j] + noise;
            out.misaligned.vectors.mutable_data()[i * d + j] =
                (1.0 - gamma) * z[i][j] + gamma * rotated[j] + noise;
        }
    }

    // Gaussian envelope peaking early in the epoch
    std::vector<double> envelope(t);
    for (std::size_t ti = 0; ti < t; ++ti) {
        const double u = (static_cast<double>(ti) - 0.2 * static_cast<double>(t)) /
                         (0.12 * static_cast<double>(t));
        envelope[ti] = std::exp(-0.5 * u * u);
    }

    out.epochs.sample_rate_hz = cfg.sample_rate_hz;
    out.epochs.epochs = Tensor::zeros({k * cfg.n_repetitions, c, t});
    double* ep = out.epochs.epochs.mutable_data().data();
    for (std::size_t i = 0; i < k; ++i) {
        std::vector<double> drive(c, 0.0);
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t j = 0; j < d; ++j) drive[ci] += mixing[ci * d + j] * z[i][j];
        for (std::size_t r = 0; r < cfg.n_repetitions; ++r) {
            out.epochs.labels.push_back(static_cast<int>(i));
            out.epochs.repetition_index.push_back(static_cast<int>(r));
            double* base = ep + ((i * cfg.n_repetitions + r) * c) * t;
            for (std::size_t ci = 0; ci < c; ++ci)
                for (std::size_t ti = 0; ti < t; ++ti)
                    base[ci * t + ti] = drive[ci] * envelope[ti] + cfg.noise_std * rng.normal();
        }
    }
    return out;
}

}  // namespace naln
