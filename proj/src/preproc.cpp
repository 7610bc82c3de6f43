#include "naln/preproc.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "naln/errors.hpp"
#include "naln/parallel.hpp"

namespace naln {

namespace {

// Hamming-windowed sinc low-pass, unit DC gain, odd length.
std::vector<double> lowpass_kernel(double cutoff_hz, double fs, std::size_t length) {
    const double fc = cutoff_hz / fs;
    const std::size_t m = length - 1;  // even
    std::vector<double> h(length);
    double sum = 0.0;
    for (std::size_t n = 0; n < length; ++n) {
        const double x = static_cast<double>(n) - static_cast<double>(m) / 2.0;
        const double sinc = (x == 0.0) ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * x) / (std::numbers::pi * x);
        const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / m);
        h[n] = sinc * w;
        sum += h[n];
    }
    for (double& v : h) v /= sum;
    return h;
}

std::size_t odd_length(double fs, double transition_hz) {
    auto len = static_cast<std::size_t>(std::ceil(3.3 * fs / transition_hz));
    if (len < 3) len = 3;
    if (len % 2 == 0) ++len;
    return len;
}

// Index into [0, t) by even reflection at both ends (period 2t-2).
std::size_t reflect_index(long long i, std::size_t t) {
    if (t == 1) return 0;
    const long long period = 2 * static_cast<long long>(t) - 2;
    long long m = i % period;
    if (m < 0) m += period;
    if (m >= static_cast<long long>(t)) m = period - m;
    return static_cast<std::size_t>(m);
}

// Zero-phase: centered 'same' convolution applied forward then backward, with
// reflect padding of one kernel length at each end.
void filtfilt_channel(const double* x, std::size_t t, const std::vector<double>& h, double* out) {
    const std::size_t m = h.size();
    const std::size_t pad = m;
    const std::size_t half = (m - 1) / 2;
    const std::size_t tp = t + 2 * pad;

    std::vector<double> buf(tp), tmp(tp);
    for (std::size_t i = 0; i < tp; ++i)
        buf[i] = x[reflect_index(static_cast<long long>(i) - static_cast<long long>(pad), t)];

    auto pass = [&](const std::vector<double>& src, std::vector<double>& dst) {
        for (std::size_t i = 0; i < tp; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                const long long j = static_cast<long long>(i) + static_cast<long long>(k) -
                                    static_cast<long long>(half);
                const std::size_t src_idx =
                    (j < 0 || j >= static_cast<long long>(tp))
                        ? pad + reflect_index(j - static_cast<long long>(pad), t)
                        : static_cast<std::size_t>(j);
                acc += h[k] * src[src_idx];
            }
            dst[i] = acc;
        }
    };
    pass(buf, tmp);
    // second pass run on the time-reversed signal, then reversed back
    std::reverse(tmp.begin(), tmp.end());
    pass(tmp, buf);
    std::reverse(buf.begin(), buf.end());
    for (std::size_t i = 0; i < t; ++i) out[i] = buf[pad + i];
}

Recording apply_fir(const Recording& rec, const std::vector<double>& kernel) {
    Recording out = rec;
    out.samples = Tensor::zeros(rec.samples.dims());
    const std::size_t c = rec.channel_count(), t = rec.sample_count();
    const double* src = rec.samples.data().data();
    double* dst = out.samples.mutable_data().data();
    parallel_for(c, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t ci = lo; ci < hi; ++ci) filtfilt_channel(src + ci * t, t, kernel, dst + ci * t);
    });
    return out;
}

}  // namespace

Recording bandpass_filter(const Recording& rec, double lo_hz, double hi_hz) {
    rec.validate();
    const double nyq = rec.sample_rate_hz / 2.0;
    if (!(lo_hz >= 0.0 && lo_hz < hi_hz && hi_hz < nyq))
        throw ParameterError("band [" + std::to_string(lo_hz) + ", " + std::to_string(hi_hz) +
                             "] invalid for Nyquist " + std::to_string(nyq));

    // transition widths: a quarter of each edge frequency, at least 2 Hz, and
    // narrow enough at the top to finish falling off before Nyquist
    const double trans_hi = std::min(std::max(0.25 * hi_hz, 2.0), 2.0 * (nyq - hi_hz));
    std::vector<double> kernel;
    if (lo_hz > 0.0) {
        const double trans_lo = std::max(0.25 * lo_hz, 2.0);
        const std::size_t len = odd_length(rec.sample_rate_hz, std::min(trans_lo, trans_hi));
        std::vector<double> lp_hi = lowpass_kernel(hi_hz, rec.sample_rate_hz, len);
        std::vector<double> lp_lo = lowpass_kernel(lo_hz, rec.sample_rate_hz, len);
        kernel.resize(len);
        for (std::size_t i = 0; i < len; ++i) kernel[i] = lp_hi[i] - lp_lo[i];
        // force exact zero DC gain
        double mean = 0.0;
        for (double v : kernel) mean += v;
        mean /= static_cast<double>(len);
        for (double& v : kernel) v -= mean;
    } else {
        kernel = lowpass_kernel(hi_hz, rec.sample_rate_hz, odd_length(rec.sample_rate_hz, trans_hi));
    }
    return apply_fir(rec, kernel);
}

Recording downsample(const Recording& rec, double target_hz) {
    rec.validate();
    if (!(target_hz > 0.0)) throw ParameterError("target rate must be positive");
    const double ratio = rec.sample_rate_hz / target_hz;
    const auto factor = static_cast<std::size_t>(std::llround(ratio));
    if (factor < 1 || std::fabs(ratio - static_cast<double>(factor)) > 1e-9)
        throw ParameterError("sample rate " + std::to_string(rec.sample_rate_hz) +
                             " is not an integer multiple of " + std::to_string(target_hz));
    if (factor == 1) return rec;

    const double cutoff = 0.4 * target_hz;
    const double transition = 0.2 * target_hz;
    Recording filtered = apply_fir(rec, lowpass_kernel(cutoff, rec.sample_rate_hz,
                                                       odd_length(rec.sample_rate_hz, transition)));

    const std::size_t c = rec.channel_count(), t = rec.sample_count();
    const std::size_t tout = t / factor;
    Recording out;
    out.channel_names = rec.channel_names;
    out.sample_rate_hz = target_hz;
    out.samples = Tensor::zeros({c, tout});
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t i = 0; i < tout; ++i)
            out.samples.mutable_data()[ci * tout + i] = filtered.samples.data()[ci * t + i * factor];
    for (const auto& [onset, label] : rec.events) out.events.emplace_back(onset / factor, label);
    return out;
}

EpochSet epoch_extract(const Recording& rec, double start_ms, double end_ms) {
    rec.validate();
    if (!(start_ms < end_ms)) throw ParameterError("epoch window must have start < end");
    const double fs = rec.sample_rate_hz;
    const auto t_len = static_cast<long long>(std::llround((end_ms - start_ms) / 1000.0 * fs));
    if (t_len < 1) throw ParameterError("epoch window rounds to zero samples");
    const long long offset = std::llround(start_ms / 1000.0 * fs);

    const std::size_t c = rec.channel_count(), total = rec.sample_count(), n = rec.events.size();
    std::ostringstream bad;
    std::size_t bad_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const long long s0 = static_cast<long long>(rec.events[i].first) + offset;
        if (s0 < 0 || s0 + t_len > static_cast<long long>(total)) {
            bad << (bad_count ? ", " : "") << i;
            ++bad_count;
        }
    }
    if (bad_count)
        throw DataError("epoch window exceeds recording bounds for event(s) " + bad.str());

    EpochSet set;
    set.sample_rate_hz = fs;
    set.epochs = Tensor::zeros({n, c, static_cast<std::size_t>(t_len)});
    std::map<int, int> reps_seen;
    for (std::size_t i = 0; i < n; ++i) {
        const auto [onset, label] = rec.events[i];
        const long long s0 = static_cast<long long>(onset) + offset;
        for (std::size_t ci = 0; ci < c; ++ci)
            std::copy(rec.samples.data().begin() + ci * total + s0,
                      rec.samples.data().begin() + ci * total + s0 + t_len,
                      set.epochs.mutable_data().begin() + (i * c + ci) * t_len);
        set.labels.push_back(label);
        set.repetition_index.push_back(reps_seen[label]++);
    }
    set.validate();
    return set;
}

EpochSet baseline_correct(const EpochSet& epochs, double pre_ms, const Tensor& pre_windows) {
    epochs.validate();
    const auto p = static_cast<std::size_t>(std::llround(pre_ms / 1000.0 * epochs.sample_rate_hz));
    if (p == 0) throw ParameterError("baseline window rounds to zero samples");
    const std::size_t n = epochs.count(), c = epochs.channels(), t = epochs.samples();
    if (pre_windows.rank() != 3 || pre_windows.dim(0) != n || pre_windows.dim(1) != c ||
        pre_windows.dim(2) != p)
        throw ShapeError("pre-stimulus windows must be " + std::to_string(n) + "x" + std::to_string(c) +
                         "x" + std::to_string(p) + ", got " + dims_to_string(pre_windows.dims()));

    EpochSet out = epochs;
    out.epochs = Tensor::zeros(epochs.epochs.dims());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ci = 0; ci < c; ++ci) {
            double mean = 0.0;
            for (std::size_t k = 0; k < p; ++k) mean += pre_windows.data()[(i * c + ci) * p + k];
            mean /= static_cast<double>(p);
            for (std::size_t k = 0; k < t; ++k)
                out.epochs.mutable_data()[(i * c + ci) * t + k] =
                    epochs.epochs.data()[(i * c + ci) * t + k] - mean;
        }
    return out;
}

EpochSet average_repetitions(const EpochSet& epochs) {
    epochs.validate();
    const std::size_t n = epochs.count(), c = epochs.channels(), t = epochs.samples();
    std::vector<int> order;                 // labels by first occurrence
    std::map<int, std::size_t> slot;        // label -> output row
    std::map<int, std::size_t> counts;
    for (int label : epochs.labels) {
        if (!slot.count(label)) {
            slot[label] = order.size();
            order.push_back(label);
        }
        ++counts[label];
    }

    EpochSet out;
    out.sample_rate_hz = epochs.sample_rate_hz;
    out.labels = order;
    out.repetition_index.assign(order.size(), 0);
    out.epochs = Tensor::zeros({order.size(), c, t});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t row = slot[epochs.labels[i]];
        for (std::size_t j = 0; j < c * t; ++j)
            out.epochs.mutable_data()[row * c * t + j] += epochs.epochs.data()[i * c * t + j];
    }
    for (std::size_t row = 0; row < order.size(); ++row) {
        const double inv = 1.0 / static_cast<double>(counts[order[row]]);
        for (std::size_t j = 0; j < c * t; ++j) out.epochs.mutable_data()[row * c * t + j] *= inv;
    }
    return out;
}

EpochSet whiten(const EpochSet& epochs, double shrinkage) {
    epochs.validate();
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw ParameterError("shrinkage must be in [0,1]");
    const std::size_t n = epochs.count(), c = epochs.channels(), t = epochs.samples();
    if (n * t <= c)
        throw ParameterError("whitening needs more samples than channels: " + std::to_string(n * t) +
                             " <= " + std::to_string(c));

    // channel means over all epochs and timepoints
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t k = 0; k < t; ++k)
                mu[static_cast<Eigen::Index>(ci)] += epochs.epochs.data()[(i * c + ci) * t + k];
    mu /= static_cast<double>(n * t);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
    Eigen::VectorXd x(static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < t; ++k) {
            for (std::size_t ci = 0; ci < c; ++ci)
                x[static_cast<Eigen::Index>(ci)] = epochs.epochs.data()[(i * c + ci) * t + k] -
                                                   mu[static_cast<Eigen::Index>(ci)];
            cov.selfadjointView<Eigen::Lower>().rankUpdate(x);
        }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(n * t);

    Eigen::MatrixXd shrunk = (1.0 - shrinkage) * cov;
    shrunk.diagonal() = cov.diagonal();  // (1-s)·off-diagonals, variances kept

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(shrunk);
    if (eig.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
    const double lambda_min = eig.eigenvalues().minCoeff();
    if (lambda_min < 1e-10)
        throw NumericalError("covariance singular after shrinkage: smallest eigenvalue " +
                             std::to_string(lambda_min));
    Eigen::MatrixXd w = eig.eigenvectors() *
                        eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                        eig.eigenvectors().transpose();

    EpochSet out = epochs;
    out.epochs = Tensor::zeros(epochs.epochs.dims());
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> src(
            epochs.epochs.data().data() + i * c * t, static_cast<Eigen::Index>(c),
            static_cast<Eigen::Index>(t));
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> dst(
            out.epochs.mutable_data().data() + i * c * t, static_cast<Eigen::Index>(c),
            static_cast<Eigen::Index>(t));
        dst = w * src;
    }
    return out;
}

}  // namespace naln
