#include "naln/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>

#include "naln/errors.hpp"

namespace naln {

namespace {

// linear interpolation between order statistics, percentile in (0, 100)
double percentile_value(std::vector<double> values, double percentile) {
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size();
    if (m == 1) return values[0];
    const double r = percentile / 100.0 * static_cast<double>(m - 1);
    const std::size_t lo = static_cast<std::size_t>(r);
    if (lo + 1 >= m) return values[m - 1];
    const double frac = r - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

// endpoint-aligned linear resampling of a profile onto n_out points
std::vector<double> resample_linear(const std::vector<double>& profile, std::size_t n_out) {
    const std::size_t n_in = profile.size();
    std::vector<double> out(n_out);
    if (n_in == 1 || n_out == 1) {
        std::fill(out.begin(), out.end(), profile[0]);
        return out;
    }
    const double step = static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1);
    for (std::size_t t = 0; t < n_out; ++t) {
        const double s = static_cast<double>(t) * step;
        std::size_t j = static_cast<std::size_t>(s);
        if (j + 1 >= n_in) {
            out[t] = profile[n_in - 1];
            continue;
        }
        const double frac = s - static_cast<double>(j);
        out[t] = profile[j] + frac * (profile[j + 1] - profile[j]);
    }
    return out;
}

bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<std::complex<double>> fft_radix2(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = x[i];
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(angle), std::sin(angle));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    return a;
}

std::vector<std::complex<double>> dft_direct(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double angle = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(i) /
                                 static_cast<double>(n);
            acc += x[i] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

}  // namespace

BandSpec BandSpec::eeg_default(double nyquist_hz) {
    if (!(nyquist_hz > 30.0))
        throw ParameterError("default bands need a Nyquist frequency above 30 Hz, got " +
                             std::to_string(nyquist_hz));
    BandSpec spec;
    spec.bands = {{"Delta", 0.0, 4.0},
                  {"Theta", 4.0, 8.0},
                  {"Alpha", 8.0, 12.0},
                  {"Beta", 12.0, 30.0},
                  {"Gamma", 30.0, nyquist_hz}};
    return spec;
}

void BandSpec::validate(double nyquist_hz) const {
    if (bands.empty()) throw ParameterError("band spec has no bands");
    if (bands.front().lo_hz != 0.0) throw ParameterError("first band must start at 0 Hz");
    for (std::size_t i = 0; i < bands.size(); ++i) {
        if (!(bands[i].lo_hz < bands[i].hi_hz))
            throw ParameterError("band \"" + bands[i].name + "\" is empty or inverted");
        if (i > 0 && bands[i].lo_hz != bands[i - 1].hi_hz)
            throw ParameterError("bands \"" + bands[i - 1].name + "\" and \"" + bands[i].name +
                                 "\" do not tile contiguously");
    }
    if (bands.back().hi_hz < nyquist_hz)
        throw ParameterError("bands stop at " + std::to_string(bands.back().hi_hz) +
                             " Hz, below the Nyquist frequency " + std::to_string(nyquist_hz));
}

AttributionMap gradcam(const EncoderParams& params, const Tensor& epoch, const Tensor& target,
                       int epoch_id) {
    const EncoderConfig& cfg = params.config;
    auto [features, timepoints] = projection_geometry(cfg);
    if (timepoints == 0)
        throw CapabilityError("encoder family \"" + family_name(cfg.family) +
                              "\" has no temporal axis at the projection layer");
    if (target.rank() != 1 || target.dim(0) != cfg.embed_dim)
        throw ShapeError("target dims " + dims_to_string(target.dims()) + " do not match embed_dim " +
                         std::to_string(cfg.embed_dim));

    // a marked private copy of the epoch makes every intermediate, including
    // the projection input, accumulate gradients without touching params
    Tensor x = Tensor::from(epoch.dims(), epoch.data());
    x.set_requires_grad(true);
    Tape tape;
    EncodeTrace trace = encode_traced(params, x, &tape);
    Tensor w = reshape(trace.embedding, {1, cfg.embed_dim}, &tape);
    Tensor v = Tensor::from({1, cfg.embed_dim}, target.data());
    Tensor objective = sum(cosine_similarity_matrix(w, v, &tape), &tape);
    backward(objective, tape);

    AttributionMap map;
    map.source_layer = "projection_input";
    map.epoch_id = epoch_id;
    const std::size_t c = cfg.input_channels, t = cfg.input_samples;
    map.values = Tensor::zeros({c, t});

    if (!trace.projection_input.has_grad()) {
        map.zero_gradient = true;
        return map;
    }
    const auto node = trace.projection_input.node();

    // positive part of the gradient, averaged over layer features
    std::vector<double> profile(timepoints, 0.0);
    for (std::size_t f = 0; f < features; ++f)
        for (std::size_t j = 0; j < timepoints; ++j)
            profile[j] += std::max(node->grad[f * timepoints + j], 0.0);
    for (double& p : profile) p /= static_cast<double>(features);

    const auto [mn_it, mx_it] = std::minmax_element(profile.begin(), profile.end());
    const double mn = *mn_it, mx = *mx_it;
    if (!(mx > mn)) {
        map.zero_gradient = true;
        return map;
    }
    for (double& p : profile) p = (p - mn) / (mx - mn);

    std::vector<double> timeline = resample_linear(profile, t);
    double* out = map.values.mutable_data().data();
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t ti = 0; ti < t; ++ti) out[ci * t + ti] = timeline[ti];
    return map;
}

std::vector<std::size_t> threshold_histogram(const std::vector<std::vector<AttributionMap>>& seeds,
                                             double percentile) {
    if (!(percentile > 0.0 && percentile < 100.0))
        throw ParameterError("percentile must lie in (0, 100)");
    if (seeds.empty()) throw ParameterError("no attribution maps given");

    std::size_t t = 0;
    for (const auto& maps : seeds) {
        if (maps.empty()) throw ParameterError("a seed group has no attribution maps");
        for (const AttributionMap& m : maps) {
            if (t == 0) t = m.values.dim(1);
            if (m.values.dim(1) != t)
                throw ShapeError("attribution maps disagree on time length: " + std::to_string(t) +
                                 " vs " + std::to_string(m.values.dim(1)));
        }
    }

    std::vector<std::size_t> counts(t, 0);
    for (const auto& maps : seeds) {
        std::vector<double> pooled;
        for (const AttributionMap& m : maps)
            pooled.insert(pooled.end(), m.values.data().begin(), m.values.data().end());
        const double threshold = percentile_value(std::move(pooled), percentile);
        for (const AttributionMap& m : maps) {
            const std::size_t c = m.values.dim(0);
            const double* vals = m.values.data().data();
            for (std::size_t ci = 0; ci < c; ++ci)
                for (std::size_t ti = 0; ti < t; ++ti)
                    if (vals[ci * t + ti] > threshold) ++counts[ti];
        }
    }
    return counts;
}

std::vector<std::size_t> threshold_histogram(const std::vector<AttributionMap>& maps,
                                             double percentile) {
    return threshold_histogram(std::vector<std::vector<AttributionMap>>{maps}, percentile);
}

PSD periodogram(const std::vector<double>& x, double sample_rate_hz) {
    const std::size_t n = x.size();
    if (n < 2) throw ParameterError("periodogram needs at least 2 samples");
    if (!(sample_rate_hz > 0.0)) throw ParameterError("sample rate must be positive");

    const std::vector<std::complex<double>> spectrum =
        is_power_of_two(n) ? fft_radix2(x) : dft_direct(x);

    PSD psd;
    const std::size_t bins = n / 2 + 1;
    psd.frequencies.resize(bins);
    psd.power.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        psd.frequencies[k] = static_cast<double>(k) * sample_rate_hz / static_cast<double>(n);
        const double s = std::norm(spectrum[k]) / static_cast<double>(n);
        const bool shared = k == 0 || (n % 2 == 0 && k == n / 2);  // bin also on the negative side
        psd.power[k] = shared ? s : 2.0 * s;
    }
    return psd;
}

std::vector<std::pair<std::string, double>> band_energies(const PSD& psd, const BandSpec& bands) {
    if (psd.frequencies.empty() || psd.frequencies.size() != psd.power.size())
        throw ShapeError("malformed PSD");
    bands.validate(psd.frequencies.back());

    double total = 0.0;
    for (double p : psd.power) total += p;
    if (!(total > 0.0)) throw DegenerateInputError("signal has zero total power");

    std::vector<std::pair<std::string, double>> fractions;
    fractions.reserve(bands.bands.size());
    for (std::size_t b = 0; b < bands.bands.size(); ++b) {
        const Band& band = bands.bands[b];
        const bool last = b + 1 == bands.bands.size();
        double acc = 0.0;
        for (std::size_t k = 0; k < psd.frequencies.size(); ++k) {
            const double f = psd.frequencies[k];
            if (f >= band.lo_hz && (f < band.hi_hz || (last && f <= band.hi_hz))) acc += psd.power[k];
        }
        fractions.emplace_back(band.name, acc / total);
    }
    return fractions;
}

std::vector<double> electrode_aggregate(const std::vector<AttributionMap>& maps) {
    if (maps.empty()) throw ParameterError("no attribution maps given");
    const std::size_t c = maps[0].values.dim(0);
    std::vector<double> sums(c, 0.0);
    std::size_t samples = 0;
    for (const AttributionMap& m : maps) {
        if (m.values.dim(0) != c)
            throw ShapeError("attribution maps disagree on channel count: " + std::to_string(c) +
                             " vs " + std::to_string(m.values.dim(0)));
        const std::size_t t = m.values.dim(1);
        const double* vals = m.values.data().data();
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t ti = 0; ti < t; ++ti) sums[ci] += vals[ci * t + ti];
        samples += t;
    }
    for (double& s : sums) s /= static_cast<double>(samples);

    double total = 0.0;
    for (double s : sums) total += s;
    if (!(total > 0.0)) throw DegenerateInputError("attribution maps carry zero total mass");
    for (double& s : sums) s /= total;
    return sums;
}

std::vector<BandComparison> band_compare(const std::vector<std::vector<double>>& energies_a,
                                         const std::vector<std::vector<double>>& energies_b,
                                         const std::vector<std::string>& band_names) {
    if (energies_a.size() < 2 || energies_b.size() < 2)
        throw ParameterError("band comparison needs at least 2 seeds per condition");
    const std::size_t nb = band_names.size();
    for (const auto& row : energies_a)
        if (row.size() != nb) throw ShapeError("a seed row does not match the band count");
    for (const auto& row : energies_b)
        if (row.size() != nb) throw ShapeError("a seed row does not match the band count");

    std::vector<BandComparison> out;
    out.reserve(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        std::vector<double> a, bb;
        for (const auto& row : energies_a) a.push_back(row[b]);
        for (const auto& row : energies_b) bb.push_back(row[b]);
        BandComparison cmp;
        cmp.band = band_names[b];
        std::tie(cmp.mean_a, cmp.se_a) = summarize(a);
        std::tie(cmp.mean_b, cmp.se_b) = summarize(bb);
        cmp.test = welch_ttest(a, bb);
        out.push_back(cmp);
    }
    return out;
}

std::string histogram_to_csv(const std::vector<std::size_t>& counts) {
    std::string out = "time_index,count\n";
    for (std::size_t t = 0; t < counts.size(); ++t)
        out += std::to_string(t) + "," + std::to_string(counts[t]) + "\n";
    return out;
}

std::string electrode_scores_to_text(const std::vector<std::string>& channel_names,
                                     const std::vector<double>& scores) {
    if (channel_names.size() != scores.size())
        throw ShapeError("channel name count " + std::to_string(channel_names.size()) +
                         " does not match score count " + std::to_string(scores.size()));
    std::string out = "channel,score\n";
    char line[128];
    for (std::size_t c = 0; c < scores.size(); ++c) {
        std::snprintf(line, sizeof(line), "%s,%.6f\n", channel_names[c].c_str(), scores[c]);
        out += line;
    }
    return out;
}

std::string band_table_to_text(const std::vector<BandComparison>& rows) {
    std::string out = "band,mean_a,se_a,mean_b,se_b,t,df,p\n";
    char line[256];
    for (const BandComparison& r : rows) {
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%g,%.6g\n", r.band.c_str(),
                      r.mean_a, r.se_a, r.mean_b, r.se_b, r.test.t, r.test.df, r.test.p);
        out += line;
    }
    return out;
}

}  // namespace naln
