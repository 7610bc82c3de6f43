#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "naln/encoders.hpp"
#include "naln/evalstats.hpp"
#include "naln/tensor.hpp"

namespace naln {

struct AttributionMap {
    Tensor values;  // C x T, all entries in [0, 1]
    std::string source_layer;
    int epoch_id = -1;
    bool zero_gradient = false;  // set when the map degenerated to all zeros
};

struct Band {
    std::string name;
    double lo_hz = 0.0;
    double hi_hz = 0.0;  // half-open [lo, hi); the last band also takes hi
};

struct BandSpec {
    std::vector<Band> bands;

    // Delta/Theta/Alpha/Beta bands plus Gamma up to the Nyquist frequency
    static BandSpec eeg_default(double nyquist_hz);
    void validate(double nyquist_hz) const;
};

struct PSD {
    std::vector<double> frequencies;  // bin centers, spacing fs/N
    std::vector<double> power;        // one-sided, interior bins unfolded
};

// Sensitivity of the cosine match between encode(epoch) and target, read at
// the projection-layer input, clipped to positive values, min-max normalized,
// and linearly interpolated back onto the epoch grid.
AttributionMap gradcam(const EncoderParams& params, const Tensor& epoch, const Tensor& target,
                       int epoch_id = -1);

// Counts of map values strictly above the per-seed percentile threshold,
// pooled into one histogram over time indices.
std::vector<std::size_t> threshold_histogram(const std::vector<std::vector<AttributionMap>>& seeds,
                                             double percentile);
std::vector<std::size_t> threshold_histogram(const std::vector<AttributionMap>& maps,
                                             double percentile);

PSD periodogram(const std::vector<double>& x, double sample_rate_hz);

// fraction of total power per band; a probability vector over bands
std::vector<std::pair<std::string, double>> band_energies(const PSD& psd, const BandSpec& bands);

// mean attribution per channel across time and maps, normalized to sum 1
std::vector<double> electrode_aggregate(const std::vector<AttributionMap>& maps);

struct BandComparison {
    std::string band;
    double mean_a = 0.0, se_a = 0.0;
    double mean_b = 0.0, se_b = 0.0;
    TTestResult test;
};

// per-band unpaired comparison of per-seed band fractions
std::vector<BandComparison> band_compare(const std::vector<std::vector<double>>& energies_a,
                                         const std::vector<std::vector<double>>& energies_b,
                                         const std::vector<std::string>& band_names);

std::string histogram_to_csv(const std::vector<std::size_t>& counts);
std::string electrode_scores_to_text(const std::vector<std::string>& channel_names,
                                     const std::vector<double>& scores);
std::string band_table_to_text(const std::vector<BandComparison>& rows);

}  // namespace naln
