#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "naln/tensor.hpp"

namespace naln {

// Continuous multichannel recording with stimulus onset events.
struct Recording {
    std::vector<std::string> channel_names;            // length C
    Tensor samples;                                    // C×T_total
    double sample_rate_hz = 0.0;
    std::vector<std::pair<std::size_t, int>> events;   // (onset sample, label id)

    std::size_t channel_count() const { return samples.rank() == 2 ? samples.dim(0) : 0; }
    std::size_t sample_count() const { return samples.rank() == 2 ? samples.dim(1) : 0; }
    void validate() const;
};

// Stimulus-locked fixed-length windows, one label per epoch.
struct EpochSet {
    Tensor epochs;                       // n×C×T
    double sample_rate_hz = 0.0;
    std::vector<int> labels;             // length n
    std::vector<int> repetition_index;   // length n

    std::size_t count() const { return epochs.rank() == 3 ? epochs.dim(0) : 0; }
    std::size_t channels() const { return epochs.rank() == 3 ? epochs.dim(1) : 0; }
    std::size_t samples() const { return epochs.rank() == 3 ? epochs.dim(2) : 0; }
    Tensor epoch(std::size_t i) const;   // copies out one C×T slice
    void validate() const;
};

// Zero-phase FIR band-pass (Hamming windowed sinc, forward-backward).
// 0 <= lo_hz < hi_hz < Nyquist; lo_hz > 0 removes DC exactly.
Recording bandpass_filter(const Recording& rec, double lo_hz, double hi_hz);

// Anti-alias low-pass at 0.4·target_hz, then decimate by the integer factor
// sample_rate/target. Event onsets rescale by the factor (floor). Factor 1 is
// the identity.
Recording downsample(const Recording& rec, double target_hz);

// One epoch per event over [start_ms, end_ms) relative to onset.
// T = round((end-start)/1000 · fs). start_ms may be negative.
EpochSet epoch_extract(const Recording& rec, double start_ms, double end_ms);

// Subtracts each channel's mean over its supplied pre-stimulus window.
// pre_windows: n×C×P tensor, P = round(pre_ms/1000 · fs).
EpochSet baseline_correct(const EpochSet& epochs, double pre_ms, const Tensor& pre_windows);

// Arithmetic mean over repetitions of each label; output labels ordered by
// first occurrence.
EpochSet average_repetitions(const EpochSet& epochs);

// Multiplies every epoch by Σ^(-1/2), Σ = (1-shrinkage)·pooled channel
// covariance + shrinkage·diag(variances). Eigenvalues floored at 1e-10;
// anything at the floor reports as singular.
EpochSet whiten(const EpochSet& epochs, double shrinkage = 0.1);

}  // namespace naln
