#pragma once

#include <span>
#include <vector>

#include "bioembed/audio.hpp"
#include "bioembed/frontend.hpp"

namespace bioembed {

struct PeakCandidate {
    double time_s = 0.0;
    // Sum of the frequency-summed denoised magnitude over the 600 ms around the peak.
    double score = 0.0;
};

// Settings of the energy-peak heuristic used for training-window selection.
struct PeakFinderConfig {
    int window_len = 2560;  // 80 ms
    int hop = 320;          // 10 ms
    double log_floor = 0.01;
    double output_scale = 0.1;
    int mel_bins = 128;
    double discard_std = 1.5;
    double signal_std = 0.75;
    double min_width_s = 0.5;
    double max_width_s = 2.0;
    int num_widths = 10;
    double gate_window_s = 0.6;
    double gate_factor = 1.5;
    int max_peaks = 5;
    double min_duration_s = 6.0;

    FrontendConfig frontend() const;
};

// Log-mel with an 80 ms window and 10 ms hop; ceil(samples / hop) frames.
RowMatrix peak_mel(const AudioBuffer& audio, const PeakFinderConfig& cfg = {});

// Two-step per-bin denoising: drop values above mean + 1.5 std, recompute
// mean/std on the survivors, keep values above mean2 + 0.75 std2 shifted by
// -mean2, zero elsewhere.
RowMatrix denoise_mel(const RowMatrix& spec, const PeakFinderConfig& cfg = {});

// Ricker (Mexican hat) wavelet sampled at `points` positions, width `a`.
std::vector<double> ricker(double points, double a);

struct CwtPeakOptions {
    double max_gap = 2.0;      // scales a ridge may skip before it is closed
    double min_length = 3.0;   // ridge rows required
    double min_snr = 1.0;
    double noise_percentile = 10.0;
};

// Continuous-wavelet-transform peak picking with ridge-line linking.
// Returns peak indices in ascending order.
std::vector<int> find_peaks_cwt(std::span<const double> signal, std::span<const double> widths,
                                const CwtPeakOptions& opts = {});

// Frequency-summed denoised magnitude, one value per peak-mel frame.
std::vector<double> summed_denoised_magnitude(const AudioBuffer& audio, const PeakFinderConfig& cfg = {});

// Up to `max_peaks` gated candidates, score descending. Audio shorter than
// min_duration_s is zero-padded first.
std::vector<PeakCandidate> find_energy_peaks(const AudioBuffer& audio, const PeakFinderConfig& cfg = {});

}  // namespace bioembed
