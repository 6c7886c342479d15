#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bioembed/audio.hpp"

namespace bioembed {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FrontendConfig {
    int sample_rate = 32000;
    int window_len = 640;  // 20 ms
    int hop = 320;         // 10 ms
    int fft_len = 1024;
    int mel_bins = 128;
    double fmin = 60.0;
    double fmax = 16000.0;
    double log_floor = 1e-5;  // natural log
    double output_scale = 0.1;
    double window_s = 5.0;  // input length for compute_logmel

    int window_samples() const { return static_cast<int>(window_s * sample_rate + 0.5); }
    int num_frames() const { return (window_samples() + hop - 1) / hop; }
    void validate() const;
};

// Frames x mel bins, 100 frames per second at the default hop.
struct LogMelSpectrogram {
    RowMatrix values;
    double frame_rate = 100.0;

    int frames() const { return static_cast<int>(values.rows()); }
    int bins() const { return static_cast<int>(values.cols()); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular HTK-mel filters with unit peak, one row per mel bin, one column
// per rfft bin (fft_len / 2 + 1 columns).
RowMatrix mel_filterbank(int mel_bins, int fft_len, int sample_rate, double fmin, double fmax);

// Centre frequencies (Hz) of the filters above.
std::vector<double> mel_center_frequencies(int mel_bins, double fmin, double fmax);

// Reusable log-mel engine. Uncentered periodic-Hann STFT zero-padded to
// fft_len, magnitude scaled by 1 / sum(window), mel projection, natural
// log with floor, output scale. Frames past the end of the input read zeros.
class LogMelFrontend {
public:
    explicit LogMelFrontend(const FrontendConfig& cfg);
    ~LogMelFrontend();
    LogMelFrontend(const LogMelFrontend&) = delete;
    LogMelFrontend& operator=(const LogMelFrontend&) = delete;

    const FrontendConfig& config() const { return cfg_; }

    // Exactly `frames` frames, the first starting at sample 0.
    RowMatrix compute(std::span<const float> samples, int frames);

    // The fixed-length model input; throws ValidationError on wrong length or rate.
    LogMelSpectrogram operator()(const AudioBuffer& audio);

private:
    struct Plan;
    FrontendConfig cfg_;
    std::vector<double> window_;
    double window_sum_ = 0.0;
    // Sparse filterbank: for each mel bin, first rfft bin and its weights.
    std::vector<int> filter_start_;
    std::vector<std::vector<double>> filter_weights_;
    std::unique_ptr<Plan> plan_;
};

LogMelSpectrogram compute_logmel(const AudioBuffer& audio, const FrontendConfig& cfg = {});

}  // namespace bioembed
