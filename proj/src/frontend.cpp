#include "bioembed/frontend.hpp"

#include <algorithm>
#include <cmath>

#include <fftw3.h>

#include "bioembed/errors.hpp"

namespace bioembed {

struct LogMelFrontend::Plan {
    explicit Plan(int n) : n(n) {
        in = fftw_alloc_real(static_cast<std::size_t>(n));
        out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
        // ESTIMATE keeps the chosen algorithm, and hence the bits, stable across runs.
        plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    }
    ~Plan() {
        fftw_destroy_plan(plan);
        fftw_free(in);
        fftw_free(out);
    }
    int n;
    double* in;
    fftw_complex* out;
    fftw_plan plan;
};

void FrontendConfig::validate() const {
    if (sample_rate <= 0 || window_len <= 0 || hop <= 0 || mel_bins <= 0) {
        throw ValidationError("frontend sizes must be positive");
    }
    if (fft_len < window_len) throw ValidationError("fft_len must be >= window_len");
    if (fmax > sample_rate / 2.0) throw ValidationError("fmax must not exceed the Nyquist frequency");
    if (!(fmin >= 0.0 && fmin < fmax)) throw ValidationError("need 0 <= fmin < fmax");
    if (!(log_floor > 0.0)) throw ValidationError("log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges(int mel_bins, double fmin, double fmax) {
    const double lo = hz_to_mel(fmin);
    const double hi = hz_to_mel(fmax);
    std::vector<double> edges(static_cast<std::size_t>(mel_bins) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / (mel_bins + 1));
    }
    edges.front() = fmin;
    edges.back() = fmax;
    return edges;
}

}  // namespace

std::vector<double> mel_center_frequencies(int mel_bins, double fmin, double fmax) {
    auto edges = mel_edges(mel_bins, fmin, fmax);
    return {edges.begin() + 1, edges.end() - 1};
}

RowMatrix mel_filterbank(int mel_bins, int fft_len, int sample_rate, double fmin, double fmax) {
    const int n_bins = fft_len / 2 + 1;
    const auto edges = mel_edges(mel_bins, fmin, fmax);
    RowMatrix fb = RowMatrix::Zero(mel_bins, n_bins);
    for (int m = 0; m < mel_bins; ++m) {
        const double left = edges[m];
        const double center = edges[m + 1];
        const double right = edges[m + 2];
        for (int k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / fft_len;
            const double up = (f - left) / (center - left);
            const double down = (right - f) / (right - center);
            fb(m, k) = std::max(0.0, std::min(up, down));
        }
    }
    return fb;
}

LogMelFrontend::LogMelFrontend(const FrontendConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    window_.resize(static_cast<std::size_t>(cfg_.window_len));
    for (int n = 0; n < cfg_.window_len; ++n) {
        window_[n] = 0.5 - 0.5 * std::cos(2.0 * M_PI * n / cfg_.window_len);
        window_sum_ += window_[n];
    }
    const RowMatrix fb = mel_filterbank(cfg_.mel_bins, cfg_.fft_len, cfg_.sample_rate, cfg_.fmin, cfg_.fmax);
    filter_start_.resize(static_cast<std::size_t>(cfg_.mel_bins));
    filter_weights_.resize(static_cast<std::size_t>(cfg_.mel_bins));
    for (int m = 0; m < cfg_.mel_bins; ++m) {
        int first = -1;
        int last = -1;
        for (int k = 0; k < fb.cols(); ++k) {
            if (fb(m, k) > 0.0) {
                if (first < 0) first = k;
                last = k;
            }
        }
        if (first < 0) {
            filter_start_[m] = 0;
            continue;
        }
        filter_start_[m] = first;
        filter_weights_[m].assign(fb.row(m).data() + first, fb.row(m).data() + last + 1);
    }
    plan_ = std::make_unique<Plan>(cfg_.fft_len);
}

LogMelFrontend::~LogMelFrontend() = default;

RowMatrix LogMelFrontend::compute(std::span<const float> samples, int frames) {
    const int n_bins = cfg_.fft_len / 2 + 1;
    const long n = static_cast<long>(samples.size());
    const double inv_sum = 1.0 / window_sum_;
    std::vector<double> mag(static_cast<std::size_t>(n_bins));
    RowMatrix out(frames, cfg_.mel_bins);

    double* in = plan_->in;
    std::fill(in, in + cfg_.fft_len, 0.0);
    for (int t = 0; t < frames; ++t) {
        const long start = static_cast<long>(t) * cfg_.hop;
        for (int i = 0; i < cfg_.window_len; ++i) {
            const long idx = start + i;
            in[i] = idx < n ? window_[i] * samples[idx] : 0.0;
        }
        fftw_execute(plan_->plan);
        for (int k = 0; k < n_bins; ++k) {
            const double re = plan_->out[k][0];
            const double im = plan_->out[k][1];
            mag[k] = std::sqrt(re * re + im * im) * inv_sum;
        }
        for (int m = 0; m < cfg_.mel_bins; ++m) {
            const auto& w = filter_weights_[m];
            const double* x = mag.data() + filter_start_[m];
            double acc = 0.0;
            for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * x[j];
            out(t, m) = cfg_.output_scale * std::log(std::max(acc, cfg_.log_floor));
        }
    }
    return out;
}

LogMelSpectrogram LogMelFrontend::operator()(const AudioBuffer& audio) {
    if (audio.sample_rate != cfg_.sample_rate) {
        throw ValidationError("frontend expects " + std::to_string(cfg_.sample_rate) + " Hz audio, got " +
                              std::to_string(audio.sample_rate));
    }
    if (static_cast<int>(audio.samples.size()) != cfg_.window_samples()) {
        throw ValidationError("frontend expects " + std::to_string(cfg_.window_samples()) +
                              " samples, got " + std::to_string(audio.samples.size()));
    }
    LogMelSpectrogram spec;
    spec.values = compute(audio.samples, cfg_.num_frames());
    spec.frame_rate = static_cast<double>(cfg_.sample_rate) / cfg_.hop;
    return spec;
}

LogMelSpectrogram compute_logmel(const AudioBuffer& audio, const FrontendConfig& cfg) {
    LogMelFrontend frontend(cfg);
    return frontend(audio);
}

}  // namespace bioembed
