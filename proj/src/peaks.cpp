#include "bioembed/peaks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bioembed/errors.hpp"

namespace bioembed {
namespace {

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    // A constant column must give its value back exactly, not a rounded sum.
    if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) return {v.front(), 0.0};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

// Linear-interpolated percentile of an unsorted range.
double percentile(std::vector<double> v, double per) {
    std::sort(v.begin(), v.end());
    const double idx = per / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(idx));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (idx - static_cast<double>(lo));
}

// Convolution with 'same' output length, centred like numpy's convolve.
std::vector<double> convolve_same(std::span<const double> x, const std::vector<double>& k) {
    const long n = static_cast<long>(x.size());
    const long m = static_cast<long>(k.size());
    const long full = n + m - 1;
    const long out_len = std::max(n, m);
    const long offset = (full - out_len) / 2;
    std::vector<double> out(static_cast<std::size_t>(out_len), 0.0);
    for (long i = 0; i < out_len; ++i) {
        const long f = i + offset;  // index into the full convolution
        const long j_lo = std::max(0L, f - (m - 1));
        const long j_hi = std::min(n - 1, f);
        double acc = 0.0;
        for (long j = j_lo; j <= j_hi; ++j) acc += x[j] * k[f - j];
        out[i] = acc;
    }
    return out;
}

struct Ridge {
    std::vector<int> rows;
    std::vector<int> cols;
    int gap = 0;
};

}  // namespace

FrontendConfig PeakFinderConfig::frontend() const {
    FrontendConfig fc;
    fc.window_len = window_len;
    fc.hop = hop;
    fc.fft_len = next_pow2(window_len);
    fc.mel_bins = mel_bins;
    fc.log_floor = log_floor;
    fc.output_scale = output_scale;
    return fc;
}

RowMatrix peak_mel(const AudioBuffer& audio, const PeakFinderConfig& cfg) {
    if (audio.samples.empty()) throw ValidationError("peak_mel: empty audio");
    LogMelFrontend frontend(cfg.frontend());
    if (audio.sample_rate != frontend.config().sample_rate) {
        throw ValidationError("peak_mel expects 32 kHz audio");
    }
    const int frames = static_cast<int>((audio.samples.size() + cfg.hop - 1) / cfg.hop);
    return frontend.compute(audio.samples, frames);
}

RowMatrix denoise_mel(const RowMatrix& spec, const PeakFinderConfig& cfg) {
    RowMatrix out = RowMatrix::Zero(spec.rows(), spec.cols());
    std::vector<double> column(static_cast<std::size_t>(spec.rows()));
    std::vector<double> kept;
    for (Eigen::Index b = 0; b < spec.cols(); ++b) {
        for (Eigen::Index t = 0; t < spec.rows(); ++t) column[t] = spec(t, b);
        const auto [m1, s1] = mean_std(column);
        kept.clear();
        for (double v : column) {
            if (!(v > m1 + cfg.discard_std * s1)) kept.push_back(v);
        }
        const auto [m2, s2] = mean_std(kept);
        const double threshold = m2 + cfg.signal_std * s2;
        for (Eigen::Index t = 0; t < spec.rows(); ++t) {
            if (column[t] > threshold) out(t, b) = column[t] - m2;
        }
    }
    return out;
}

std::vector<double> ricker(double points, double a) {
    const auto n = static_cast<std::size_t>(std::ceil(points));
    const double amp = 2.0 / (std::sqrt(3.0 * a) * std::pow(M_PI, 0.25));
    const double wsq = a * a;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) - (points - 1.0) / 2.0;
        const double xsq = x * x;
        out[i] = amp * (1.0 - xsq / wsq) * std::exp(-xsq / (2.0 * wsq));
    }
    return out;
}

std::vector<int> find_peaks_cwt(std::span<const double> signal, std::span<const double> widths,
                                const CwtPeakOptions& opts) {
    const int n = static_cast<int>(signal.size());
    const int rows = static_cast<int>(widths.size());
    if (n < 3 || rows == 0) return {};

    std::vector<std::vector<double>> cwt(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        const double points = std::min(10.0 * widths[r], static_cast<double>(n));
        auto wavelet = ricker(points, widths[r]);
        std::reverse(wavelet.begin(), wavelet.end());
        cwt[r] = convolve_same(signal, wavelet);
        cwt[r].resize(static_cast<std::size_t>(n));
    }

    // Strict local maxima along time; the endpoints never qualify.
    std::vector<std::vector<int>> maxima(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        for (int i = 1; i + 1 < n; ++i) {
            if (cwt[r][i] > cwt[r][i - 1] && cwt[r][i] > cwt[r][i + 1]) maxima[r].push_back(i);
        }
    }
    int start_row = -1;
    for (int r = rows - 1; r >= 0; --r) {
        if (!maxima[r].empty()) {
            start_row = r;
            break;
        }
    }
    if (start_row < 0) return {};

    // Link maxima from the widest scale down to the narrowest.
    std::vector<Ridge> active;
    std::vector<Ridge> finished;
    for (int c : maxima[start_row]) active.push_back({{start_row}, {c}, 0});
    for (int r = start_row - 1; r >= 0; --r) {
        const double max_distance = widths[r] / 4.0;
        for (auto& ridge : active) ++ridge.gap;
        std::vector<int> prev_cols;
        prev_cols.reserve(active.size());
        for (const auto& ridge : active) prev_cols.push_back(ridge.cols.back());
        for (int c : maxima[r]) {
            int closest = -1;
            int best = 0;
            for (std::size_t i = 0; i < prev_cols.size(); ++i) {
                const int d = std::abs(c - prev_cols[i]);
                if (closest < 0 || d < best) {
                    closest = static_cast<int>(i);
                    best = d;
                }
            }
            if (closest >= 0 && best <= max_distance) {
                auto& ridge = active[static_cast<std::size_t>(closest)];
                ridge.rows.push_back(r);
                ridge.cols.push_back(c);
                ridge.gap = 0;
            } else {
                active.push_back({{r}, {c}, 0});
            }
        }
        for (std::size_t i = active.size(); i-- > 0;) {
            if (active[i].gap > opts.max_gap) {
                finished.push_back(std::move(active[i]));
                active.erase(active.begin() + static_cast<long>(i));
            }
        }
    }
    for (auto& ridge : active) finished.push_back(std::move(ridge));

    // Noise floor: percentile of the narrowest-scale response in a sliding window.
    const int window = static_cast<int>(std::ceil(n / 20.0));
    const int half = window / 2;
    const int odd = window % 2;
    std::vector<double> noise(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(i - half, 0);
        const int hi = std::min(i + half + odd, n);
        noise[i] = percentile({cwt[0].begin() + lo, cwt[0].begin() + hi}, opts.noise_percentile);
    }

    std::vector<int> peaks;
    for (const auto& ridge : finished) {
        if (static_cast<double>(ridge.rows.size()) < opts.min_length) continue;
        // The narrowest-scale point of the ridge locates the peak.
        const std::size_t k = ridge.rows.size() - 1;
        const int row = ridge.rows[k];
        const int col = ridge.cols[k];
        const double snr = std::abs(cwt[row][col] / noise[col]);
        if (!(snr >= opts.min_snr)) continue;
        peaks.push_back(col);
    }
    std::sort(peaks.begin(), peaks.end());
    return peaks;
}

std::vector<double> summed_denoised_magnitude(const AudioBuffer& audio, const PeakFinderConfig& cfg) {
    const RowMatrix denoised = denoise_mel(peak_mel(audio, cfg), cfg);
    std::vector<double> summed(static_cast<std::size_t>(denoised.rows()));
    for (Eigen::Index t = 0; t < denoised.rows(); ++t) summed[t] = denoised.row(t).sum();
    return summed;
}

std::vector<PeakCandidate> find_energy_peaks(const AudioBuffer& audio, const PeakFinderConfig& cfg) {
    AudioBuffer padded = audio;
    const auto min_samples = static_cast<std::size_t>(cfg.min_duration_s * audio.sample_rate + 0.5);
    if (padded.samples.size() < min_samples) padded.samples.resize(min_samples, 0.0f);

    const std::vector<double> summed = summed_denoised_magnitude(padded, cfg);
    const double frame_rate = static_cast<double>(audio.sample_rate) / cfg.hop;
    std::vector<double> widths(static_cast<std::size_t>(cfg.num_widths));
    for (int i = 0; i < cfg.num_widths; ++i) {
        const double lo = cfg.min_width_s * frame_rate;
        const double hi = cfg.max_width_s * frame_rate;
        widths[i] = cfg.num_widths == 1 ? lo : lo + (hi - lo) * i / (cfg.num_widths - 1);
    }
    const std::vector<int> peaks = find_peaks_cwt(summed, widths);

    const double mean = std::accumulate(summed.begin(), summed.end(), 0.0) / static_cast<double>(summed.size());
    const int gate_frames = static_cast<int>(std::lround(cfg.gate_window_s * frame_rate));
    const int n = static_cast<int>(summed.size());
    std::vector<PeakCandidate> out;
    for (int p : peaks) {
        const int lo = std::max(0, p - gate_frames / 2);
        const int hi = std::min(n, p - gate_frames / 2 + gate_frames);
        double total = 0.0;
        for (int i = lo; i < hi; ++i) total += summed[i];
        // Both sides are 600 ms totals: the recording mean is scaled to the window length.
        if (total <= 0.0 || total < cfg.gate_factor * mean * (hi - lo)) continue;
        // Peak time is the centre of the analysis frame.
        const double t = (static_cast<double>(p) * cfg.hop + cfg.window_len / 2.0) / audio.sample_rate;
        out.push_back({t, total});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const PeakCandidate& a, const PeakCandidate& b) { return a.score > b.score; });
    if (static_cast<int>(out.size()) > cfg.max_peaks) out.resize(static_cast<std::size_t>(cfg.max_peaks));
    return out;
}

}  // namespace bioembed
