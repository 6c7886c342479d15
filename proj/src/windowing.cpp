#include "bioembed/windowing.hpp"

#include <algorithm>
#include <cmath>

#include "bioembed/errors.hpp"

namespace bioembed {
namespace {
constexpr double kEps = 1e-9;
}

WindowStrategy parse_window_strategy(const std::string& name) {
    if (name == "random") return WindowStrategy::kRandom;
    if (name == "peak") return WindowStrategy::kPeak;
    throw UsageError("unknown window strategy '" + name + "' (expected random|peak)");
}

std::string to_string(WindowStrategy s) { return s == WindowStrategy::kRandom ? "random" : "peak"; }

std::vector<WindowSpec> enumerate_windows(double duration_s, double stride_s, double window_s,
                                          const std::string& recording_id) {
    if (!(duration_s > 0.0) || !(stride_s > 0.0)) {
        throw ValidationError("enumerate_windows: duration and stride must be positive");
    }
    std::vector<WindowSpec> out;
    if (duration_s < window_s - kEps) {
        out.push_back({recording_id, 0.0, window_s});
        return out;
    }
    for (long i = 0;; ++i) {
        const double start = static_cast<double>(i) * stride_s;
        if (start + window_s > duration_s + kEps) break;
        out.push_back({recording_id, start, window_s});
    }
    const double covered = out.back().start_s + window_s;
    if (covered < duration_s - kEps) out.push_back({recording_id, duration_s - window_s, window_s});
    return out;
}

WindowSpec select_training_window(const std::string& recording_id, const AudioBuffer& audio,
                                  WindowStrategy strategy, Rng& rng,
                                  const std::vector<PeakCandidate>* peaks) {
    const double dur = audio.duration_s();
    WindowSpec spec{recording_id, 0.0, kWindowSeconds};
    if (strategy == WindowStrategy::kRandom) {
        if (dur > kWindowSeconds) spec.start_s = uniform01(rng) * (dur - kWindowSeconds);
        return spec;
    }

    std::vector<PeakCandidate> local;
    if (peaks == nullptr) {
        local = find_energy_peaks(audio);
        peaks = &local;
    }
    const double padded = std::max(dur, kPeakContextSeconds);
    double context_start = 0.0;
    if (!peaks->empty()) {
        const auto pick = std::uniform_int_distribution<std::size_t>(0, peaks->size() - 1)(rng);
        const double centre = (*peaks)[pick].time_s;
        context_start = std::clamp(centre - kPeakContextSeconds / 2.0, 0.0, padded - kPeakContextSeconds);
    }
    spec.start_s = context_start + uniform01(rng) * (kPeakContextSeconds - kWindowSeconds);
    return spec;
}

AudioBuffer extract_window(const AudioBuffer& audio, double start_s, double duration_s) {
    AudioBuffer out;
    out.sample_rate = audio.sample_rate;
    const auto count = static_cast<std::size_t>(std::lround(duration_s * audio.sample_rate));
    const auto first = static_cast<std::size_t>(std::max(0L, std::lround(start_s * audio.sample_rate)));
    out.samples.assign(count, 0.0f);
    if (first < audio.samples.size()) {
        const std::size_t n = std::min(count, audio.samples.size() - first);
        std::copy_n(audio.samples.begin() + static_cast<long>(first), n, out.samples.begin());
    }
    return out;
}

}  // namespace bioembed
