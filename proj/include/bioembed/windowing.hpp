#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bioembed/audio.hpp"
#include "bioembed/peaks.hpp"
#include "bioembed/rng.hpp"

namespace bioembed {

inline constexpr double kWindowSeconds = 5.0;
inline constexpr double kPeakContextSeconds = 6.0;

struct WindowSpec {
    std::string recording_id;
    double start_s = 0.0;
    double duration_s = kWindowSeconds;

    bool operator==(const WindowSpec&) const = default;
};

enum class WindowStrategy { kRandom, kPeak };

WindowStrategy parse_window_strategy(const std::string& name);
std::string to_string(WindowStrategy s);

// Starts at 0, stride, 2*stride, ... while the window fits; a single window
// at 0 when the recording is shorter than a window; a final window flush
// with the end when strided coverage stops short.
std::vector<WindowSpec> enumerate_windows(double duration_s, double stride_s,
                                          double window_s = kWindowSeconds,
                                          const std::string& recording_id = {});

// Random strategy: uniform start in [0, dur - 5]. Peak strategy: a uniformly
// chosen candidate's 6 s context (clamped; the first 6 s when there are no
// candidates), then a uniform 5 s sub-window. `peaks` may carry candidates
// computed earlier for the same audio.
WindowSpec select_training_window(const std::string& recording_id, const AudioBuffer& audio,
                                  WindowStrategy strategy, Rng& rng,
                                  const std::vector<PeakCandidate>* peaks = nullptr);

// Exactly duration_s * rate samples starting at start_s, zero-padded past the end.
AudioBuffer extract_window(const AudioBuffer& audio, double start_s, double duration_s = kWindowSeconds);

}  // namespace bioembed
