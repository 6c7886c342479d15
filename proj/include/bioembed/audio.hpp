#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace bioembed {

inline constexpr int kModelSampleRate = 32000;

// Mono audio. After decode_and_resample the rate is always kModelSampleRate
// and samples lie in [-1, 1].
struct AudioBuffer {
    std::vector<float> samples;
    int sample_rate = kModelSampleRate;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

// Interleaved multichannel PCM as stored in the file, scaled to float.
struct WavData {
    std::vector<float> interleaved;
    int sample_rate = 0;
    int channels = 0;
};

enum class WavEncoding { kPcm16, kPcm24, kPcm32, kFloat32 };

WavData read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, std::span<const float> interleaved,
               int sample_rate, int channels = 1, WavEncoding encoding = WavEncoding::kPcm16);

std::vector<float> downmix(const WavData& wav);

// Kaiser-windowed sinc polyphase resampler (beta 8.6, 64 taps per phase
// at the lower of the two rates). Identity when the rates match.
std::vector<float> resample(std::span<const float> input, int source_rate, int target_rate);

AudioBuffer decode_and_resample(const std::filesystem::path& path,
                                int target_rate = kModelSampleRate);

}  // namespace bioembed
