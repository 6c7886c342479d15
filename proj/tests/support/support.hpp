#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bioembed/audio.hpp"
#include "bioembed/manifest.hpp"
#include "bioembed/rng.hpp"
#include "bioembed/train.hpp"

namespace testsupport {

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "bioembed");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::vector<float> sine(double freq_hz, double seconds, int rate = 32000, double amplitude = 1.0,
                        double phase = 0.0);
std::vector<float> white_noise(std::size_t n, double rms, bioembed::Rng& rng);
double rms(const std::vector<float>& x);
bioembed::AudioBuffer buffer(std::vector<float> samples, int rate = 32000);

// Straightforward log-mel: dense DFT matrix, filters rebuilt from the mel
// formula, frames read zeros past the input.
Eigen::MatrixXd reference_logmel(const std::vector<float>& samples, int frames = 500);

// One synthetic call type. Each call is a Hann-enveloped tone that sweeps
// linearly by sweep_hz around carrier_hz and is amplitude-modulated at am_hz.
struct Voice {
    double carrier_hz = 2000.0;
    double sweep_hz = 0.0;
    double am_hz = 0.0;
    double call_s = 0.4;
    double gap_s = 0.6;       // mean silence between calls
    double jitter = 0.03;     // relative carrier jitter per call
};

struct CallSpan {
    double start_s = 0.0;
    double end_s = 0.0;
};

// Background noise at noise_rms plus calls of `voice` at call_rms.
std::vector<float> render_recording(const Voice& voice, double seconds, bioembed::Rng& rng,
                                    double call_rms = 0.1, double noise_rms = 0.01,
                                    std::vector<CallSpan>* calls = nullptr);

struct SyntheticRecording {
    bioembed::RecordingMeta meta;
    bioembed::AudioBuffer audio;
};

struct CorpusSpec {
    std::vector<std::string> species;
    std::vector<Voice> voices;
    int train_per_species = 40;
    int eval_per_species = 10;
    double min_s = 3.0;
    double max_s = 30.0;
    double call_rms = 0.1;
    double noise_rms = 0.01;
    std::uint64_t seed = 1;
};

// Train and eval recordings with labels; eval recordings carry their calls as annotations.
std::vector<SyntheticRecording> make_corpus(const CorpusSpec& spec);

// Writes WAVs and a manifest; returns the manifest path.
std::filesystem::path write_corpus(const std::filesystem::path& dir, const std::string& name,
                                   const std::vector<SyntheticRecording>& recs);

bioembed::TrainingCorpus training_corpus(const std::vector<SyntheticRecording>& recs,
                                         const bioembed::LabelVocabulary& vocab);

std::string read_file(const std::filesystem::path& p);

}  // namespace testsupport
