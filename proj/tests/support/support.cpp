#include "support.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace testsupport {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(++counter));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::vector<float> sine(double freq_hz, double seconds, int rate, double amplitude, double phase) {
    const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
    std::vector<float> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = static_cast<float>(amplitude * std::sin(2.0 * M_PI * freq_hz * i / rate + phase));
    }
    return x;
}

std::vector<float> white_noise(std::size_t n, double rms_level, bioembed::Rng& rng) {
    std::normal_distribution<double> g(0.0, rms_level);
    std::vector<float> x(n);
    for (auto& v : x) v = static_cast<float>(g(rng));
    return x;
}

double rms(const std::vector<float>& x) {
    double s = 0.0;
    for (float v : x) s += static_cast<double>(v) * v;
    return x.empty() ? 0.0 : std::sqrt(s / x.size());
}

bioembed::AudioBuffer buffer(std::vector<float> samples, int rate) {
    bioembed::AudioBuffer b;
    b.samples = std::move(samples);
    b.sample_rate = rate;
    return b;
}

Eigen::MatrixXd reference_logmel(const std::vector<float>& samples, int frames) {
    const int sr = 32000, win = 640, hop = 320, nfft = 1024, bins = 128;
    const int nk = nfft / 2 + 1;
    const double fmin = 60.0, fmax = 16000.0;

    auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
    auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
    std::vector<double> pts(bins + 2);
    for (int i = 0; i < bins + 2; ++i) pts[i] = hz(mel(fmin) + (mel(fmax) - mel(fmin)) * i / (bins + 1));
    pts.front() = fmin;
    pts.back() = fmax;
    Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(bins, nk);
    for (int m = 0; m < bins; ++m) {
        for (int k = 0; k < nk; ++k) {
            const double f = k * static_cast<double>(sr) / nfft;
            if (f > pts[m] && f < pts[m + 2]) {
                fb(m, k) = f <= pts[m + 1] ? (f - pts[m]) / (pts[m + 1] - pts[m])
                                           : (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1]);
            }
        }
    }

    Eigen::VectorXd w(win);
    for (int i = 0; i < win; ++i) w[i] = std::pow(std::sin(M_PI * i / win), 2);
    Eigen::MatrixXd re(nk, win), im(nk, win);
    for (int k = 0; k < nk; ++k) {
        for (int i = 0; i < win; ++i) {
            const double a = 2.0 * M_PI * static_cast<double>((static_cast<long>(k) * i) % nfft) / nfft;
            re(k, i) = std::cos(a) * w[i];
            im(k, i) = -std::sin(a) * w[i];
        }
    }
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(win, frames);
    for (int t = 0; t < frames; ++t) {
        for (int i = 0; i < win; ++i) {
            const std::size_t idx = static_cast<std::size_t>(t) * hop + i;
            if (idx < samples.size()) x(i, t) = samples[idx];
        }
    }
    const Eigen::MatrixXd mag = ((re * x).array().square() + (im * x).array().square()).sqrt() / w.sum();
    const Eigen::MatrixXd m = fb * mag;
    return (0.1 * m.array().max(1e-5).log()).matrix().transpose();
}

std::vector<float> render_recording(const Voice& voice, double seconds, bioembed::Rng& rng, double call_rms,
                                    double noise_rms, std::vector<CallSpan>* calls) {
    const int sr = 32000;
    auto out = white_noise(static_cast<std::size_t>(std::llround(seconds * sr)), noise_rms, rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double t = u(rng) * voice.gap_s;
    const double amp = 2.0 * call_rms;
    while (t + voice.call_s <= seconds) {
        const double f0 = voice.carrier_hz * (1.0 + voice.jitter * (2.0 * u(rng) - 1.0));
        const double am_phase = 2.0 * M_PI * u(rng);
        const double level = amp * (0.7 + 0.6 * u(rng));
        const auto start = static_cast<std::size_t>(t * sr);
        const auto len = static_cast<std::size_t>(voice.call_s * sr);
        double phase = 2.0 * M_PI * u(rng);
        for (std::size_t i = 0; i < len && start + i < out.size(); ++i) {
            const double tau = static_cast<double>(i) / sr;
            const double frac = static_cast<double>(i) / len;
            const double f = f0 + voice.sweep_hz * (frac - 0.5);
            phase += 2.0 * M_PI * f / sr;
            double env = std::pow(std::sin(M_PI * frac), 2);
            if (voice.am_hz > 0) env *= 0.5 * (1.0 + std::sin(2.0 * M_PI * voice.am_hz * tau + am_phase));
            out[start + i] += static_cast<float>(level * env * std::sin(phase));
        }
        if (calls) calls->push_back({t, t + voice.call_s});
        t += voice.call_s + voice.gap_s * (0.5 + u(rng));
    }
    for (auto& v : out) v = std::clamp(v, -1.0f, 1.0f);
    return out;
}

std::vector<SyntheticRecording> make_corpus(const CorpusSpec& spec) {
    std::vector<SyntheticRecording> recs;
    for (std::size_t s = 0; s < spec.species.size(); ++s) {
        for (int i = 0; i < spec.train_per_species + spec.eval_per_species; ++i) {
            const bool train = i < spec.train_per_species;
            auto rng = bioembed::stream(spec.seed, spec.species[s], static_cast<std::uint64_t>(i));
            std::uniform_real_distribution<double> len(spec.min_s, spec.max_s);
            const double seconds = std::round(len(rng) * 100.0) / 100.0;
            std::vector<CallSpan> calls;
            SyntheticRecording r;
            r.audio = buffer(render_recording(spec.voices[s], seconds, rng, spec.call_rms, spec.noise_rms, &calls));
            r.meta.recording_id = spec.species[s] + "_" + std::to_string(i);
            r.meta.path = r.meta.recording_id + ".wav";
            r.meta.labels = {spec.species[s]};
            r.meta.dataset = "synthetic";
            r.meta.split = train ? bioembed::Split::kTrain : bioembed::Split::kEval;
            if (!train) {
                std::vector<bioembed::AnnotationSpan> spans;
                for (const auto& c : calls) spans.push_back({c.start_s, c.end_s, spec.species[s]});
                r.meta.annotations = spans;
            }
            recs.push_back(std::move(r));
        }
    }
    return recs;
}

fs::path write_corpus(const fs::path& dir, const std::string& name, const std::vector<SyntheticRecording>& recs) {
    fs::create_directories(dir);
    std::vector<bioembed::RecordingMeta> metas;
    for (const auto& r : recs) {
        bioembed::write_wav(dir / r.meta.path, r.audio.samples, r.audio.sample_rate, 1,
                            bioembed::WavEncoding::kFloat32);
        metas.push_back(r.meta);
    }
    const fs::path manifest = dir / (name + ".jsonl");
    bioembed::write_manifest(manifest, metas);
    return manifest;
}

bioembed::TrainingCorpus training_corpus(const std::vector<SyntheticRecording>& recs,
                                         const bioembed::LabelVocabulary& vocab) {
    bioembed::TrainingCorpus corpus;
    corpus.vocab = vocab;
    for (const auto& r : recs) {
        if (r.meta.split != bioembed::Split::kTrain) continue;
        bioembed::TrainingExample ex;
        ex.recording_id = r.meta.recording_id;
        ex.audio = r.audio;
        for (const auto& l : r.meta.labels) ex.classes.push_back(vocab.id(l));
        ex.source_id = static_cast<int>(corpus.examples.size());
        corpus.examples.push_back(std::move(ex));
    }
    return corpus;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace testsupport
