#include "bioembed/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "bioembed/errors.hpp"

namespace bioembed {
namespace {

constexpr double kKaiserBeta = 8.6;
constexpr int kTapsPerPhase = 64;
// Cutoff as a fraction of the lower Nyquist frequency.
constexpr double kCutoff = 0.94;

std::uint32_t read_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = M_PI * x;
    return std::sin(px) / px;
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open audio file: " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw ParseError("not a RIFF/WAVE file: " + path.string());
    }

    int format = -1;
    int channels = 0;
    int rate = 0;
    int bits = 0;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::size_t size = read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t available = std::min(size, bytes.size() - body);
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (available < 16) throw ParseError("truncated fmt chunk: " + path.string());
            format = read_u16(chunk + 8);
            channels = read_u16(chunk + 10);
            rate = static_cast<int>(read_u32(chunk + 12));
            bits = read_u16(chunk + 22);
            if (format == 0xFFFE) {
                if (available < 26) throw ParseError("truncated extensible fmt chunk");
                format = read_u16(chunk + 8 + 24);
            }
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = bytes.data() + body;
            data_size = available;
        }
        pos = body + size + (size & 1);
    }
    if (format < 0 || data == nullptr) throw ParseError("missing fmt or data chunk: " + path.string());
    if (channels < 1 || rate <= 0) throw ParseError("invalid channel count or rate: " + path.string());

    const bool pcm = format == 1 && (bits == 16 || bits == 24 || bits == 32);
    const bool ieee = format == 3 && bits == 32;
    if (!pcm && !ieee) {
        throw ParseError("unsupported codec (format " + std::to_string(format) + ", " +
                         std::to_string(bits) + " bits): " + path.string());
    }

    const std::size_t width = static_cast<std::size_t>(bits / 8);
    const std::size_t frames = data_size / (width * channels);
    if (frames == 0) throw ParseError("zero-length audio: " + path.string());

    WavData wav;
    wav.sample_rate = rate;
    wav.channels = channels;
    wav.interleaved.resize(frames * channels);
    for (std::size_t i = 0; i < wav.interleaved.size(); ++i) {
        const unsigned char* p = data + i * width;
        float v = 0.0f;
        if (ieee) {
            std::uint32_t u = read_u32(p);
            std::memcpy(&v, &u, sizeof v);
        } else if (bits == 16) {
            v = static_cast<float>(static_cast<std::int16_t>(read_u16(p)) / 32768.0);
        } else if (bits == 24) {
            std::int32_t s = std::int32_t(p[0]) | (std::int32_t(p[1]) << 8) | (std::int32_t(p[2]) << 16);
            if (s & 0x800000) s -= 0x1000000;
            v = static_cast<float>(s / 8388608.0);
        } else {
            v = static_cast<float>(static_cast<std::int32_t>(read_u32(p)) / 2147483648.0);
        }
        wav.interleaved[i] = v;
    }
    return wav;
}

void write_wav(const std::filesystem::path& path, std::span<const float> interleaved,
               int sample_rate, int channels, WavEncoding encoding) {
    const int bits = encoding == WavEncoding::kPcm16 ? 16 : encoding == WavEncoding::kPcm24 ? 24 : 32;
    const int width = bits / 8;
    const std::uint32_t data_size = static_cast<std::uint32_t>(interleaved.size() * width);

    std::string out;
    out.reserve(44 + data_size);
    out += "RIFF";
    put_u32(out, 36 + data_size);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, encoding == WavEncoding::kFloat32 ? 3 : 1);
    put_u16(out, static_cast<std::uint16_t>(channels));
    put_u32(out, static_cast<std::uint32_t>(sample_rate));
    put_u32(out, static_cast<std::uint32_t>(sample_rate * channels * width));
    put_u16(out, static_cast<std::uint16_t>(channels * width));
    put_u16(out, static_cast<std::uint16_t>(bits));
    out += "data";
    put_u32(out, data_size);

    for (float x : interleaved) {
        const double c = std::clamp(static_cast<double>(x), -1.0, 1.0);
        switch (encoding) {
            case WavEncoding::kPcm16: {
                const auto s = static_cast<std::int16_t>(std::clamp(std::lround(c * 32768.0), -32768L, 32767L));
                put_u16(out, static_cast<std::uint16_t>(s));
                break;
            }
            case WavEncoding::kPcm24: {
                const auto s = static_cast<std::int32_t>(std::clamp(std::lround(c * 8388608.0), -8388608L, 8388607L));
                out.push_back(static_cast<char>(s & 0xff));
                out.push_back(static_cast<char>((s >> 8) & 0xff));
                out.push_back(static_cast<char>((s >> 16) & 0xff));
                break;
            }
            case WavEncoding::kPcm32: {
                const auto s = static_cast<std::int32_t>(
                    std::clamp(std::llround(c * 2147483648.0), -2147483648LL, 2147483647LL));
                put_u32(out, static_cast<std::uint32_t>(s));
                break;
            }
            case WavEncoding::kFloat32: {
                std::uint32_t u;
                std::memcpy(&u, &x, sizeof u);
                put_u32(out, u);
                break;
            }
        }
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write audio file: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::vector<float> downmix(const WavData& wav) {
    const std::size_t frames = wav.interleaved.size() / wav.channels;
    std::vector<float> mono(frames);
    if (wav.channels == 1) {
        std::copy(wav.interleaved.begin(), wav.interleaved.begin() + frames, mono.begin());
        return mono;
    }
    for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (int c = 0; c < wav.channels; ++c) acc += wav.interleaved[i * wav.channels + c];
        mono[i] = static_cast<float>(acc / wav.channels);
    }
    return mono;
}

std::vector<float> resample(std::span<const float> input, int source_rate, int target_rate) {
    if (source_rate <= 0 || target_rate <= 0) throw ValidationError("sample rates must be positive");
    if (source_rate == target_rate) return {input.begin(), input.end()};

    const long g = std::gcd(source_rate, target_rate);
    const long up = target_rate / g;    // L
    const long down = source_rate / g;  // M
    // Cutoff relative to the input Nyquist frequency.
    const double fc = kCutoff * std::min(1.0, static_cast<double>(up) / down);
    const int half = static_cast<int>(std::ceil(kTapsPerPhase / 2.0 / std::min(1.0, double(up) / down)));
    const int taps = 2 * half;
    const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);

    // One filter per output phase; tap k multiplies input[base - half + 1 + k].
    std::vector<double> table(static_cast<std::size_t>(up) * taps);
    for (long phase = 0; phase < up; ++phase) {
        const double frac = static_cast<double>(phase) / up;
        double sum = 0.0;
        for (int k = 0; k < taps; ++k) {
            const double t = (k - half + 1) - frac;
            const double x = t / half;
            double w = 0.0;
            if (std::abs(x) <= 1.0) w = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - x * x)) / i0_beta;
            const double h = fc * sinc(fc * t) * w;
            table[phase * taps + k] = h;
            sum += h;
        }
        for (int k = 0; k < taps; ++k) table[phase * taps + k] /= sum;
    }

    const long n_in = static_cast<long>(input.size());
    const long n_out = (n_in * up + down - 1) / down;
    std::vector<float> out(static_cast<std::size_t>(n_out));
    for (long n = 0; n < n_out; ++n) {
        const long pos = n * down;
        const long base = pos / up;
        const long phase = pos % up;
        const double* h = &table[phase * taps];
        double acc = 0.0;
        const long first = base - half + 1;
        for (int k = 0; k < taps; ++k) {
            const long idx = first + k;
            if (idx >= 0 && idx < n_in) acc += h[k] * input[idx];
        }
        out[n] = static_cast<float>(acc);
    }
    return out;
}

AudioBuffer decode_and_resample(const std::filesystem::path& path, int target_rate) {
    const WavData wav = read_wav(path);
    AudioBuffer buf;
    buf.sample_rate = target_rate;
    buf.samples = resample(downmix(wav), wav.sample_rate, target_rate);
    for (float& s : buf.samples) s = std::clamp(s, -1.0f, 1.0f);
    if (buf.samples.empty()) throw ParseError("zero-length audio: " + path.string());
    return buf;
}

}  // namespace bioembed
