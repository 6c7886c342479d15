#include "bioembed/embeddings_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "bioembed/errors.hpp"

namespace bioembed {
namespace {

template <typename T>
void put(std::string& out, T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    const auto u = std::bit_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
        need(sizeof(T));
        U u = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) u |= U(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        return std::bit_cast<T>(u);
    }

    std::string take(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw ParseError("embeddings file is truncated");
    }
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

Eigen::VectorXd RecordingEmbeddings::averaged_mean() const {
    if (windows.empty()) throw ValidationError("recording '" + recording_id + "' has no windows");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(windows.front().mean.size());
    for (const auto& w : windows) acc += w.mean;
    return acc / static_cast<double>(windows.size());
}

bool EmbeddingsFile::operator==(const EmbeddingsFile& o) const {
    if (d != o.d || grid_t != o.grid_t || grid_f != o.grid_f || model_checksum != o.model_checksum ||
        stride_s != o.stride_s || records.size() != o.records.size()) {
        return false;
    }
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& a = records[r];
        const auto& b = o.records[r];
        if (a.recording_id != b.recording_id || a.windows.size() != b.windows.size()) return false;
        for (std::size_t w = 0; w < a.windows.size(); ++w) {
            if (a.windows[w].start_s != b.windows[w].start_s || a.windows[w].spatial != b.windows[w].spatial ||
                a.windows[w].mean != b.windows[w].mean) {
                return false;
            }
        }
    }
    return true;
}

std::string serialize_embeddings(const EmbeddingsFile& file) {
    const Eigen::Index cells = static_cast<Eigen::Index>(file.grid_t) * file.grid_f;
    std::string out = "BEK1";
    put(out, EmbeddingsFile::kVersion);
    put(out, static_cast<std::uint32_t>(file.d));
    put(out, static_cast<std::uint32_t>(file.grid_t));
    put(out, static_cast<std::uint32_t>(file.grid_f));
    put(out, file.model_checksum);
    put(out, file.stride_s);
    put(out, static_cast<std::uint64_t>(file.records.size()));
    for (const auto& rec : file.records) {
        put(out, static_cast<std::uint32_t>(rec.recording_id.size()));
        out += rec.recording_id;
        put(out, static_cast<std::uint32_t>(rec.windows.size()));
        for (const auto& w : rec.windows) {
            if (w.spatial.rows() != file.d || w.spatial.cols() != cells || w.mean.size() != file.d) {
                throw ValidationError("embeddings for '" + rec.recording_id + "' do not match the declared dims");
            }
            put(out, w.start_s);
            for (Eigen::Index c = 0; c < cells; ++c)
                for (Eigen::Index k = 0; k < file.d; ++k) put(out, static_cast<float>(w.spatial(k, c)));
            for (Eigen::Index k = 0; k < file.d; ++k) put(out, static_cast<float>(w.mean(k)));
        }
    }
    return out;
}

EmbeddingsFile parse_embeddings(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, "BEK1") != 0) throw ParseError("not an embeddings file (bad magic)");
    Reader in(bytes);
    in.take(4);
    const auto version = in.get<std::uint32_t>();
    if (version != EmbeddingsFile::kVersion) {
        throw ParseError("unsupported embeddings file version " + std::to_string(version));
    }
    EmbeddingsFile file;
    file.d = static_cast<int>(in.get<std::uint32_t>());
    file.grid_t = static_cast<int>(in.get<std::uint32_t>());
    file.grid_f = static_cast<int>(in.get<std::uint32_t>());
    file.model_checksum = in.get<std::uint64_t>();
    file.stride_s = in.get<double>();
    const auto count = in.get<std::uint64_t>();
    const Eigen::Index cells = static_cast<Eigen::Index>(file.grid_t) * file.grid_f;
    for (std::uint64_t r = 0; r < count; ++r) {
        RecordingEmbeddings rec;
        rec.recording_id = in.take(in.get<std::uint32_t>());
        const auto windows = in.get<std::uint32_t>();
        for (std::uint32_t w = 0; w < windows; ++w) {
            WindowEmbedding we;
            we.start_s = in.get<double>();
            we.spatial.resize(file.d, cells);
            for (Eigen::Index c = 0; c < cells; ++c)
                for (Eigen::Index k = 0; k < file.d; ++k) we.spatial(k, c) = in.get<float>();
            we.mean.resize(file.d);
            for (Eigen::Index k = 0; k < file.d; ++k) we.mean(k) = in.get<float>();
            rec.windows.push_back(std::move(we));
        }
        file.records.push_back(std::move(rec));
    }
    if (!in.done()) throw ParseError("trailing bytes after the last embeddings record");
    return file;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingsFile& file) {
    const std::string bytes = serialize_embeddings(file);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write embeddings file: " + path.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

EmbeddingsFile read_embeddings(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open embeddings file: " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_embeddings(bytes);
}

}  // namespace bioembed
