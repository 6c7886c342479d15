#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bioembed {

struct WindowEmbedding {
    double start_s = 0.0;
    Eigen::MatrixXd spatial;  // d x cells (cell = t * grid_f + f)
    Eigen::VectorXd mean;     // d
};

struct RecordingEmbeddings {
    std::string recording_id;
    std::vector<WindowEmbedding> windows;

    // Mean of the per-window E_A vectors.
    Eigen::VectorXd averaged_mean() const;
};

// Binary container, little-endian throughout:
//   "BEK1" | u32 version | u32 d | u32 grid_t | u32 grid_f | u64 model checksum
//   | f64 stride_s | u64 record count
//   then per record: u32 id length | id bytes | u32 window count
//   and per window: f64 start_s | d * cells f32 (E_S, cell-major) | d f32 (E_A).
// Embedding values are stored as float32.
struct EmbeddingsFile {
    static constexpr std::uint32_t kVersion = 1;
    int d = 0;
    int grid_t = 0;
    int grid_f = 0;
    std::uint64_t model_checksum = 0;
    double stride_s = 0.0;
    std::vector<RecordingEmbeddings> records;

    bool operator==(const EmbeddingsFile& other) const;
};

std::string serialize_embeddings(const EmbeddingsFile& file);
EmbeddingsFile parse_embeddings(const std::string& bytes);

void write_embeddings(const std::filesystem::path& path, const EmbeddingsFile& file);
EmbeddingsFile read_embeddings(const std::filesystem::path& path);

}  // namespace bioembed
