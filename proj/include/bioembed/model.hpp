#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bioembed/frontend.hpp"
#include "bioembed/rng.hpp"

namespace bioembed {

enum class PrototypeSimilarity { kDot, kCosine };

PrototypeSimilarity parse_similarity(const std::string& name);
std::string to_string(PrototypeSimilarity s);

struct ModelDims {
    int frames = 500;
    int mel_bins = 128;
    int grid_t = 5;
    int grid_f = 3;
    int hidden = 64;
    int d = 64;
    int num_classes = 1;
    int prototypes_per_class = 4;
    int source_rank = 16;
    int num_sources = 1;
    PrototypeSimilarity similarity = PrototypeSimilarity::kDot;

    int cells() const { return grid_t * grid_f; }
    int patch_frames() const { return frames / grid_t; }
    // Bins per grid column; the last column also takes the remainder.
    int column_bins() const { return mel_bins / grid_f; }
    int last_column_bins() const { return mel_bins - column_bins() * (grid_f - 1); }
    // Flattened patch length; narrower patches are zero-padded to this size.
    int patch_size() const { return patch_frames() * last_column_bins(); }
    void validate() const;
    bool operator==(const ModelDims&) const = default;
};

// Parameter blocks, in checkpoint order:
//   embed_w1 (hidden x patch), embed_b1 (hidden), embed_w2 (d x hidden), embed_b2 (d),
//   linear_w (C x d), linear_b (C), prototypes (C*4 x d, row c*4 + j),
//   source_w1 (r x d), source_w2 (S x r).
struct ModelParams {
    ModelDims dims;
    Eigen::MatrixXd embed_w1;
    Eigen::VectorXd embed_b1;
    Eigen::MatrixXd embed_w2;
    Eigen::VectorXd embed_b2;
    Eigen::MatrixXd linear_w;
    Eigen::VectorXd linear_b;
    Eigen::MatrixXd prototypes;
    Eigen::MatrixXd source_w1;
    Eigen::MatrixXd source_w2;
    // Bumped on every in-place update so stale traces can be detected.
    std::uint64_t version = 0;

    struct Block {
        std::string name;
        Eigen::Index rows;
        Eigen::Index cols;
        std::span<double> values;
    };
    std::vector<Block> blocks();
    std::vector<std::pair<std::string, std::span<const double>>> blocks() const;

    // Same shapes, all zeros, version 0.
    ModelParams zeros_like() const;
    std::size_t parameter_count() const;
};

ModelParams init_params(const ModelDims& dims, Rng& rng);

// Spatial embedding E_S (d x cells, cell = t * grid_f + f) and its mean E_A.
struct EmbeddingPair {
    Eigen::MatrixXd spatial;
    Eigen::VectorXd mean;

    auto cell(int t, int f, int grid_f) const { return spatial.col(t * grid_f + f); }
};

// Activations of one batched forward pass, enough for an exact backward.
struct ForwardTrace {
    std::uint64_t params_version = 0;
    int batch = 0;
    Eigen::MatrixXd patches;         // patch x (batch * cells)
    Eigen::MatrixXd hidden_pre;      // hidden x (batch * cells)
    Eigen::MatrixXd hidden;          // relu(hidden_pre)
    Eigen::MatrixXd spatial;         // d x (batch * cells), E_S
    Eigen::MatrixXd mean;            // d x batch, E_A
    Eigen::MatrixXd mean_heads;      // E_A after dropout, fed to linear and source heads
    Eigen::MatrixXd spatial_heads;   // E_S after dropout, fed to the prototype head
    Eigen::MatrixXd mean_mask;       // inverted-dropout factors; empty without dropout

    EmbeddingPair pair(int b, int cells) const;
};

// Dropout is active only when `rng` is supplied and rate > 0.
ForwardTrace embed_batch(std::span<const RowMatrix* const> specs, const ModelParams& params,
                         double dropout_rate = 0.0, Rng* rng = nullptr);

std::pair<EmbeddingPair, ForwardTrace> embed(const LogMelSpectrogram& spec, const ModelParams& params,
                                             double dropout_rate = 0.0, Rng* rng = nullptr);

Eigen::VectorXd linear_logits(const Eigen::VectorXd& mean, const ModelParams& params);

// Max activation over the class's prototypes and every spatial cell.
// `argmax` (optional) receives prototype * cells + cell per class; first index wins ties.
Eigen::VectorXd prototype_logits(const Eigen::MatrixXd& spatial, const ModelParams& params,
                                 std::vector<int>* argmax = nullptr);

Eigen::VectorXd source_logits(const Eigen::VectorXd& mean, const ModelParams& params);

// Logits of the three heads for every example in a trace (columns = examples).
struct HeadOutputs {
    Eigen::MatrixXd linear;     // C x batch
    Eigen::MatrixXd prototype;  // C x batch
    Eigen::MatrixXd source;     // S x batch
    std::vector<int> prototype_argmax;  // C * batch, column-major like `prototype`
};

HeadOutputs forward_heads(const ForwardTrace& trace, const ModelParams& params);

// dLoss/dlogits per head; an empty matrix means no gradient from that head.
struct HeadGradients {
    Eigen::MatrixXd linear;
    Eigen::MatrixXd prototype;
    Eigen::MatrixXd source;
};

// Reverse-mode gradients for every parameter block. Prototype-head gradients
// reach only the prototypes: the spatial embedding is behind a stop-gradient.
// Throws ValidationError when `trace` predates the current parameters.
ModelParams backward(const ForwardTrace& trace, const HeadOutputs& heads, const HeadGradients& upstream,
                     const ModelParams& params);

}  // namespace bioembed
