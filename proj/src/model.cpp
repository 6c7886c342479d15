#include "bioembed/model.hpp"

#include <cmath>

#include "bioembed/errors.hpp"

namespace bioembed {
namespace {

constexpr double kNormEps = 1e-12;

void fill_uniform(Eigen::Ref<Eigen::MatrixXd> m, double limit, Rng& rng) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    // Column-major fill order keeps the draw sequence tied to the storage order.
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
}

double he_limit(int fan_in, double gain) { return std::sqrt(3.0 * gain / fan_in); }

void fill_patches(const RowMatrix& spec, const ModelDims& dims, Eigen::MatrixXd& patches, Eigen::Index first_col) {
    const int pf = dims.patch_frames();
    const int cb = dims.column_bins();
    const int width = dims.last_column_bins();
    for (int t = 0; t < dims.grid_t; ++t) {
        for (int f = 0; f < dims.grid_f; ++f) {
            const int bins = f == dims.grid_f - 1 ? width : cb;
            auto col = patches.col(first_col + t * dims.grid_f + f);
            col.setZero();
            for (int r = 0; r < pf; ++r) {
                const double* src = spec.row(t * pf + r).data() + f * cb;
                double* dst = col.data() + r * width;
                for (int j = 0; j < bins; ++j) dst[j] = src[j];
            }
            // Each patch is centred on its own mean level; padding stays zero.
            const double mean = col.sum() / (pf * bins);
            for (int r = 0; r < pf; ++r)
                for (int j = 0; j < bins; ++j) col(r * width + j) -= mean;
        }
    }
}

}  // namespace

PrototypeSimilarity parse_similarity(const std::string& name) {
    if (name == "dot") return PrototypeSimilarity::kDot;
    if (name == "cosine") return PrototypeSimilarity::kCosine;
    throw UsageError("unknown prototype similarity '" + name + "' (expected dot|cosine)");
}

std::string to_string(PrototypeSimilarity s) { return s == PrototypeSimilarity::kDot ? "dot" : "cosine"; }

void ModelDims::validate() const {
    if (frames <= 0 || mel_bins <= 0 || grid_t <= 0 || grid_f <= 0 || hidden <= 0 || d <= 0 ||
        num_classes <= 0 || prototypes_per_class <= 0 || source_rank <= 0 || num_sources <= 0) {
        throw ValidationError("model dimensions must be positive");
    }
    if (frames % grid_t != 0) throw ValidationError("grid_t must divide the frame count");
    if (mel_bins < grid_f) throw ValidationError("grid_f must not exceed the mel bin count");
}

std::vector<ModelParams::Block> ModelParams::blocks() {
    auto blk = [](const char* name, auto& m) {
        return Block{name, m.rows(), m.cols(), std::span<double>(m.data(), static_cast<std::size_t>(m.size()))};
    };
    return {blk("embed_w1", embed_w1),   blk("embed_b1", embed_b1),     blk("embed_w2", embed_w2),
            blk("embed_b2", embed_b2),   blk("linear_w", linear_w),     blk("linear_b", linear_b),
            blk("prototypes", prototypes), blk("source_w1", source_w1), blk("source_w2", source_w2)};
}

std::vector<std::pair<std::string, std::span<const double>>> ModelParams::blocks() const {
    std::vector<std::pair<std::string, std::span<const double>>> out;
    for (auto& b : const_cast<ModelParams*>(this)->blocks()) out.emplace_back(b.name, b.values);
    return out;
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z;
    z.dims = dims;
    z.embed_w1 = Eigen::MatrixXd::Zero(embed_w1.rows(), embed_w1.cols());
    z.embed_b1 = Eigen::VectorXd::Zero(embed_b1.size());
    z.embed_w2 = Eigen::MatrixXd::Zero(embed_w2.rows(), embed_w2.cols());
    z.embed_b2 = Eigen::VectorXd::Zero(embed_b2.size());
    z.linear_w = Eigen::MatrixXd::Zero(linear_w.rows(), linear_w.cols());
    z.linear_b = Eigen::VectorXd::Zero(linear_b.size());
    z.prototypes = Eigen::MatrixXd::Zero(prototypes.rows(), prototypes.cols());
    z.source_w1 = Eigen::MatrixXd::Zero(source_w1.rows(), source_w1.cols());
    z.source_w2 = Eigen::MatrixXd::Zero(source_w2.rows(), source_w2.cols());
    return z;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, values] : blocks()) n += values.size();
    return n;
}

ModelParams init_params(const ModelDims& dims, Rng& rng) {
    dims.validate();
    ModelParams p;
    p.dims = dims;
    const int C = dims.num_classes;
    p.embed_w1.resize(dims.hidden, dims.patch_size());
    fill_uniform(p.embed_w1, he_limit(dims.patch_size(), 2.0), rng);
    p.embed_b1 = Eigen::VectorXd::Zero(dims.hidden);
    p.embed_w2.resize(dims.d, dims.hidden);
    fill_uniform(p.embed_w2, he_limit(dims.hidden, 1.0), rng);
    p.embed_b2 = Eigen::VectorXd::Zero(dims.d);
    p.linear_w.resize(C, dims.d);
    fill_uniform(p.linear_w, he_limit(dims.d, 1.0), rng);
    p.linear_b = Eigen::VectorXd::Zero(C);
    p.prototypes.resize(C * dims.prototypes_per_class, dims.d);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index r = 0; r < p.prototypes.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.prototypes.cols(); ++c) p.prototypes(r, c) = normal(rng);
        p.prototypes.row(r).normalize();
    }
    p.source_w1.resize(dims.source_rank, dims.d);
    fill_uniform(p.source_w1, he_limit(dims.d, 1.0), rng);
    p.source_w2.resize(dims.num_sources, dims.source_rank);
    fill_uniform(p.source_w2, he_limit(dims.source_rank, 1.0), rng);
    return p;
}

EmbeddingPair ForwardTrace::pair(int b, int cells) const {
    return {spatial.middleCols(static_cast<Eigen::Index>(b) * cells, cells), mean.col(b)};
}

ForwardTrace embed_batch(std::span<const RowMatrix* const> specs, const ModelParams& params,
                         double dropout_rate, Rng* rng) {
    const ModelDims& dims = params.dims;
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValidationError("dropout rate must be in [0, 1)");
    const int cells = dims.cells();
    const auto batch = static_cast<int>(specs.size());

    ForwardTrace tr;
    tr.params_version = params.version;
    tr.batch = batch;
    tr.patches.resize(dims.patch_size(), static_cast<Eigen::Index>(batch) * cells);
    for (int b = 0; b < batch; ++b) {
        const RowMatrix& s = *specs[b];
        if (s.rows() != dims.frames || s.cols() != dims.mel_bins) {
            throw ValidationError("embed: expected a " + std::to_string(dims.frames) + " x " +
                                  std::to_string(dims.mel_bins) + " spectrogram, got " + std::to_string(s.rows()) +
                                  " x " + std::to_string(s.cols()));
        }
        fill_patches(s, dims, tr.patches, static_cast<Eigen::Index>(b) * cells);
    }

    tr.hidden_pre.noalias() = params.embed_w1 * tr.patches;
    tr.hidden_pre.colwise() += params.embed_b1;
    tr.hidden = tr.hidden_pre.cwiseMax(0.0);
    tr.spatial.noalias() = params.embed_w2 * tr.hidden;
    tr.spatial.colwise() += params.embed_b2;

    tr.mean.resize(dims.d, batch);
    for (int b = 0; b < batch; ++b) {
        tr.mean.col(b) = tr.spatial.middleCols(static_cast<Eigen::Index>(b) * cells, cells).rowwise().mean();
    }

    tr.mean_heads = tr.mean;
    tr.spatial_heads = tr.spatial;
    if (rng != nullptr && dropout_rate > 0.0) {
        std::bernoulli_distribution keep(1.0 - dropout_rate);
        const double scale = 1.0 / (1.0 - dropout_rate);
        tr.mean_mask.resize(tr.mean.rows(), tr.mean.cols());
        for (Eigen::Index i = 0; i < tr.mean_mask.size(); ++i) tr.mean_mask(i) = keep(*rng) ? scale : 0.0;
        tr.mean_heads.array() *= tr.mean_mask.array();
        for (Eigen::Index i = 0; i < tr.spatial_heads.size(); ++i) {
            if (!keep(*rng)) {
                tr.spatial_heads(i) = 0.0;
            } else {
                tr.spatial_heads(i) *= scale;
            }
        }
    }
    return tr;
}

std::pair<EmbeddingPair, ForwardTrace> embed(const LogMelSpectrogram& spec, const ModelParams& params,
                                             double dropout_rate, Rng* rng) {
    const RowMatrix* ptr = &spec.values;
    ForwardTrace tr = embed_batch(std::span<const RowMatrix* const>(&ptr, 1), params, dropout_rate, rng);
    EmbeddingPair pair = tr.pair(0, params.dims.cells());
    return {std::move(pair), std::move(tr)};
}

Eigen::VectorXd linear_logits(const Eigen::VectorXd& mean, const ModelParams& params) {
    return params.linear_w * mean + params.linear_b;
}

Eigen::VectorXd prototype_logits(const Eigen::MatrixXd& spatial, const ModelParams& params,
                                 std::vector<int>* argmax) {
    const int C = params.dims.num_classes;
    const int J = params.dims.prototypes_per_class;
    const auto cells = static_cast<int>(spatial.cols());
    Eigen::MatrixXd act = params.prototypes * spatial;  // (C*J) x cells
    if (params.dims.similarity == PrototypeSimilarity::kCosine) {
        const Eigen::VectorXd pn = params.prototypes.rowwise().norm().cwiseMax(kNormEps);
        const Eigen::RowVectorXd en = spatial.colwise().norm().cwiseMax(kNormEps);
        act.array().colwise() /= pn.array();
        act.array().rowwise() /= en.array();
    }
    Eigen::VectorXd out(C);
    if (argmax) argmax->assign(static_cast<std::size_t>(C), 0);
    for (int c = 0; c < C; ++c) {
        double best = act(c * J, 0);
        int best_idx = 0;
        for (int j = 0; j < J; ++j) {
            for (int k = 0; k < cells; ++k) {
                const double v = act(c * J + j, k);
                if (v > best) {
                    best = v;
                    best_idx = j * cells + k;
                }
            }
        }
        out(c) = best;
        if (argmax) (*argmax)[static_cast<std::size_t>(c)] = best_idx;
    }
    return out;
}

Eigen::VectorXd source_logits(const Eigen::VectorXd& mean, const ModelParams& params) {
    return params.source_w2 * (params.source_w1 * mean);
}

HeadOutputs forward_heads(const ForwardTrace& trace, const ModelParams& params) {
    const int C = params.dims.num_classes;
    const int cells = params.dims.cells();
    HeadOutputs out;
    out.linear = params.linear_w * trace.mean_heads;
    out.linear.colwise() += params.linear_b;
    out.source = params.source_w2 * (params.source_w1 * trace.mean_heads);
    out.prototype.resize(C, trace.batch);
    out.prototype_argmax.resize(static_cast<std::size_t>(C) * trace.batch);
    std::vector<int> am;
    for (int b = 0; b < trace.batch; ++b) {
        out.prototype.col(b) = prototype_logits(
            trace.spatial_heads.middleCols(static_cast<Eigen::Index>(b) * cells, cells), params, &am);
        std::copy(am.begin(), am.end(), out.prototype_argmax.begin() + static_cast<long>(b) * C);
    }
    return out;
}

ModelParams backward(const ForwardTrace& trace, const HeadOutputs& heads, const HeadGradients& upstream,
                     const ModelParams& params) {
    if (trace.params_version != params.version) {
        throw ValidationError("backward: trace was recorded against parameter version " +
                              std::to_string(trace.params_version) + ", current is " +
                              std::to_string(params.version));
    }
    const ModelDims& dims = params.dims;
    const int cells = dims.cells();
    const int J = dims.prototypes_per_class;
    const int C = dims.num_classes;
    ModelParams g = params.zeros_like();
    Eigen::MatrixXd d_mean_heads = Eigen::MatrixXd::Zero(dims.d, trace.batch);

    if (upstream.linear.size() > 0) {
        g.linear_w.noalias() = upstream.linear * trace.mean_heads.transpose();
        g.linear_b = upstream.linear.rowwise().sum();
        d_mean_heads.noalias() += params.linear_w.transpose() * upstream.linear;
    }
    if (upstream.source.size() > 0) {
        const Eigen::MatrixXd z = params.source_w1 * trace.mean_heads;
        g.source_w2.noalias() = upstream.source * z.transpose();
        const Eigen::MatrixXd dz = params.source_w2.transpose() * upstream.source;
        g.source_w1.noalias() = dz * trace.mean_heads.transpose();
        d_mean_heads.noalias() += params.source_w1.transpose() * dz;
    }
    if (upstream.prototype.size() > 0) {
        // Only the arg-max (prototype, cell) pair of each class receives gradient.
        for (int b = 0; b < trace.batch; ++b) {
            for (int c = 0; c < C; ++c) {
                const double gc = upstream.prototype(c, b);
                if (gc == 0.0) continue;
                const int idx = heads.prototype_argmax[static_cast<std::size_t>(b) * C + c];
                const int row = c * J + idx / cells;
                const auto e = trace.spatial_heads.col(static_cast<Eigen::Index>(b) * cells + idx % cells);
                if (dims.similarity == PrototypeSimilarity::kDot) {
                    g.prototypes.row(row) += gc * e.transpose();
                } else {
                    const auto p = params.prototypes.row(row);
                    const double pn = std::max(p.norm(), kNormEps);
                    const double en = std::max(e.norm(), kNormEps);
                    const double act = p.dot(e.transpose()) / (pn * en);
                    g.prototypes.row(row) += gc * (e.transpose() / (pn * en) - act * p / (pn * pn));
                }
            }
        }
    }

    Eigen::MatrixXd d_mean = d_mean_heads;
    if (trace.mean_mask.size() > 0) d_mean.array() *= trace.mean_mask.array();
    d_mean /= static_cast<double>(cells);  // each cell contributes 1/cells to E_A

    // Every cell of an example receives the same spatial gradient.
    Eigen::MatrixXd hidden_sum(dims.hidden, trace.batch);
    for (int b = 0; b < trace.batch; ++b) {
        hidden_sum.col(b) = trace.hidden.middleCols(static_cast<Eigen::Index>(b) * cells, cells).rowwise().sum();
    }
    g.embed_w2.noalias() = d_mean * hidden_sum.transpose();
    g.embed_b2 = d_mean.rowwise().sum() * static_cast<double>(cells);

    const Eigen::MatrixXd d_hidden_example = params.embed_w2.transpose() * d_mean;  // hidden x batch
    Eigen::MatrixXd d_hidden(dims.hidden, trace.hidden.cols());
    for (int b = 0; b < trace.batch; ++b) {
        for (int k = 0; k < cells; ++k) {
            const Eigen::Index col = static_cast<Eigen::Index>(b) * cells + k;
            d_hidden.col(col) =
                (trace.hidden_pre.col(col).array() > 0.0).select(d_hidden_example.col(b), 0.0);
        }
    }
    g.embed_w1.noalias() = d_hidden * trace.patches.transpose();
    g.embed_b1 = d_hidden.rowwise().sum();
    return g;
}

}  // namespace bioembed
