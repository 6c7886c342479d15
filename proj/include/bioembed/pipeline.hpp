#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bioembed/checkpoint.hpp"
#include "bioembed/embeddings_file.hpp"
#include "bioembed/frontend.hpp"
#include "bioembed/manifest.hpp"
#include "bioembed/model.hpp"
#include "bioembed/protocols.hpp"
#include "bioembed/train.hpp"

namespace bioembed {

// Window strides of the evaluation protocols.
inline constexpr double kClassifyStride = 2.5;
inline constexpr double kTransferStride = 5.0;

// Embeds every enumerate_windows() window; values are rounded to float32 so
// in-memory and on-disk embeddings agree exactly.
RecordingEmbeddings embed_recording(const std::string& recording_id, const AudioBuffer& audio,
                                    const ModelParams& params, double stride_s, LogMelFrontend& frontend);

// Decodes every train-split record, assigning source ids in manifest order.
TrainingCorpus load_training_corpus(const std::filesystem::path& manifest_path,
                                    const std::vector<RecordingMeta>& records, const LabelVocabulary& vocab);

struct EmbedSummary {
    std::size_t records_written = 0;
    std::vector<std::string> errors;  // one per failed record
};

EmbedSummary cmd_embed(const std::filesystem::path& manifest, const std::filesystem::path& checkpoint,
                       double stride_s, const std::filesystem::path& out);

struct TrainOptions {
    std::optional<std::filesystem::path> config;
    std::filesystem::path manifest;
    std::filesystem::path out;
    std::optional<std::filesystem::path> log;  // default: <out>.log.jsonl
    std::optional<std::filesystem::path> init_from;
    std::optional<std::filesystem::path> taxonomy;
    std::optional<Phase> phase;
    std::optional<long> max_steps;
    std::optional<std::uint64_t> seed;
};

// Reads the config (flags override it), trains one phase, writes the
// checkpoint and the JSON-lines training log.
PhaseResult cmd_train(const TrainOptions& opts);

struct EvalOptions {
    std::optional<std::filesystem::path> checkpoint;
    std::vector<std::filesystem::path> embeddings;
    std::vector<std::filesystem::path> classify;
    std::vector<std::filesystem::path> retrieval;
    std::vector<std::filesystem::path> transfer;
    std::vector<TaskType> tasks;  // empty: every task that has a manifest
    std::uint64_t seed = 0;
    double min_overlap_s = 0.0;
    int shots = 16;
    int probe_steps = 10000;
    std::optional<std::filesystem::path> out;  // writes <out>.json and <out>.csv
    std::vector<std::string>* warnings = nullptr;
};

QualityReport cmd_eval(const EvalOptions& opts);

// Energy-peak candidates of every record as JSON-lines {id, time_s, score}.
std::string cmd_peaks(const std::filesystem::path& manifest);

}  // namespace bioembed
