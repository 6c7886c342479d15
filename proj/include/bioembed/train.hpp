#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bioembed/audio.hpp"
#include "bioembed/mixup.hpp"
#include "bioembed/model.hpp"
#include "bioembed/peaks.hpp"
#include "bioembed/vocabulary.hpp"
#include "bioembed/windowing.hpp"

namespace bioembed {

enum class Phase { kOne, kTwo };

std::string to_string(Phase p);
Phase parse_phase(const std::string& name);

// Which component of a mixture supplies the source-prediction target.
enum class SourceTarget { kDominant, kNone };

struct PhaseConfig {
    Phase phase = Phase::kOne;
    double learning_rate = 6.41e-4;
    double dropout_rate = 0.49;
    double source_loss_weight = 0.11;
    double distill_loss_weight = 0.0;
    double orthogonality_weight = 1.0;
    MixupConfig mixup{2, 91.3, 100.0, 1.0};
    long max_steps = 1000;
    int batch_size = 64;
    WindowStrategy window_strategy = WindowStrategy::kRandom;
    std::uint64_t seed = 0;
    bool prototype_losses = true;
    SourceTarget source_target = SourceTarget::kDominant;
    long validate_every = 0;  // 0 disables periodic validation

    static PhaseConfig defaults(Phase phase);
    void validate() const;
    nlohmann::ordered_json to_json() const;
};

// Settings read from a `key = value` config file: the phase settings plus
// the model shape and label granularity used when training from scratch.
struct TrainSettings {
    PhaseConfig phase;
    ModelDims dims;
    TaxonLevel label_level = TaxonLevel::kSpecies;
};

const std::vector<std::string>& config_keys();
// Applies one entry; unknown keys raise UsageError listing the valid keys.
void apply_config_entry(TrainSettings& settings, const std::string& key, const std::string& value);
// Blank lines and '#' comments are ignored.
void apply_config_text(TrainSettings& settings, const std::string& text);

struct LossBreakdown {
    double species_linear = 0.0;
    double species_prototype = 0.0;
    double orthogonality = 0.0;
    double source = 0.0;
    double distillation = 0.0;
    double total = 0.0;

    nlohmann::ordered_json to_json() const;
};

double weighted_total(const LossBreakdown& l, const PhaseConfig& cfg);

struct TrainingExample {
    std::string recording_id;
    AudioBuffer audio;
    std::vector<int> classes;
    int source_id = 0;
    std::vector<PeakCandidate> peaks;
    bool peaks_computed = false;
};

struct TrainingCorpus {
    LabelVocabulary vocab;
    std::vector<TrainingExample> examples;

    // Caches energy peaks for the peak window strategy.
    void ensure_peaks();
};

// One assembled (possibly mixed) 5 s training example.
struct BatchItem {
    AudioBuffer audio;
    std::vector<int> classes;     // union over the components
    int source_id = -1;           // -1: no source target
    std::vector<std::pair<int, double>> components;  // (example index, weight)
};

BatchItem assemble_example(const TrainingCorpus& corpus, const PhaseConfig& cfg, Rng& rng);

// Result of one optimisation step on a fixed batch of spectrograms.
struct StepResult {
    LossBreakdown losses;
    ModelParams grads;
};

StepResult compute_step(const ModelParams& params, const PhaseConfig& cfg,
                        std::span<const RowMatrix* const> specs, const std::vector<BatchItem>& items,
                        Rng* dropout_rng);

struct StepLog {
    long step = 0;
    LossBreakdown losses;
    double lr = 0.0;
    Phase phase = Phase::kOne;
    std::optional<nlohmann::ordered_json> validation;

    nlohmann::ordered_json to_json() const;
};

using ValidationHook = std::function<nlohmann::ordered_json(const ModelParams&, long step)>;

struct PhaseResult {
    ModelParams params;
    std::vector<StepLog> log;
};

PhaseResult run_phase(const PhaseConfig& cfg, const TrainingCorpus& corpus, ModelParams params,
                      const ValidationHook& validate = {});

}  // namespace bioembed
