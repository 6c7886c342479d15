#include "bioembed/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "bioembed/adam.hpp"
#include "bioembed/errors.hpp"
#include "bioembed/frontend.hpp"
#include "bioembed/losses.hpp"

namespace bioembed {
namespace {

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

long parse_long(const std::string& key, const std::string& v) {
    long x = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw UsageError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
    return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw UsageError("config key '" + key + "': expected true|false, got '" + v + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string to_string(Phase p) { return p == Phase::kOne ? "one" : "two"; }

Phase parse_phase(const std::string& name) {
    if (name == "one" || name == "1") return Phase::kOne;
    if (name == "two" || name == "2") return Phase::kTwo;
    throw UsageError("unknown phase '" + name + "' (expected one|two)");
}

PhaseConfig PhaseConfig::defaults(Phase phase) {
    PhaseConfig c;
    c.phase = phase;
    if (phase == Phase::kTwo) {
        c.learning_rate = 3.20e-6;
        c.dropout_rate = 0.0;
        c.source_loss_weight = 0.0;
        c.distill_loss_weight = 4.22;
        c.mixup = MixupConfig{0, 1.0, 1.0, 1.0};
    }
    return c;
}

void PhaseConfig::validate() const {
    if (phase == Phase::kOne && distill_loss_weight != 0.0) {
        throw ValidationError("phase one must not use the distillation loss");
    }
    const long budget = phase == Phase::kOne ? 300000 : 400000;
    if (max_steps < 0 || max_steps > budget) {
        throw ValidationError("max_steps must lie in [0, " + std::to_string(budget) + "] for phase " +
                              to_string(phase));
    }
    if (batch_size <= 0) throw ValidationError("batch_size must be positive");
    if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate must be >= 0");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValidationError("dropout_rate must lie in [0, 1)");
    if (!(source_loss_weight >= 0.0 && distill_loss_weight >= 0.0 && orthogonality_weight >= 0.0)) {
        throw ValidationError("loss weights must be >= 0");
    }
    mixup.validate();
}

nlohmann::ordered_json PhaseConfig::to_json() const {
    return {{"phase", to_string(phase)},
            {"learning_rate", learning_rate},
            {"dropout_rate", dropout_rate},
            {"source_loss_weight", source_loss_weight},
            {"distill_loss_weight", distill_loss_weight},
            {"orthogonality_weight", orthogonality_weight},
            {"mixup_n", mixup.n},
            {"mixup_alpha", mixup.alpha},
            {"mixup_beta", mixup.beta},
            {"mixup_omega", mixup.omega},
            {"max_steps", max_steps},
            {"batch_size", batch_size},
            {"window_strategy", to_string(window_strategy)},
            {"seed", seed},
            {"prototype_losses", prototype_losses},
            {"source_target", source_target == SourceTarget::kDominant ? "dominant" : "none"},
            {"validate_every", validate_every}};
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "phase",          "learning_rate",    "dropout_rate",  "source_loss_weight", "distill_loss_weight",
        "orthogonality_weight", "mixup_n",    "mixup_alpha",   "mixup_beta",         "mixup_omega",
        "max_steps",      "batch_size",       "window_strategy", "seed",             "prototype_losses",
        "source_target",  "validate_every",   "label_level",   "d",                  "hidden",
        "source_rank",    "grid_t",           "grid_f",        "similarity"};
    return keys;
}

void apply_config_entry(TrainSettings& s, const std::string& key, const std::string& value) {
    PhaseConfig& p = s.phase;
    if (key == "phase") {
        p.phase = parse_phase(value);
    } else if (key == "learning_rate") {
        p.learning_rate = parse_double(key, value);
    } else if (key == "dropout_rate") {
        p.dropout_rate = parse_double(key, value);
    } else if (key == "source_loss_weight") {
        p.source_loss_weight = parse_double(key, value);
    } else if (key == "distill_loss_weight") {
        p.distill_loss_weight = parse_double(key, value);
    } else if (key == "orthogonality_weight") {
        p.orthogonality_weight = parse_double(key, value);
    } else if (key == "mixup_n") {
        p.mixup.n = static_cast<int>(parse_long(key, value));
    } else if (key == "mixup_alpha") {
        p.mixup.alpha = parse_double(key, value);
    } else if (key == "mixup_beta") {
        p.mixup.beta = parse_double(key, value);
    } else if (key == "mixup_omega") {
        p.mixup.omega = parse_double(key, value);
    } else if (key == "max_steps") {
        p.max_steps = parse_long(key, value);
    } else if (key == "batch_size") {
        p.batch_size = static_cast<int>(parse_long(key, value));
    } else if (key == "window_strategy") {
        p.window_strategy = parse_window_strategy(value);
    } else if (key == "seed") {
        p.seed = static_cast<std::uint64_t>(parse_long(key, value));
    } else if (key == "prototype_losses") {
        p.prototype_losses = parse_bool(key, value);
    } else if (key == "source_target") {
        if (value == "dominant") {
            p.source_target = SourceTarget::kDominant;
        } else if (value == "none") {
            p.source_target = SourceTarget::kNone;
        } else {
            throw UsageError("config key 'source_target': expected dominant|none, got '" + value + "'");
        }
    } else if (key == "validate_every") {
        p.validate_every = parse_long(key, value);
    } else if (key == "label_level") {
        s.label_level = parse_taxon_level(value);
    } else if (key == "d") {
        s.dims.d = static_cast<int>(parse_long(key, value));
    } else if (key == "hidden") {
        s.dims.hidden = static_cast<int>(parse_long(key, value));
    } else if (key == "source_rank") {
        s.dims.source_rank = static_cast<int>(parse_long(key, value));
    } else if (key == "grid_t") {
        s.dims.grid_t = static_cast<int>(parse_long(key, value));
    } else if (key == "grid_f") {
        s.dims.grid_f = static_cast<int>(parse_long(key, value));
    } else if (key == "similarity") {
        s.dims.similarity = parse_similarity(value);
    } else {
        std::string valid;
        for (const auto& k : config_keys()) valid += (valid.empty() ? "" : ", ") + k;
        throw UsageError("invalid config key '" + key + "'; valid keys: " + valid);
    }
}

void apply_config_text(TrainSettings& settings, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        apply_config_entry(settings, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

nlohmann::ordered_json LossBreakdown::to_json() const {
    return {{"species_linear", species_linear}, {"species_prototype", species_prototype},
            {"orthogonality", orthogonality},   {"source", source},
            {"distillation", distillation},     {"total", total}};
}

double weighted_total(const LossBreakdown& l, const PhaseConfig& cfg) {
    return l.species_linear + l.species_prototype + cfg.orthogonality_weight * l.orthogonality +
           cfg.source_loss_weight * l.source + cfg.distill_loss_weight * l.distillation;
}

nlohmann::ordered_json StepLog::to_json() const {
    nlohmann::ordered_json j{{"step", step}, {"losses", losses.to_json()}, {"lr", lr}, {"phase", to_string(phase)}};
    if (validation) j["validation"] = *validation;
    return j;
}

void TrainingCorpus::ensure_peaks() {
    for (auto& ex : examples) {
        if (ex.peaks_computed) continue;
        ex.peaks = find_energy_peaks(ex.audio);
        ex.peaks_computed = true;
    }
}

BatchItem assemble_example(const TrainingCorpus& corpus, const PhaseConfig& cfg, Rng& rng) {
    const int pool = static_cast<int>(corpus.examples.size());
    MixtureSpec mix = sample_mixture_spec(cfg.mixup, rng);
    if (mix.components > pool) {
        // Fewer recordings than components: fall back to an even split over all of them.
        mix.components = pool;
        mix.weights.assign(static_cast<std::size_t>(pool), 1.0 / pool);
    }

    // Distinct recordings, uniform without replacement.
    std::vector<int> chosen;
    std::uniform_int_distribution<int> pick(0, pool - 1);
    while (static_cast<int>(chosen.size()) < mix.components) {
        const int idx = pick(rng);
        if (std::find(chosen.begin(), chosen.end(), idx) == chosen.end()) chosen.push_back(idx);
    }

    BatchItem item;
    std::vector<std::vector<float>> signals;
    std::set<int> classes;
    for (int idx : chosen) {
        const TrainingExample& ex = corpus.examples[static_cast<std::size_t>(idx)];
        // Without cached candidates the peak strategy computes them on the spot.
        const std::vector<PeakCandidate>* peaks = ex.peaks_computed ? &ex.peaks : nullptr;
        const WindowSpec w = select_training_window(ex.recording_id, ex.audio, cfg.window_strategy, rng, peaks);
        signals.push_back(extract_window(ex.audio, w.start_s).samples);
        classes.insert(ex.classes.begin(), ex.classes.end());
    }
    for (std::size_t i = 0; i < chosen.size(); ++i) item.components.emplace_back(chosen[i], mix.weights[i]);

    if (signals.size() == 1) {
        item.audio.samples = std::move(signals.front());
    } else {
        item.audio.samples = mix_signals(signals, mix.weights);
    }
    item.classes.assign(classes.begin(), classes.end());
    if (cfg.source_target == SourceTarget::kDominant) {
        const auto dominant = std::max_element(mix.weights.begin(), mix.weights.end()) - mix.weights.begin();
        item.source_id = corpus.examples[static_cast<std::size_t>(chosen[static_cast<std::size_t>(dominant)])].source_id;
    }
    return item;
}

StepResult compute_step(const ModelParams& params, const PhaseConfig& cfg,
                        std::span<const RowMatrix* const> specs, const std::vector<BatchItem>& items,
                        Rng* dropout_rng) {
    const ForwardTrace trace = embed_batch(specs, params, cfg.dropout_rate, dropout_rng);
    const HeadOutputs heads = forward_heads(trace, params);
    const int B = trace.batch;
    const double inv_b = 1.0 / B;

    HeadGradients up;
    up.linear = Eigen::MatrixXd::Zero(heads.linear.rows(), B);
    if (cfg.prototype_losses) up.prototype = Eigen::MatrixXd::Zero(heads.prototype.rows(), B);
    if (cfg.source_loss_weight > 0.0) up.source = Eigen::MatrixXd::Zero(heads.source.rows(), B);

    StepResult res;
    LossBreakdown& l = res.losses;
    int source_count = 0;
    for (int b = 0; b < B; ++b) {
        const BatchItem& item = items[static_cast<std::size_t>(b)];
        const Eigen::VectorXd lin = heads.linear.col(b);
        const Eigen::VectorXd proto = heads.prototype.col(b);

        const LossAndGrad ce_lin = species_ce(lin, item.classes);
        l.species_linear += ce_lin.value * inv_b;
        up.linear.col(b) += ce_lin.grad * inv_b;

        if (cfg.prototype_losses) {
            const LossAndGrad ce_proto = species_ce(proto, item.classes);
            l.species_prototype += ce_proto.value * inv_b;
            up.prototype.col(b) = ce_proto.grad * inv_b;
        }

        // The prototype head is the teacher; its logits are constants here.
        const LossAndGrad distill = distillation_loss(proto, lin);
        l.distillation += distill.value * inv_b;
        if (cfg.distill_loss_weight > 0.0) up.linear.col(b) += cfg.distill_loss_weight * inv_b * distill.grad;

        if (item.source_id >= 0) {
            const LossAndGrad src = source_ce(heads.source.col(b), item.source_id);
            l.source += src.value * inv_b;
            ++source_count;
            if (cfg.source_loss_weight > 0.0) up.source.col(b) = cfg.source_loss_weight * inv_b * src.grad;
        }
    }

    res.grads = backward(trace, heads, up, params);
    if (cfg.prototype_losses) {
        const MatrixLossAndGrad orth = orthogonality_loss(params.prototypes, params.dims.prototypes_per_class);
        l.orthogonality = orth.value;
        res.grads.prototypes += cfg.orthogonality_weight * orth.grad;
    }
    l.total = weighted_total(l, cfg);
    return res;
}

PhaseResult run_phase(const PhaseConfig& cfg, const TrainingCorpus& corpus, ModelParams params,
                      const ValidationHook& validate) {
    cfg.validate();
    if (corpus.examples.empty() && cfg.max_steps > 0) throw ValidationError("run_phase: empty training corpus");
    if (static_cast<std::size_t>(params.dims.num_classes) != corpus.vocab.size()) {
        throw ValidationError("run_phase: model class count does not match the vocabulary");
    }
    for (const auto& ex : corpus.examples) {
        if (ex.source_id < 0 || ex.source_id >= params.dims.num_sources) {
            throw ValidationError("run_phase: source id of '" + ex.recording_id + "' exceeds the source head");
        }
    }

    PhaseResult result;
    AdamState adam = make_adam_state(params);
    LogMelFrontend frontend(FrontendConfig{});
    std::vector<BatchItem> items(static_cast<std::size_t>(cfg.batch_size));
    std::vector<RowMatrix> specs(static_cast<std::size_t>(cfg.batch_size));
    std::vector<const RowMatrix*> spec_ptrs(specs.size());

    for (long step = 0; step < cfg.max_steps; ++step) {
        for (int b = 0; b < cfg.batch_size; ++b) {
            Rng rng = stream(cfg.seed, "example", static_cast<std::uint64_t>(step) * cfg.batch_size + b);
            items[b] = assemble_example(corpus, cfg, rng);
            specs[b] = frontend(items[b].audio).values;
            spec_ptrs[b] = &specs[b];
        }
        Rng dropout_rng = stream(cfg.seed, "dropout", static_cast<std::uint64_t>(step));
        StepResult sr = compute_step(params, cfg, spec_ptrs, items, &dropout_rng);
        adam_step(adam, params, sr.grads, cfg.learning_rate);

        StepLog entry{step + 1, sr.losses, cfg.learning_rate, cfg.phase, std::nullopt};
        if (validate && cfg.validate_every > 0 && (step + 1) % cfg.validate_every == 0) {
            entry.validation = validate(params, step + 1);
        }
        result.log.push_back(std::move(entry));
    }
    result.params = std::move(params);
    return result;
}

}  // namespace bioembed
