#include "bioembed/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bioembed/errors.hpp"
#include "bioembed/peaks.hpp"
#include "bioembed/windowing.hpp"

namespace bioembed {
namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

// Records grouped by their dataset field, in order of first appearance.
std::vector<std::pair<std::string, std::vector<RecordingMeta>>> by_dataset(const std::vector<RecordingMeta>& records) {
    std::vector<std::pair<std::string, std::vector<RecordingMeta>>> groups;
    for (const auto& r : records) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == r.dataset; });
        if (it == groups.end()) {
            groups.push_back({r.dataset, {r}});
        } else {
            it->second.push_back(r);
        }
    }
    return groups;
}

using EmbeddingIndex = std::map<std::string, RecordingEmbeddings>;

void embed_manifest(const std::filesystem::path& manifest, const std::vector<RecordingMeta>& records,
                    const ModelParams& params, double stride, EmbeddingIndex& index) {
    LogMelFrontend frontend{FrontendConfig{}};
    for (const auto& rec : records) {
        if (index.count(rec.recording_id)) continue;
        const AudioBuffer audio = decode_and_resample(resolve_audio_path(manifest, rec));
        validate_annotations(rec, audio.duration_s());
        index[rec.recording_id] = embed_recording(rec.recording_id, audio, params, stride, frontend);
    }
}

const RecordingEmbeddings& lookup(const EmbeddingIndex& index, const std::string& id) {
    auto it = index.find(id);
    if (it == index.end()) throw ValidationError("no embeddings for recording '" + id + "'");
    return it->second;
}

std::vector<LabelledEmbedding> labelled(const std::vector<RecordingMeta>& records, const EmbeddingIndex& index,
                                        const std::string& task) {
    const LabelVocabulary vocab = LabelVocabulary::from_records(records);
    std::vector<LabelledEmbedding> items;
    for (const auto& r : records) {
        if (r.labels.empty()) {
            throw ValidationError(task + " task: record '" + r.recording_id + "' is missing the 'labels' field values");
        }
        LabelledEmbedding e;
        e.id = r.recording_id;
        e.embedding = lookup(index, r.recording_id).averaged_mean();
        for (const auto& l : r.labels) e.classes.push_back(vocab.id(l));
        items.push_back(std::move(e));
    }
    return items;
}

}  // namespace

RecordingEmbeddings embed_recording(const std::string& recording_id, const AudioBuffer& audio,
                                    const ModelParams& params, double stride_s, LogMelFrontend& frontend) {
    RecordingEmbeddings out;
    out.recording_id = recording_id;
    for (const auto& w : enumerate_windows(audio.duration_s(), stride_s, kWindowSeconds, recording_id)) {
        const LogMelSpectrogram spec = frontend(extract_window(audio, w.start_s));
        auto [pair, trace] = embed(spec, params);
        WindowEmbedding we;
        we.start_s = w.start_s;
        we.spatial = pair.spatial.cast<float>().cast<double>();
        we.mean = pair.mean.cast<float>().cast<double>();
        out.windows.push_back(std::move(we));
    }
    return out;
}

TrainingCorpus load_training_corpus(const std::filesystem::path& manifest_path,
                                    const std::vector<RecordingMeta>& records, const LabelVocabulary& vocab) {
    TrainingCorpus corpus;
    corpus.vocab = vocab;
    for (const auto& r : records) {
        if (r.split != Split::kTrain) continue;
        TrainingExample ex;
        ex.recording_id = r.recording_id;
        ex.audio = decode_and_resample(resolve_audio_path(manifest_path, r));
        for (const auto& l : r.labels) ex.classes.push_back(vocab.id(l));
        ex.source_id = static_cast<int>(corpus.examples.size());
        corpus.examples.push_back(std::move(ex));
    }
    return corpus;
}

EmbedSummary cmd_embed(const std::filesystem::path& manifest, const std::filesystem::path& checkpoint,
                       double stride_s, const std::filesystem::path& out) {
    if (!(stride_s > 0.0)) throw UsageError("--stride must be positive");
    const auto records = load_manifest(manifest);
    const Checkpoint ck = load_checkpoint(checkpoint);
    EmbeddingsFile file;
    file.d = ck.params.dims.d;
    file.grid_t = ck.params.dims.grid_t;
    file.grid_f = ck.params.dims.grid_f;
    file.model_checksum = ck.checksum;
    file.stride_s = stride_s;

    EmbedSummary summary;
    LogMelFrontend frontend{FrontendConfig{}};
    for (const auto& rec : records) {
        try {
            const AudioBuffer audio = decode_and_resample(resolve_audio_path(manifest, rec));
            file.records.push_back(embed_recording(rec.recording_id, audio, ck.params, stride_s, frontend));
        } catch (const Error& e) {
            summary.errors.push_back(rec.recording_id + ": " + e.what());
        }
    }
    summary.records_written = file.records.size();
    write_embeddings(out, file);
    return summary;
}

PhaseResult cmd_train(const TrainOptions& opts) {
    std::string config_text;
    if (opts.config) config_text = read_text(*opts.config);

    // The phase picks the defaults that the config file then overrides.
    TrainSettings probe;
    apply_config_text(probe, config_text);
    const Phase phase = opts.phase.value_or(probe.phase.phase);
    TrainSettings settings;
    settings.phase = PhaseConfig::defaults(phase);
    apply_config_text(settings, config_text);
    settings.phase.phase = phase;
    if (opts.max_steps) settings.phase.max_steps = *opts.max_steps;
    if (opts.seed) settings.phase.seed = *opts.seed;
    PhaseConfig& cfg = settings.phase;
    cfg.validate();

    if (phase == Phase::kTwo && !opts.init_from) {
        throw UsageError("phase two requires --init-from <phase-one checkpoint>");
    }

    auto records = load_manifest(opts.manifest);
    std::vector<RecordingMeta> train_records;
    for (const auto& r : records) {
        if (r.split == Split::kTrain) train_records.push_back(r);
    }
    LabelVocabulary vocab = LabelVocabulary::from_records(train_records);
    std::optional<Checkpoint> init;
    if (opts.init_from) {
        init = load_checkpoint(*opts.init_from);
    }
    if (opts.taxonomy) vocab.set_taxonomy(load_taxonomy(*opts.taxonomy));
    if (settings.label_level != TaxonLevel::kSpecies) {
        const Coarsening coarse = coarsen_labels(vocab, settings.label_level);
        train_records = relabel(train_records, vocab, coarse);
        vocab = coarse.vocab;
    }

    TrainingCorpus corpus = load_training_corpus(opts.manifest, train_records, vocab);
    if (cfg.window_strategy == WindowStrategy::kPeak) corpus.ensure_peaks();

    ModelParams params;
    if (init) {
        if (phase == Phase::kTwo && init->header.phase == "init") {
            throw ValidationError("phase two requires a checkpoint with a trained prototype head (phase one)");
        }
        if (init->header.classes != vocab.classes()) {
            throw ValidationError("--init-from checkpoint classes do not match the training manifest");
        }
        if (init->params.dims.num_sources != static_cast<int>(corpus.examples.size())) {
            throw ValidationError("--init-from checkpoint was trained on a different number of source recordings");
        }
        params = init->params;
    } else {
        ModelDims dims = settings.dims;
        dims.num_classes = static_cast<int>(vocab.size());
        dims.num_sources = std::max<int>(1, static_cast<int>(corpus.examples.size()));
        Rng rng = stream(cfg.seed, "init");
        params = init_params(dims, rng);
    }

    PhaseResult result = run_phase(cfg, corpus, std::move(params));

    CheckpointHeader header;
    header.phase = cfg.max_steps == 0 && !init ? "init" : to_string(phase);
    if (init && cfg.max_steps == 0) header.phase = init->header.phase;
    header.seed = cfg.seed;
    header.classes = vocab.classes();
    if (vocab.taxonomy()) header.taxonomy = *vocab.taxonomy();
    header.config = cfg.to_json();
    header.config["label_level"] = to_string(settings.label_level);
    save_checkpoint(opts.out, result.params, header);

    std::string log;
    for (const auto& entry : result.log) log += entry.to_json().dump() + "\n";
    write_text(opts.log.value_or(std::filesystem::path(opts.out.string() + ".log.jsonl")), log);
    return result;
}

QualityReport cmd_eval(const EvalOptions& opts) {
    std::vector<TaskType> tasks = opts.tasks;
    if (tasks.empty()) {
        if (!opts.classify.empty()) tasks.push_back(TaskType::kClassify);
        if (!opts.retrieval.empty()) tasks.push_back(TaskType::kRetrieval);
        if (!opts.transfer.empty()) tasks.push_back(TaskType::kTransfer);
    }
    if (tasks.empty()) throw UsageError("no evaluation tasks: pass --classify, --retrieval or --transfer manifests");
    auto manifests_for = [&](TaskType t) -> const std::vector<std::filesystem::path>& {
        return t == TaskType::kClassify ? opts.classify : t == TaskType::kRetrieval ? opts.retrieval : opts.transfer;
    };
    for (TaskType t : tasks) {
        if (manifests_for(t).empty()) throw UsageError("task " + to_string(t) + " requested without a manifest");
    }
    if (!opts.checkpoint && opts.embeddings.empty()) {
        throw UsageError("cmd_eval needs --checkpoint or --embeddings");
    }

    std::optional<Checkpoint> ck;
    if (opts.checkpoint) ck = load_checkpoint(*opts.checkpoint);

    EmbeddingIndex index;
    for (const auto& path : opts.embeddings) {
        EmbeddingsFile file = read_embeddings(path);
        if (ck && file.model_checksum != ck->checksum) {
            throw ValidationError("embeddings file " + path.string() + " was produced by a different checkpoint");
        }
        for (auto& rec : file.records) index[rec.recording_id] = std::move(rec);
    }
    const bool from_files = !opts.embeddings.empty();

    std::vector<TaskScore> scores;
    for (TaskType t : tasks) {
        for (const auto& manifest : manifests_for(t)) {
            const auto records = load_manifest(manifest);
            if (t == TaskType::kClassify) {
                for (const auto& r : records) {
                    if (!r.annotations) {
                        throw ValidationError("classify task: record '" + r.recording_id +
                                              "' in " + manifest.string() + " lacks the 'annotations' field");
                    }
                }
                if (!ck) throw UsageError("the classify task needs --checkpoint for the prototype head");
            }
            if (!from_files) {
                embed_manifest(manifest, records, ck->params,
                               t == TaskType::kClassify ? kClassifyStride : kTransferStride, index);
            }
            ProtocolOptions popts;
            popts.seed = opts.seed;
            popts.shots = opts.shots;
            popts.probe_steps = opts.probe_steps;
            popts.warnings = opts.warnings;
            for (const auto& [dataset, group] : by_dataset(records)) {
                if (t == TaskType::kClassify) {
                    const LabelVocabulary vocab(ck->header.classes);
                    std::map<std::string, std::vector<ScoredWindow>> windows;
                    for (const auto& r : group) {
                        auto& out = windows[r.recording_id];
                        for (const auto& w : lookup(index, r.recording_id).windows) {
                            out.push_back({w.start_s, kWindowSeconds, prototype_logits(w.spatial, ck->params)});
                        }
                    }
                    scores.push_back(eval_pretrained(dataset, group, windows, vocab, opts.min_overlap_s));
                } else if (t == TaskType::kRetrieval) {
                    scores.push_back(eval_retrieval(dataset, labelled(group, index, "retrieval"), popts));
                } else {
                    scores.push_back(eval_linear_probe(dataset, labelled(group, index, "transfer"), popts));
                }
            }
        }
    }

    QualityReport report = aggregate_partial(scores);
    if (opts.out) {
        write_text(opts.out->string() + ".json", report.to_json().dump(2) + "\n");
        write_text(opts.out->string() + ".csv", report.to_csv());
    }
    return report;
}

std::string cmd_peaks(const std::filesystem::path& manifest) {
    std::string out;
    for (const auto& rec : load_manifest(manifest)) {
        const AudioBuffer audio = decode_and_resample(resolve_audio_path(manifest, rec));
        for (const auto& p : find_energy_peaks(audio)) {
            nlohmann::ordered_json j{{"id", rec.recording_id}, {"time_s", p.time_s}, {"score", p.score}};
            out += j.dump() + "\n";
        }
    }
    return out;
}

}  // namespace bioembed
