#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bioembed {

enum class Split { kTrain, kEval };

struct AnnotationSpan {
    double start_s = 0.0;
    double end_s = 0.0;
    std::string label;

    bool operator==(const AnnotationSpan&) const = default;
};

// One weakly-labelled recording. `labels` is a set: unique names, insertion order kept.
struct RecordingMeta {
    std::string recording_id;
    std::string path;
    std::vector<std::string> labels;
    std::string dataset;
    Split split = Split::kTrain;
    std::optional<std::vector<AnnotationSpan>> annotations;

    bool operator==(const RecordingMeta&) const = default;
};

// JSON-lines, one record per line:
//   {"id", "path", "labels": [...], "dataset", "split": "train"|"eval",
//    "annotations": [{"start_s", "end_s", "label"}, ...]}   (annotations optional)
// Blank lines are skipped.
std::vector<RecordingMeta> load_manifest(const std::filesystem::path& path);
std::vector<RecordingMeta> parse_manifest(const std::string& text);

void write_manifest(const std::filesystem::path& path, const std::vector<RecordingMeta>& records);
std::string format_manifest(const std::vector<RecordingMeta>& records);

// Throws ValidationError when an annotation extends past the decoded duration.
void validate_annotations(const RecordingMeta& rec, double duration_s);

// Relative audio paths are resolved against the manifest's directory.
std::filesystem::path resolve_audio_path(const std::filesystem::path& manifest_path,
                                         const RecordingMeta& rec);

}  // namespace bioembed
