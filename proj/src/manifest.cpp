#include "bioembed/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bioembed/errors.hpp"

namespace bioembed {
namespace {

using nlohmann::ordered_json;

std::string span_text(const AnnotationSpan& a) {
    std::ostringstream os;
    os << "[" << a.start_s << ", " << a.end_s << ") '" << a.label << "'";
    return os.str();
}

RecordingMeta parse_record(const std::string& line, int line_no) {
    const std::string where = "manifest line " + std::to_string(line_no) + ": ";
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(where + e.what());
    }
    if (!j.is_object()) throw ParseError(where + "expected a JSON object");

    RecordingMeta rec;
    try {
        rec.recording_id = j.at("id").get<std::string>();
        rec.path = j.at("path").get<std::string>();
        rec.dataset = j.value("dataset", std::string{});
        const std::string split = j.value("split", std::string{"train"});
        if (split == "train") {
            rec.split = Split::kTrain;
        } else if (split == "eval") {
            rec.split = Split::kEval;
        } else {
            throw ParseError(where + "split must be 'train' or 'eval', got '" + split + "'");
        }
        std::set<std::string> seen;
        for (const auto& l : j.at("labels")) {
            auto name = l.get<std::string>();
            if (seen.insert(name).second) rec.labels.push_back(std::move(name));
        }
        if (j.contains("annotations") && !j["annotations"].is_null()) {
            std::vector<AnnotationSpan> spans;
            for (const auto& a : j["annotations"]) {
                spans.push_back({a.at("start_s").get<double>(), a.at("end_s").get<double>(),
                                 a.at("label").get<std::string>()});
            }
            rec.annotations = std::move(spans);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(where + e.what());
    }

    if (rec.recording_id.empty()) throw ValidationError(where + "empty id");
    if (rec.split == Split::kTrain && rec.labels.empty()) {
        throw ValidationError(where + "train record '" + rec.recording_id + "' has no labels");
    }
    if (rec.annotations) {
        for (const auto& a : *rec.annotations) {
            if (!(a.start_s >= 0.0) || !(a.end_s > a.start_s)) {
                throw ValidationError(where + "invalid annotation span " + span_text(a) +
                                      " in record '" + rec.recording_id + "'");
            }
        }
    }
    return rec;
}

}  // namespace

std::vector<RecordingMeta> parse_manifest(const std::string& text) {
    std::vector<RecordingMeta> out;
    std::set<std::string> ids;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        RecordingMeta rec = parse_record(line, line_no);
        if (!ids.insert(rec.recording_id).second) {
            throw ValidationError("manifest line " + std::to_string(line_no) +
                                  ": duplicate recording id '" + rec.recording_id + "'");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<RecordingMeta> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open manifest: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_manifest(ss.str());
}

std::string format_manifest(const std::vector<RecordingMeta>& records) {
    std::string out;
    for (const auto& rec : records) {
        ordered_json j;
        j["id"] = rec.recording_id;
        j["path"] = rec.path;
        j["labels"] = rec.labels;
        j["dataset"] = rec.dataset;
        j["split"] = rec.split == Split::kTrain ? "train" : "eval";
        if (rec.annotations) {
            ordered_json arr = ordered_json::array();
            for (const auto& a : *rec.annotations) {
                arr.push_back({{"start_s", a.start_s}, {"end_s", a.end_s}, {"label", a.label}});
            }
            j["annotations"] = std::move(arr);
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<RecordingMeta>& records) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest: " + path.string());
    out << format_manifest(records);
}

void validate_annotations(const RecordingMeta& rec, double duration_s) {
    if (!rec.annotations) return;
    for (const auto& a : *rec.annotations) {
        if (a.end_s > duration_s + 1e-9) {
            throw ValidationError("annotation " + span_text(a) + " of '" + rec.recording_id +
                                  "' ends after the recording (" + std::to_string(duration_s) + " s)");
        }
    }
}

std::filesystem::path resolve_audio_path(const std::filesystem::path& manifest_path,
                                         const RecordingMeta& rec) {
    std::filesystem::path p(rec.path);
    if (p.is_absolute()) return p;
    return manifest_path.parent_path() / p;
}

}  // namespace bioembed
