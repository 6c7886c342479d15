#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bioembed/manifest.hpp"
#include "bioembed/model.hpp"
#include "bioembed/vocabulary.hpp"

namespace bioembed {

enum class TaskType { kClassify, kRetrieval, kTransfer };

std::string to_string(TaskType t);
TaskType parse_task_type(const std::string& name);

struct TaskScore {
    TaskType task_type = TaskType::kClassify;
    std::string dataset;
    double value = 0.0;  // in [0, 1]
};

struct QualityReport {
    std::vector<TaskScore> scores;
    std::map<TaskType, double> type_means;
    std::optional<double> overall;         // present only when all three task types are scored
    std::vector<TaskType> missing;

    nlohmann::ordered_json to_json() const;
    std::string to_csv() const;
};

// exp(mean(ln x)); 0 as soon as any value is 0.
double geometric_mean(const std::vector<double>& values);

// Per-type geometric means and their geometric mean. Throws ValidationError
// naming the absent task types.
QualityReport aggregate(const std::vector<TaskScore>& scores);
// As aggregate(), but reports absent task types instead of throwing.
QualityReport aggregate_partial(const std::vector<TaskScore>& scores);

// Class scores of one evaluation window.
struct ScoredWindow {
    double start_s = 0.0;
    double duration_s = 5.0;
    Eigen::VectorXd class_scores;  // indexed by the training vocabulary
};

// Per-class ROC-AUC over windows, a window being positive for class c when an
// annotation of c overlaps it by more than min_overlap_s; macro average over
// classes with both positive and negative windows.
TaskScore eval_pretrained(const std::string& dataset, const std::vector<RecordingMeta>& records,
                          const std::map<std::string, std::vector<ScoredWindow>>& windows,
                          const LabelVocabulary& vocab, double min_overlap_s = 0.0);

// An embedded example: one vector plus the class ids it carries.
struct LabelledEmbedding {
    std::string id;
    Eigen::VectorXd embedding;
    std::vector<int> classes;
};

struct ProtocolOptions {
    std::uint64_t seed = 0;
    int shots = 16;
    int probe_steps = 10000;
    double probe_l2 = 1e-4;
    std::vector<std::string>* warnings = nullptr;  // skipped classes are reported here
};

// One random query per class; all other examples ranked by cosine distance;
// ROC-AUC with same-class examples as positives; macro average.
TaskScore eval_retrieval(const std::string& dataset, const std::vector<LabelledEmbedding>& items,
                         const ProtocolOptions& opts = {});

// Few-shot multinomial logistic regression on frozen embeddings (first label
// of each example), trained on `shots` examples per class and scored by
// one-vs-rest ROC-AUC on everything held out.
TaskScore eval_linear_probe(const std::string& dataset, const std::vector<LabelledEmbedding>& items,
                            const ProtocolOptions& opts = {});

// Fitted probe, exposed for tests.
struct LinearProbe {
    Eigen::VectorXd feature_mean;
    Eigen::VectorXd feature_scale;
    Eigen::MatrixXd weights;  // classes x d
    Eigen::VectorXd bias;
    double step_size = 0.0;

    Eigen::VectorXd probabilities(const Eigen::VectorXd& x) const;
};

LinearProbe fit_linear_probe(const std::vector<Eigen::VectorXd>& x, const std::vector<int>& y, int num_classes,
                             int steps, double l2);

}  // namespace bioembed
