#include "bioembed/protocols.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

#include "bioembed/errors.hpp"
#include "bioembed/losses.hpp"
#include "bioembed/metrics.hpp"
#include "bioembed/rng.hpp"

namespace bioembed {
namespace {

constexpr TaskType kAllTypes[] = {TaskType::kClassify, TaskType::kRetrieval, TaskType::kTransfer};

void warn(const ProtocolOptions& opts, std::string msg) {
    if (opts.warnings) opts.warnings->push_back(std::move(msg));
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

bool has_class(const LabelledEmbedding& e, int c) {
    return std::find(e.classes.begin(), e.classes.end(), c) != e.classes.end();
}

std::vector<int> class_ids(const std::vector<LabelledEmbedding>& items) {
    std::set<int> ids;
    for (const auto& it : items) ids.insert(it.classes.begin(), it.classes.end());
    return {ids.begin(), ids.end()};
}

double probe_loss(const Eigen::MatrixXd& X, const std::vector<int>& y, const Eigen::MatrixXd& W,
                  const Eigen::VectorXd& b, double l2) {
    const Eigen::MatrixXd logits = (W * X).colwise() + b;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < X.cols(); ++i) loss -= log_softmax(logits.col(i))(y[i]);
    return loss / static_cast<double>(X.cols()) + 0.5 * l2 * W.squaredNorm();
}

void probe_gradient(const Eigen::MatrixXd& X, const std::vector<int>& y, const Eigen::MatrixXd& W,
                    const Eigen::VectorXd& b, double l2, Eigen::MatrixXd& gW, Eigen::VectorXd& gb) {
    Eigen::MatrixXd g = (W * X).colwise() + b;
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
        g.col(i) = softmax(g.col(i));
        g(y[i], i) -= 1.0;
    }
    g /= static_cast<double>(X.cols());
    gW.noalias() = g * X.transpose();
    gW += l2 * W;
    gb = g.rowwise().sum();
}

}  // namespace

std::string to_string(TaskType t) {
    switch (t) {
        case TaskType::kClassify: return "classify";
        case TaskType::kRetrieval: return "retrieval";
        case TaskType::kTransfer: return "transfer";
    }
    return "classify";
}

TaskType parse_task_type(const std::string& name) {
    if (name == "classify") return TaskType::kClassify;
    if (name == "retrieval") return TaskType::kRetrieval;
    if (name == "transfer") return TaskType::kTransfer;
    throw UsageError("unknown task '" + name + "' (expected classify|retrieval|transfer)");
}

double geometric_mean(const std::vector<double>& values) {
    if (values.empty()) throw UndefinedMetricError("geometric mean of nothing");
    double log_sum = 0.0;
    for (double v : values) {
        if (v < 0.0 || !std::isfinite(v)) throw ValidationError("geometric mean needs finite non-negative values");
        if (v == 0.0) return 0.0;
        log_sum += std::log(v);
    }
    return std::exp(log_sum / static_cast<double>(values.size()));
}

QualityReport aggregate_partial(const std::vector<TaskScore>& scores) {
    QualityReport r;
    r.scores = scores;
    std::map<TaskType, std::vector<double>> by_type;
    for (const auto& s : scores) {
        if (!(s.value >= 0.0 && s.value <= 1.0)) {
            throw ValidationError("task score for '" + s.dataset + "' is outside [0, 1]");
        }
        by_type[s.task_type].push_back(s.value);
    }
    std::vector<double> means;
    for (TaskType t : kAllTypes) {
        auto it = by_type.find(t);
        if (it == by_type.end()) {
            r.missing.push_back(t);
            continue;
        }
        r.type_means[t] = geometric_mean(it->second);
        means.push_back(r.type_means[t]);
    }
    if (r.missing.empty()) r.overall = geometric_mean(means);
    return r;
}

QualityReport aggregate(const std::vector<TaskScore>& scores) {
    QualityReport r = aggregate_partial(scores);
    if (!r.missing.empty()) {
        std::string names;
        for (TaskType t : r.missing) names += (names.empty() ? "" : ", ") + to_string(t);
        throw ValidationError("cannot compute the overall score: no scores for task type(s) " + names);
    }
    return r;
}

nlohmann::ordered_json QualityReport::to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : scores) {
        arr.push_back({{"dataset", s.dataset}, {"task_type", to_string(s.task_type)}, {"value", s.value}});
    }
    j["scores"] = std::move(arr);
    nlohmann::ordered_json means = nlohmann::ordered_json::object();
    for (TaskType t : kAllTypes) {
        if (auto it = type_means.find(t); it != type_means.end()) means[to_string(t)] = it->second;
    }
    j["task_type_means"] = std::move(means);
    j["overall"] = overall ? nlohmann::ordered_json(*overall) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json miss = nlohmann::ordered_json::array();
    for (TaskType t : missing) miss.push_back(to_string(t));
    j["missing_task_types"] = std::move(miss);
    return j;
}

std::string QualityReport::to_csv() const {
    std::string out = "dataset,task_type,value\n";
    char buf[32];
    for (const auto& s : scores) {
        const auto res = std::to_chars(buf, buf + sizeof buf, s.value);
        out += s.dataset + ',' + to_string(s.task_type) + ',' + std::string(buf, res.ptr) + '\n';
    }
    return out;
}

TaskScore eval_pretrained(const std::string& dataset, const std::vector<RecordingMeta>& records,
                          const std::map<std::string, std::vector<ScoredWindow>>& windows,
                          const LabelVocabulary& vocab, double min_overlap_s) {
    const auto C = static_cast<int>(vocab.size());
    std::vector<std::vector<ScoredExample>> per_class(static_cast<std::size_t>(C));
    for (const auto& rec : records) {
        if (!rec.annotations) {
            throw ValidationError("classify task: record '" + rec.recording_id + "' has no annotations field");
        }
        std::vector<std::pair<int, const AnnotationSpan*>> spans;
        for (const auto& a : *rec.annotations) spans.emplace_back(vocab.id(a.label), &a);

        auto it = windows.find(rec.recording_id);
        if (it == windows.end()) {
            throw ValidationError("classify task: no windows for record '" + rec.recording_id + "'");
        }
        for (const auto& w : it->second) {
            if (w.class_scores.size() != C) throw ValidationError("classify task: score vector has wrong size");
            std::vector<bool> positive(static_cast<std::size_t>(C), false);
            for (const auto& [c, a] : spans) {
                const double overlap = std::min(a->end_s, w.start_s + w.duration_s) - std::max(a->start_s, w.start_s);
                if (overlap > min_overlap_s) positive[static_cast<std::size_t>(c)] = true;
            }
            for (int c = 0; c < C; ++c) per_class[c].push_back({w.class_scores(c), positive[c]});
        }
    }

    double total = 0.0;
    int used = 0;
    for (const auto& ex : per_class) {
        const auto pos = std::count_if(ex.begin(), ex.end(), [](const auto& e) { return e.positive; });
        if (pos == 0 || pos == static_cast<long>(ex.size())) continue;
        total += roc_auc(ex);
        ++used;
    }
    if (used == 0) throw UndefinedMetricError("classify task on '" + dataset + "': no class has both positive and negative windows");
    return {TaskType::kClassify, dataset, total / used};
}

TaskScore eval_retrieval(const std::string& dataset, const std::vector<LabelledEmbedding>& items,
                         const ProtocolOptions& opts) {
    const std::vector<int> classes = class_ids(items);
    if (classes.size() < 2) throw UndefinedMetricError("retrieval on '" + dataset + "' needs at least two classes");
    double total = 0.0;
    int used = 0;
    for (int c : classes) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (has_class(items[i], c)) members.push_back(i);
        }
        if (members.size() < 2) {
            warn(opts, "retrieval '" + dataset + "': class " + std::to_string(c) + " has fewer than 2 examples; skipped");
            continue;
        }
        if (members.size() == items.size()) {
            warn(opts, "retrieval '" + dataset + "': class " + std::to_string(c) + " has no negatives; skipped");
            continue;
        }
        Rng rng = stream(opts.seed, "retrieval:" + dataset, static_cast<std::uint64_t>(c));
        const std::size_t q = members[std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng)];
        std::vector<ScoredExample> ranked;
        ranked.reserve(items.size() - 1);
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i == q) continue;
            // Ascending cosine distance == descending cosine similarity.
            ranked.push_back({cosine_similarity(items[q].embedding, items[i].embedding), has_class(items[i], c)});
        }
        total += roc_auc(ranked);
        ++used;
    }
    if (used == 0) throw UndefinedMetricError("retrieval on '" + dataset + "': no usable class");
    return {TaskScore{TaskType::kRetrieval, dataset, total / used}};
}

Eigen::VectorXd LinearProbe::probabilities(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = (x - feature_mean).cwiseQuotient(feature_scale);
    return softmax(weights * z + bias);
}

LinearProbe fit_linear_probe(const std::vector<Eigen::VectorXd>& x, const std::vector<int>& y, int num_classes,
                             int steps, double l2) {
    if (x.empty() || x.size() != y.size()) throw ValidationError("fit_linear_probe: need one label per example");
    const Eigen::Index d = x.front().size();
    const auto n = static_cast<Eigen::Index>(x.size());
    LinearProbe probe;
    Eigen::MatrixXd X(d, n);
    for (Eigen::Index i = 0; i < n; ++i) X.col(i) = x[i];
    probe.feature_mean = X.rowwise().mean();
    X.colwise() -= probe.feature_mean;
    probe.feature_scale = (X.array().square().rowwise().sum() / static_cast<double>(n)).sqrt().matrix();
    for (Eigen::Index k = 0; k < d; ++k) {
        if (!(probe.feature_scale(k) > 1e-12)) probe.feature_scale(k) = 1.0;
    }
    X = probe.feature_scale.cwiseInverse().asDiagonal() * X;

    // Smoothness bound of the mean softmax cross-entropy (bias folded in as a unit feature).
    Eigen::MatrixXd gram = X * X.transpose() / static_cast<double>(n);
    const double lambda_max = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly)
                                  .eigenvalues()
                                  .maxCoeff();
    const double lipschitz = 0.5 * (lambda_max + 1.0) + l2;

    probe.weights = Eigen::MatrixXd::Zero(num_classes, d);
    probe.bias = Eigen::VectorXd::Zero(num_classes);
    Eigen::MatrixXd gW;
    Eigen::VectorXd gb;
    probe_gradient(X, y, probe.weights, probe.bias, l2, gW, gb);

    // Three-point line search for the fixed step size.
    double best_loss = std::numeric_limits<double>::infinity();
    for (double scale : {0.25, 0.5, 1.0}) {
        const double eta = scale / lipschitz;
        const double loss = probe_loss(X, y, -eta * gW, -eta * gb, l2);
        if (loss < best_loss) {
            best_loss = loss;
            probe.step_size = eta;
        }
    }

    for (int s = 0; s < steps; ++s) {
        if (s > 0) probe_gradient(X, y, probe.weights, probe.bias, l2, gW, gb);
        probe.weights -= probe.step_size * gW;
        probe.bias -= probe.step_size * gb;
    }
    return probe;
}

TaskScore eval_linear_probe(const std::string& dataset, const std::vector<LabelledEmbedding>& items,
                            const ProtocolOptions& opts) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].classes.empty()) continue;
        by_class[items[i].classes.front()].push_back(i);
    }
    std::vector<int> eligible;
    for (const auto& [c, members] : by_class) {
        if (static_cast<int>(members.size()) > opts.shots) {
            eligible.push_back(c);
        } else {
            warn(opts, "transfer '" + dataset + "': class " + std::to_string(c) + " has " +
                           std::to_string(members.size()) + " examples (need > " + std::to_string(opts.shots) +
                           "); skipped");
        }
    }
    if (eligible.size() < 2) throw UndefinedMetricError("transfer on '" + dataset + "' needs two eligible classes");

    std::vector<Eigen::VectorXd> train_x;
    std::vector<int> train_y;
    std::vector<std::pair<std::size_t, int>> test;  // (item, probe class)
    for (std::size_t k = 0; k < eligible.size(); ++k) {
        std::vector<std::size_t> members = by_class[eligible[k]];
        Rng rng = stream(opts.seed, "probe:" + dataset, static_cast<std::uint64_t>(eligible[k]));
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t m = 0; m < members.size(); ++m) {
            if (static_cast<int>(m) < opts.shots) {
                train_x.push_back(items[members[m]].embedding);
                train_y.push_back(static_cast<int>(k));
            } else {
                test.emplace_back(members[m], static_cast<int>(k));
            }
        }
    }

    const LinearProbe probe =
        fit_linear_probe(train_x, train_y, static_cast<int>(eligible.size()), opts.probe_steps, opts.probe_l2);
    std::vector<Eigen::VectorXd> probs;
    probs.reserve(test.size());
    for (const auto& [idx, k] : test) probs.push_back(probe.probabilities(items[idx].embedding));

    double total = 0.0;
    int used = 0;
    for (std::size_t k = 0; k < eligible.size(); ++k) {
        std::vector<ScoredExample> ex;
        for (std::size_t t = 0; t < test.size(); ++t) {
            ex.push_back({probs[t](static_cast<Eigen::Index>(k)), test[t].second == static_cast<int>(k)});
        }
        total += roc_auc(ex);
        ++used;
    }
    return {TaskType::kTransfer, dataset, total / used};
}

}  // namespace bioembed
