#include <doctest.h>

#include <cmath>
#include <random>

#include "bioembed/errors.hpp"
#include "bioembed/metrics.hpp"
#include "bioembed/protocols.hpp"
#include "metric_oracles.hpp"
#include "support.hpp"

using namespace bioembed;

namespace {

std::vector<ScoredExample> make(std::vector<double> scores, std::vector<int> positive) {
    std::vector<ScoredExample> out;
    for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({scores[i], positive[i] != 0});
    return out;
}

std::vector<LabelledEmbedding> clusters(int classes, int per_class, double separation, double spread, int d,
                                        std::uint64_t seed) {
    Rng rng = stream(seed, "clusters");
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<LabelledEmbedding> out;
    for (int c = 0; c < classes; ++c) {
        Eigen::VectorXd centre = Eigen::VectorXd::Zero(d);
        centre(c % d) = separation;
        for (int i = 0; i < per_class; ++i) {
            LabelledEmbedding e;
            e.id = std::to_string(c) + "_" + std::to_string(i);
            e.embedding = centre;
            for (int k = 0; k < d; ++k) e.embedding(k) += spread * g(rng);
            e.classes = {c};
            out.push_back(e);
        }
    }
    return out;
}

}  // namespace

TEST_CASE("roc_auc hand cases") {
    CHECK(roc_auc(make({0.9, 0.8, 0.1, 0.0}, {1, 1, 0, 0})) == 1.0);
    CHECK(roc_auc(make({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0})) == 0.5);
    CHECK(roc_auc(make({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0})) == 0.75);
    CHECK_THROWS_AS(roc_auc(make({0.1, 0.2}, {1, 1})), UndefinedMetricError);
    CHECK_THROWS_AS(roc_auc(make({0.1, 0.2}, {0, 0})), UndefinedMetricError);
    CHECK_THROWS_AS(roc_auc(make({0.1, std::nan("")}, {1, 0})), ValidationError);
}

TEST_CASE("average_precision hand cases") {
    CHECK(average_precision(make({0.3}, {1})) == 1.0);
    CHECK(average_precision(make({0.9, 0.8, 0.1}, {1, 1, 0})) == 1.0);
    CHECK(average_precision(make({0.9, 0.8, 0.7}, {1, 0, 1})) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    CHECK_THROWS_AS(average_precision(make({0.1, 0.2}, {0, 0})), UndefinedMetricError);
}

TEST_CASE("metrics agree with the oracles on every small labelling") {
    Rng rng = stream(1, "metrics");
    std::uniform_int_distribution<int> level(0, 3);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int n = 1; n <= 9; ++n) {
        for (int variant = 0; variant < 3; ++variant) {
            std::vector<double> scores(n);
            for (auto& s : scores) s = variant == 0 ? g(rng) : variant == 1 ? level(rng) : 1.0;
            for (int mask = 0; mask < (1 << n); ++mask) {
                std::vector<int> pos(n);
                for (int i = 0; i < n; ++i) pos[i] = (mask >> i) & 1;
                const auto ex = make(scores, pos);
                if (mask != 0) CHECK(std::abs(average_precision(ex) - testsupport::rank_ap(ex)) <= 1e-12);
                if (mask != 0 && mask != (1 << n) - 1) {
                    CHECK(std::abs(roc_auc(ex) - testsupport::pairwise_auc(ex)) <= 1e-12);
                }
            }
        }
    }
}

TEST_CASE("roc_auc invariances") {
    Rng rng = stream(2, "metrics");
    std::normal_distribution<double> g(0.0, 1.0);
    std::bernoulli_distribution b(0.4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<ScoredExample> ex(40);
        for (auto& e : ex) e = {std::round(g(rng) * 3) / 3, b(rng)};
        ex[0].positive = true;
        ex[1].positive = false;
        auto mapped = ex;
        for (auto& e : mapped) e.score = std::exp(2 * e.score) + 5;
        auto flipped = ex;
        for (auto& e : flipped) e.positive = !e.positive;
        CHECK(roc_auc(mapped) == doctest::Approx(roc_auc(ex)).epsilon(1e-12));
        CHECK(roc_auc(flipped) == doctest::Approx(1.0 - roc_auc(ex)).epsilon(1e-12));
    }
}

TEST_CASE("cmap and top1") {
    std::map<std::string, std::vector<ScoredExample>> per;
    per["a"] = make({0.9, 0.1}, {1, 0});
    CHECK(cmap(per) == 1.0);
    per["b"] = make({0.9, 0.8}, {0, 1});
    CHECK(cmap(per) == doctest::Approx(0.75));
    per["c"] = make({0.9, 0.8}, {0, 0});
    CHECK(cmap(per) == doctest::Approx(0.75));

    Rng rng = stream(3, "cmap");
    std::normal_distribution<double> g(0.0, 1.0);
    std::bernoulli_distribution coin(0.3);
    std::map<std::string, std::vector<ScoredExample>> rnd;
    double oracle = 0.0;
    int used = 0;
    for (int c = 0; c < 5; ++c) {
        std::vector<ScoredExample> ex(15);
        for (auto& e : ex) e = {g(rng), coin(rng)};
        ex[c].positive = true;
        oracle += testsupport::rank_ap(ex);
        ++used;
        rnd[std::to_string(c)] = ex;
    }
    CHECK(cmap(rnd) == doctest::Approx(oracle / used).epsilon(1e-12));

    auto row = [](std::vector<double> l, std::vector<int> t) {
        return Top1Row{Eigen::Map<Eigen::VectorXd>(l.data(), static_cast<Eigen::Index>(l.size())), t};
    };
    std::vector<Top1Row> rows = {row({0.1, 0.9, 0.0}, {1}), row({0.5, 0.5, 0.1}, {0}), row({0.2, 0.1, 0.7}, {0})};
    CHECK(top1(rows) == doctest::Approx(2.0 / 3.0));
    rows.push_back(row({0.9, 0.1, 0.0}, {}));
    CHECK(top1(rows) == doctest::Approx(0.5));
    std::vector<Top1Row> perfect = {row({1, 0}, {0}), row({0, 1}, {1})};
    CHECK(top1(perfect) == 1.0);
}

TEST_CASE("aggregation") {
    std::vector<TaskScore> all = {{TaskType::kClassify, "a", 0.8}, {TaskType::kClassify, "b", 0.8},
                                  {TaskType::kRetrieval, "c", 0.8}, {TaskType::kTransfer, "d", 0.8}};
    CHECK(*aggregate(all).overall == doctest::Approx(0.8));

    std::vector<TaskScore> mixed = {{TaskType::kClassify, "a", 1.0}, {TaskType::kRetrieval, "b", 0.25},
                                    {TaskType::kTransfer, "c", 1.0}};
    CHECK(*aggregate(mixed).overall == doctest::Approx(0.62996).epsilon(1e-5));

    mixed.push_back({TaskType::kRetrieval, "z", 0.0});
    const QualityReport zero = aggregate(mixed);
    CHECK(zero.type_means.at(TaskType::kRetrieval) == 0.0);
    CHECK(*zero.overall == 0.0);

    std::vector<TaskScore> partial = {{TaskType::kRetrieval, "r", 0.7}};
    try {
        aggregate(partial);
        FAIL("expected an error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("classify") != std::string::npos);
        CHECK(std::string(e.what()).find("transfer") != std::string::npos);
    }
    const QualityReport pr = aggregate_partial(partial);
    CHECK(!pr.overall.has_value());
    CHECK(pr.missing == std::vector<TaskType>{TaskType::kClassify, TaskType::kTransfer});
    CHECK(pr.to_json()["overall"].is_null());
    CHECK(pr.to_csv() == "dataset,task_type,value\nr,retrieval,0.7\n");

    // Permutation invariance and monotonicity.
    Rng rng = stream(4, "agg");
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<TaskScore> s;
        for (int i = 0; i < 7; ++i) s.push_back({static_cast<TaskType>(i % 3), "d" + std::to_string(i), u(rng)});
        const double base = *aggregate(s).overall;
        auto shuffled = s;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        CHECK(*aggregate(shuffled).overall == doctest::Approx(base).epsilon(1e-12));
        auto raised = s;
        raised[trial % 7].value = std::min(1.0, raised[trial % 7].value + 0.1);
        CHECK(*aggregate(raised).overall >= base);
    }
}

TEST_CASE("pretrained-classifier protocol") {
    RecordingMeta r;
    r.recording_id = "r";
    r.labels = {"x"};
    r.split = Split::kEval;
    r.annotations = std::vector<AnnotationSpan>{{6.0, 7.0, "x"}};
    const LabelVocabulary vocab({"x", "y"});
    std::map<std::string, std::vector<ScoredWindow>> windows;
    for (double start : {0.0, 2.5, 5.0, 7.5}) {
        const bool overlaps = start < 7.0 && start + 5.0 > 6.0;
        windows["r"].push_back({start, 5.0, Eigen::Vector2d(overlaps ? 1.0 : 0.0, 0.3)});
    }
    CHECK(eval_pretrained("d", {r}, windows, vocab).value == 1.0);

    // Random scores over many windows sit near chance.
    Rng rng = stream(5, "pretrained");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<RecordingMeta> recs;
    std::map<std::string, std::vector<ScoredWindow>> rw;
    for (int i = 0; i < 400; ++i) {
        RecordingMeta m;
        m.recording_id = "r" + std::to_string(i);
        m.labels = {"x"};
        m.split = Split::kEval;
        m.annotations = std::vector<AnnotationSpan>{};
        if (i % 2) m.annotations->push_back({1.0, 2.0, i % 4 == 1 ? "x" : "y"});
        recs.push_back(m);
        rw[m.recording_id].push_back({0.0, 5.0, Eigen::Vector2d(u(rng), u(rng))});
    }
    CHECK(std::abs(eval_pretrained("d", recs, rw, vocab).value - 0.5) < 0.05);

    // An overlap threshold can exclude grazing windows.
    std::map<std::string, std::vector<ScoredWindow>> graze;
    graze["r"] = {{2.5, 5.0, Eigen::Vector2d(0.0, 0.0)}, {5.0, 5.0, Eigen::Vector2d(1.0, 0.0)}};
    RecordingMeta g = r;
    g.annotations = std::vector<AnnotationSpan>{{7.45, 8.0, "x"}};
    CHECK(eval_pretrained("d", {g}, graze, vocab, 0.1).value == 1.0);
    CHECK_THROWS_AS(eval_pretrained("d", {g}, graze, vocab, 0.0), UndefinedMetricError);
}

TEST_CASE("retrieval protocol") {
    std::vector<LabelledEmbedding> antipodal;
    for (int i = 0; i < 6; ++i) {
        antipodal.push_back({"a" + std::to_string(i), Eigen::Vector2d(1.0, 0.0), {0}});
        antipodal.push_back({"b" + std::to_string(i), Eigen::Vector2d(-1.0, 0.0), {1}});
    }
    CHECK(eval_retrieval("d", antipodal).value == 1.0);

    auto same = antipodal;
    for (auto& e : same) e.embedding = Eigen::Vector2d(0.3, 0.4);
    CHECK(eval_retrieval("d", same).value == 0.5);

    const auto c = clusters(4, 25, 10.0, 1.0, 8, 6);
    CHECK(eval_retrieval("d", c).value >= 0.99);

    ProtocolOptions o;
    o.seed = 3;
    CHECK(eval_retrieval("d", c, o).value == eval_retrieval("d", c, o).value);
}

TEST_CASE("linear-probe protocol") {
    ProtocolOptions o;
    o.probe_steps = 2000;
    const auto sep = clusters(4, 40, 6.0, 1.0, 10, 7);
    CHECK(eval_linear_probe("d", sep, o).value >= 0.99);
    CHECK(eval_linear_probe("d", sep, o).value == eval_linear_probe("d", sep, o).value);

    auto shuffled = clusters(4, 300, 6.0, 1.0, 10, 8);
    Rng rng = stream(9, "shuffle");
    std::uniform_int_distribution<int> cls(0, 3);
    for (auto& e : shuffled) e.classes = {cls(rng)};
    CHECK(std::abs(eval_linear_probe("d", shuffled, o).value - 0.5) < 0.05);

    std::vector<LabelledEmbedding> antipodal;
    for (int i = 0; i < 5; ++i) {
        antipodal.push_back({"a" + std::to_string(i), Eigen::Vector2d(1.0, 0.0), {0}});
        antipodal.push_back({"b" + std::to_string(i), Eigen::Vector2d(-1.0, 0.0), {1}});
    }
    ProtocolOptions k;
    k.shots = 4;
    k.probe_steps = 500;
    CHECK(eval_linear_probe("d", antipodal, k).value == 1.0);

    std::vector<std::string> warnings;
    ProtocolOptions w = o;
    w.warnings = &warnings;
    auto uneven = sep;
    uneven.push_back({"lonely", Eigen::VectorXd::Zero(10), {9}});
    eval_linear_probe("d", uneven, w);
    CHECK(warnings.size() == 1);
}

TEST_CASE("fitted probe separates its training data") {
    std::vector<Eigen::VectorXd> x;
    std::vector<int> y;
    for (int i = 0; i < 20; ++i) {
        x.push_back(Eigen::Vector2d(i % 2 ? 2.0 : -2.0, 0.1 * i));
        y.push_back(i % 2);
    }
    const LinearProbe p = fit_linear_probe(x, y, 2, 1000, 1e-4);
    CHECK(p.step_size > 0.0);
    for (int i = 0; i < 20; ++i) CHECK(p.probabilities(x[i])(y[i]) > 0.9);
}
