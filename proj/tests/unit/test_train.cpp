#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "bioembed/adam.hpp"
#include "bioembed/checkpoint.hpp"
#include "bioembed/errors.hpp"
#include "bioembed/frontend.hpp"
#include "bioembed/losses.hpp"
#include "bioembed/train.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace bioembed;

namespace {

ModelDims tiny_dims(int classes, int sources) {
    ModelDims d;
    d.hidden = 4;
    d.d = 4;
    d.num_classes = classes;
    d.source_rank = 2;
    d.num_sources = sources;
    return d;
}

TrainingCorpus tone_corpus(int per_class) {
    testsupport::CorpusSpec spec;
    spec.species = {"a", "b", "c"};
    spec.voices = {{1000.0}, {3000.0}, {7000.0}};
    spec.train_per_species = per_class;
    spec.eval_per_species = 0;
    spec.min_s = 3.0;
    spec.max_s = 8.0;
    const auto recs = testsupport::make_corpus(spec);
    return testsupport::training_corpus(recs, LabelVocabulary({"a", "b", "c"}));
}

PhaseConfig quick_config() {
    PhaseConfig cfg = PhaseConfig::defaults(Phase::kOne);
    cfg.batch_size = 3;
    cfg.max_steps = 2;
    cfg.seed = 5;
    return cfg;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
    const auto x = a.blocks();
    const auto y = b.blocks();
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::equal(x[i].second.begin(), x[i].second.end(), y[i].second.begin(), y[i].second.end())) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("species cross-entropy") {
    for (int c : {2, 5, 11}) {
        CHECK(species_ce(Eigen::VectorXd::Zero(c), {0}).value == doctest::Approx(std::log(c)));
    }
    Eigen::VectorXd big = Eigen::VectorXd::Zero(4);
    big(2) = 800.0;
    CHECK(species_ce(big, {2}).value < 1e-12);
    CHECK(std::isfinite(species_ce(big, {0}).value));

    // C = 3, logits (1, 0, 0), targets {0, 1}: -(ln p0 + ln p1) / 2 with Z = e + 2.
    Eigen::VectorXd l(3);
    l << 1.0, 0.0, 0.0;
    const long double z = std::exp(1.0L) + 2.0L;
    const long double expected = -0.5L * ((1.0L - std::log(z)) + (0.0L - std::log(z)));
    CHECK(std::abs(species_ce(l, {0, 1}).value - static_cast<double>(expected)) < 1e-10);
    const Eigen::VectorXd g = species_ce(l, {0, 1}).grad;
    CHECK(std::abs(g.sum()) < 1e-12);
    CHECK_THROWS_AS(species_ce(l, {}), ValidationError);
    CHECK_THROWS(species_ce(l, {3}));
}

TEST_CASE("distillation and source losses") {
    Rng rng = stream(1, "loss");
    std::normal_distribution<double> n(0.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd t(6), s(6);
        for (int i = 0; i < 6; ++i) {
            t(i) = n(rng);
            s(i) = n(rng);
        }
        const Eigen::VectorXd p = softmax(t);
        const double entropy = -(p.array() * log_softmax(t).array()).sum();
        CHECK(distillation_loss(t, t).value == doctest::Approx(entropy).epsilon(1e-12));
        CHECK(distillation_loss(t, s).value >= entropy - 1e-12);
        CHECK(source_ce(s, trial % 6).value >= 0.0);
    }
    const Eigen::VectorXd uniform = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd s(4);
    s << 0.3, -1.0, 2.0, 0.1;
    const double expected = std::log(4.0) - (s.array() - s.mean()).mean();
    CHECK(distillation_loss(uniform, s).value >= distillation_loss(uniform, uniform).value);
    CHECK(distillation_loss(uniform, uniform).value == doctest::Approx(std::log(4.0)));
    CHECK(distillation_loss(uniform, s).value ==
          doctest::Approx(-log_softmax(s).mean()));
    CHECK(expected == doctest::Approx(std::log(4.0)));

    CHECK(source_ce(Eigen::VectorXd::Zero(7), 3).value == doctest::Approx(std::log(7.0)));
    Eigen::VectorXd dom = Eigen::VectorXd::Zero(7);
    dom(3) = 900.0;
    CHECK(source_ce(dom, 3).value < 1e-12);
    CHECK_THROWS(source_ce(dom, 7));
}

TEST_CASE("orthogonality loss") {
    Eigen::MatrixXd ortho = Eigen::MatrixXd::Zero(8, 5);
    for (int r = 0; r < 8; ++r) ortho(r, r % 4) = (r % 2 ? 2.0 : 1.0);
    CHECK(orthogonality_loss(ortho, 4).value == doctest::Approx(0.0));

    Eigen::MatrixXd same(4, 3);
    same.rowwise() = Eigen::RowVector3d(0.6, 0.8, 0.0);
    CHECK(orthogonality_loss(same, 4).value == doctest::Approx(12.0));

    Rng rng = stream(2, "orth");
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd q(12, 6);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = g(rng);
    double naive = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                const auto a = q.row(c * 4 + i);
                const auto b = q.row(c * 4 + j);
                double dot = 0.0, na = 0.0, nb = 0.0;
                for (int k = 0; k < 6; ++k) {
                    dot += a(k) * b(k);
                    na += a(k) * a(k);
                    nb += b(k) * b(k);
                }
                const double gram = dot / std::sqrt(na * nb) - (i == j ? 1.0 : 0.0);
                naive += gram * gram;
            }
        }
    }
    CHECK(std::abs(orthogonality_loss(q, 4).value - naive / 3.0) < 1e-8);

    Eigen::MatrixXd zero_row = q;
    zero_row.row(5).setZero();
    CHECK_THROWS(orthogonality_loss(zero_row, 4));
}

TEST_CASE("adam") {
    ModelDims dims = tiny_dims(2, 2);
    dims.frames = 50;
    dims.mel_bins = 12;
    Rng rng = stream(3, "adam");
    ModelParams p = init_params(dims, rng);
    const ModelParams before = p;
    AdamState st = make_adam_state(p);
    adam_step(st, p, p.zeros_like(), 0.1);
    CHECK(st.step == 1);
    CHECK(same_params(p, before));

    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd g(3);
    g << 2.0, -0.5, 1e-3;
    AdamState flat;
    adam_step(flat, x, g, 0.01);
    for (int i = 0; i < 3; ++i) {
        CHECK(x(i) == doctest::Approx(-0.01 * (g(i) > 0 ? 1.0 : -1.0)).epsilon(1e-4));
    }

    // Convex quadratic 0.5 (x - m)^T A (x - m).
    Eigen::Matrix2d a;
    a << 3.0, 0.5, 0.5, 1.0;
    const Eigen::Vector2d m(1.5, -2.0);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
    AdamState quad;
    for (int i = 0; i < 200; ++i) {
        const Eigen::VectorXd grad = a * (v - m);
        adam_step(quad, v, grad, 0.2 * std::pow(0.98, i));
    }
    CHECK((v - m).norm() < 1e-3);

    ModelParams bad = p.zeros_like();
    bad.linear_b(0) = std::nan("");
    const ModelParams snapshot = p;
    CHECK_THROWS_AS(adam_step(st, p, bad, 0.1), NumericError);
    CHECK(same_params(p, snapshot));
}

TEST_CASE("phase configuration") {
    const PhaseConfig two = PhaseConfig::defaults(Phase::kTwo);
    CHECK(two.learning_rate == 3.20e-6);
    CHECK(two.mixup.n == 0);
    CHECK(two.dropout_rate == 0.0);
    CHECK(two.source_loss_weight == 0.0);
    CHECK(two.distill_loss_weight == 4.22);
    const PhaseConfig one = PhaseConfig::defaults(Phase::kOne);
    CHECK(one.learning_rate == 6.41e-4);
    CHECK(one.dropout_rate == 0.49);
    CHECK(one.source_loss_weight == 0.11);
    CHECK(one.distill_loss_weight == 0.0);
    CHECK(one.mixup.n == 2);
    CHECK(one.mixup.alpha == 91.3);
    CHECK(one.mixup.beta == 100.0);
    CHECK(one.mixup.omega == 1.0);

    PhaseConfig bad = one;
    bad.distill_loss_weight = 1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = one;
    bad.max_steps = 300001;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = two;
    bad.max_steps = 400000;
    CHECK_NOTHROW(bad.validate());

    TrainSettings s;
    apply_config_text(s, "# comment\nlearning_rate = 0.5\n\nmixup_n=3  # trailing\nwindow_strategy = peak\n"
                         "d = 12\nlabel_level = genus\nsimilarity = cosine\n");
    CHECK(s.phase.learning_rate == 0.5);
    CHECK(s.phase.mixup.n == 3);
    CHECK(s.phase.window_strategy == WindowStrategy::kPeak);
    CHECK(s.dims.d == 12);
    CHECK(s.dims.similarity == PrototypeSimilarity::kCosine);
    CHECK(s.label_level == TaxonLevel::kGenus);
    try {
        apply_config_text(s, "learning_rat = 1\n");
        FAIL("expected a usage error");
    } catch (const UsageError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("learning_rat") != std::string::npos);
        for (const auto& key : config_keys()) CHECK(msg.find(key) != std::string::npos);
    }
    CHECK_THROWS_AS(apply_config_text(s, "learning_rate = fast\n"), UsageError);
    CHECK_THROWS_AS(apply_config_text(s, "just words\n"), UsageError);
}

TEST_CASE("assemble_example") {
    const TrainingCorpus corpus = tone_corpus(2);
    PhaseConfig cfg = quick_config();
    cfg.mixup = {5, 1.0, 0.01, 1.0};
    Rng rng = stream(4, "assemble");
    for (int i = 0; i < 30; ++i) {
        const BatchItem item = assemble_example(corpus, cfg, rng);
        CHECK(item.audio.samples.size() == 160000);
        CHECK(item.components.size() <= corpus.examples.size());
        std::set<int> seen;
        std::set<int> expected;
        int dominant = -1;
        double best = -1.0;
        for (auto [idx, w] : item.components) {
            CHECK(seen.insert(idx).second);
            for (int c : corpus.examples[idx].classes) expected.insert(c);
            if (w > best) {
                best = w;
                dominant = corpus.examples[idx].source_id;
            }
        }
        CHECK(std::vector<int>(expected.begin(), expected.end()) == item.classes);
        CHECK(item.source_id == dominant);
    }
    cfg.source_target = SourceTarget::kNone;
    CHECK(assemble_example(corpus, cfg, rng).source_id == -1);
}

TEST_CASE("compute_step invariants") {
    ModelDims dims = tiny_dims(3, 5);
    dims.frames = 50;
    dims.mel_bins = 14;
    dims.hidden = 6;
    const auto setup = testsupport::make_gradcheck_setup(dims, 4, 6);
    std::vector<const RowMatrix*> ptrs;
    for (const auto& s : setup.specs) ptrs.push_back(&s);
    std::vector<BatchItem> items(4);
    for (int b = 0; b < 4; ++b) {
        items[b].classes = setup.targets[b];
        items[b].source_id = setup.sources[b];
    }
    PhaseConfig cfg = PhaseConfig::defaults(Phase::kTwo);
    cfg.source_loss_weight = 0.3;
    cfg.orthogonality_weight = 0.7;
    cfg.dropout_rate = 0.2;

    Rng r1 = stream(7, "drop"), r2 = stream(7, "drop");
    const StepResult a = compute_step(setup.params, cfg, ptrs, items, &r1);
    const StepResult b = compute_step(setup.params, cfg, ptrs, items, &r2);
    CHECK(a.losses.total == weighted_total(a.losses, cfg));
    CHECK(a.losses.total == b.losses.total);
    CHECK(same_params(a.grads, b.grads));
    CHECK(a.losses.species_linear >= 0.0);
    CHECK(a.losses.species_prototype >= 0.0);
    CHECK(a.losses.source >= 0.0);

    // Dropping the prototype losses changes no embedder gradient coordinate.
    PhaseConfig no_proto = cfg;
    no_proto.prototype_losses = false;
    Rng r3 = stream(7, "drop");
    const StepResult c = compute_step(setup.params, no_proto, ptrs, items, &r3);
    CHECK(c.grads.embed_w1 == a.grads.embed_w1);
    CHECK(c.grads.embed_b1 == a.grads.embed_b1);
    CHECK(c.grads.embed_w2 == a.grads.embed_w2);
    CHECK(c.grads.embed_b2 == a.grads.embed_b2);
    CHECK(c.losses.species_prototype == 0.0);
    CHECK(c.losses.orthogonality == 0.0);
}

TEST_CASE("run_phase") {
    const TrainingCorpus corpus = tone_corpus(2);
    ModelDims dims = tiny_dims(3, static_cast<int>(corpus.examples.size()));
    Rng rng = stream(8, "init");
    const ModelParams init = init_params(dims, rng);

    PhaseConfig cfg = quick_config();
    cfg.max_steps = 0;
    CHECK(same_params(run_phase(cfg, corpus, init).params, init));

    cfg.max_steps = 2;
    const PhaseResult r1 = run_phase(cfg, corpus, init);
    const PhaseResult r2 = run_phase(cfg, corpus, init);
    CHECK(same_params(r1.params, r2.params));
    CHECK(!same_params(r1.params, init));
    REQUIRE(r1.log.size() == 2);
    CHECK(r1.log[1].step == 2);
    CHECK(r1.log[0].to_json().dump() == r2.log[0].to_json().dump());
    const auto j = r1.log[0].to_json();
    CHECK(j.contains("losses"));
    CHECK(j["phase"] == "one");
    CHECK(j["lr"] == cfg.learning_rate);

    // Phase two at lr 0 is a pure evaluation pass.
    PhaseConfig two = PhaseConfig::defaults(Phase::kTwo);
    two.learning_rate = 0.0;
    two.batch_size = 3;
    two.max_steps = 2;
    two.validate_every = 1;
    std::vector<double> scores;
    const PhaseResult r3 = run_phase(two, corpus, r1.params, [&](const ModelParams& p, long) {
        const double s = p.linear_w.sum() + p.prototypes.sum();
        scores.push_back(s);
        return nlohmann::ordered_json{{"score", s}};
    });
    CHECK(same_params(r3.params, r1.params));
    REQUIRE(scores.size() == 2);
    CHECK(scores[0] == scores[1]);
    CHECK(r3.log[0].validation.has_value());

    ModelDims wrong = dims;
    wrong.num_classes = 4;
    Rng rng2 = stream(9, "init");
    CHECK_THROWS_AS(run_phase(cfg, corpus, init_params(wrong, rng2)), ValidationError);
}

TEST_CASE("checkpoint round trip") {
    testsupport::TempDir dir;
    ModelDims dims = tiny_dims(3, 4);
    dims.similarity = PrototypeSimilarity::kCosine;
    Rng rng = stream(10, "init");
    ModelParams p = init_params(dims, rng);
    CheckpointHeader h;
    h.phase = "one";
    h.seed = 42;
    h.classes = {"a", "b", "c"};
    h.taxonomy = {{"a", {"g", "f", "o"}}};
    h.config = nlohmann::ordered_json{{"learning_rate", 0.1}};
    save_checkpoint(dir / "c.bck", p, h);
    const Checkpoint ck = load_checkpoint(dir / "c.bck");
    ModelParams rounded = p;
    round_to_float(rounded);
    CHECK(same_params(ck.params, rounded));
    CHECK(ck.params.dims == dims);
    CHECK(ck.header.phase == "one");
    CHECK(ck.header.seed == 42);
    CHECK(ck.header.classes == h.classes);
    CHECK(ck.header.taxonomy == h.taxonomy);
    CHECK(ck.header.config == h.config);
    CHECK(ck.checksum == params_checksum(rounded));

    // Saving the loaded checkpoint reproduces the bytes.
    save_checkpoint(dir / "d.bck", ck.params, ck.header);
    CHECK(testsupport::read_file(dir / "c.bck") == testsupport::read_file(dir / "d.bck"));

    std::string bytes = testsupport::read_file(dir / "c.bck");
    std::ofstream(dir / "t.bck", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
    CHECK_THROWS_AS(load_checkpoint(dir / "t.bck"), ParseError);
    std::ofstream(dir / "m.bck", std::ios::binary) << "XXXX" << bytes.substr(4);
    CHECK_THROWS_AS(load_checkpoint(dir / "m.bck"), ParseError);
}
