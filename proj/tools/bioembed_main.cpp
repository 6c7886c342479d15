#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bioembed/errors.hpp"
#include "bioembed/pipeline.hpp"

using namespace bioembed;

namespace {

std::vector<TaskType> parse_tasks(const std::vector<std::string>& names) {
    std::vector<TaskType> tasks;
    for (const auto& joined : names) {
        std::stringstream ss(joined);
        std::string name;
        while (std::getline(ss, name, ',')) {
            if (!name.empty()) tasks.push_back(parse_task_type(name));
        }
    }
    return tasks;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bioacoustic embedding toolkit"};
    app.require_subcommand(1);

    std::string manifest, checkpoint, out;
    double stride = 5.0;
    auto* embed = app.add_subcommand("embed", "Embed every recording of a manifest");
    embed->add_option("--manifest", manifest)->required();
    embed->add_option("--checkpoint", checkpoint)->required();
    embed->add_option("--stride", stride, "Window stride in seconds");
    embed->add_option("--out", out)->required();

    TrainOptions topts;
    std::string config, tmanifest, tout, log, init_from, taxonomy, phase;
    long max_steps = -1;
    std::uint64_t tseed = 0;
    auto* train = app.add_subcommand("train", "Run one training phase");
    train->add_option("--config", config);
    train->add_option("--manifest", tmanifest)->required();
    train->add_option("--out", tout)->required();
    train->add_option("--log", log, "JSON-lines training log (default <out>.log.jsonl)");
    train->add_option("--init-from", init_from);
    train->add_option("--taxonomy", taxonomy);
    auto* phase_opt = train->add_option("--phase", phase, "one | two");
    auto* steps_opt = train->add_option("--max-steps", max_steps);
    auto* tseed_opt = train->add_option("--seed", tseed);

    EvalOptions eopts;
    std::string echeckpoint, eout;
    std::vector<std::string> embeddings, classify, retrieval, transfer, tasks;
    auto* eval = app.add_subcommand("eval", "Score frozen embeddings");
    eval->add_option("--checkpoint", echeckpoint);
    eval->add_option("--embeddings", embeddings);
    eval->add_option("--classify", classify, "Annotated manifests");
    eval->add_option("--retrieval", retrieval, "Labelled manifests");
    eval->add_option("--transfer", transfer, "Labelled manifests");
    eval->add_option("--tasks", tasks, "classify,retrieval,transfer");
    eval->add_option("--seed", eopts.seed);
    eval->add_option("--min-overlap", eopts.min_overlap_s);
    eval->add_option("--shots", eopts.shots);
    eval->add_option("--probe-steps", eopts.probe_steps);
    eval->add_option("--out", eout, "Writes <out>.json and <out>.csv");

    std::string pmanifest, pout;
    auto* peaks = app.add_subcommand("peaks", "List energy-peak candidates");
    peaks->add_option("--manifest", pmanifest)->required();
    peaks->add_option("--out", pout);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
    }

    try {
        if (embed->parsed()) {
            const EmbedSummary s = cmd_embed(manifest, checkpoint, stride, out);
            for (const auto& e : s.errors) std::cerr << "error: " << e << "\n";
            std::cerr << s.records_written << " records embedded, " << s.errors.size() << " failed\n";
            return s.errors.empty() ? 0 : static_cast<int>(ExitCode::kData);
        }
        if (train->parsed()) {
            if (!config.empty()) topts.config = config;
            topts.manifest = tmanifest;
            topts.out = tout;
            if (!log.empty()) topts.log = log;
            if (!init_from.empty()) topts.init_from = init_from;
            if (!taxonomy.empty()) topts.taxonomy = taxonomy;
            if (phase_opt->count()) topts.phase = parse_phase(phase);
            if (steps_opt->count()) topts.max_steps = max_steps;
            if (tseed_opt->count()) topts.seed = tseed;
            const PhaseResult r = cmd_train(topts);
            if (!r.log.empty()) std::cerr << r.log.back().to_json().dump() << "\n";
            return 0;
        }
        if (eval->parsed()) {
            if (!echeckpoint.empty()) eopts.checkpoint = echeckpoint;
            for (const auto& p : embeddings) eopts.embeddings.emplace_back(p);
            for (const auto& p : classify) eopts.classify.emplace_back(p);
            for (const auto& p : retrieval) eopts.retrieval.emplace_back(p);
            for (const auto& p : transfer) eopts.transfer.emplace_back(p);
            eopts.tasks = parse_tasks(tasks);
            if (!eout.empty()) eopts.out = eout;
            std::vector<std::string> warnings;
            eopts.warnings = &warnings;
            const QualityReport report = cmd_eval(eopts);
            for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
            if (!report.missing.empty()) {
                std::cerr << "no overall score: missing task types";
                for (TaskType t : report.missing) std::cerr << " " << to_string(t);
                std::cerr << "\n";
            }
            std::cout << report.to_json().dump(2) << "\n";
            return 0;
        }
        if (peaks->parsed()) {
            const std::string text = cmd_peaks(pmanifest);
            if (pout.empty()) {
                std::cout << text;
            } else {
                std::ofstream(pout, std::ios::binary) << text;
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::kData);
    }
    return 0;
}
