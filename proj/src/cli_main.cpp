#include <malloc.h>

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dstf/config.hpp"
#include "dstf/pipeline.hpp"

namespace {

// stderr contract: exactly one line, "error: <class>: <detail>"
std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

int fail(const char* error_class, const std::string& detail) {
    std::cerr << "error: " << error_class << ": " << one_line(detail) << '\n';
    return error_class == std::string("bad-arguments")     ? 2
           : error_class == std::string("config-invalid")  ? 3
           : error_class == std::string("missing-artifact") ? 4
                                                            : 5;
}

}  // namespace

int main(int argc, char** argv) {
    // training loops churn short-lived conv buffers; without these the
    // allocator hands every batch back to the kernel and page faults dominate
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, -1);

    CLI::App app{
        "Self-supervised sleep staging: pretext sampling, dual-stream "
        "embedding, and frozen-feature evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "pipeline config (JSON)")
        ->required();
    std::uint64_t seed_override = 0;
    CLI::Option* seed_opt = app.add_option(
        "--seed-override", seed_override, "replace the config's master seed");
    std::string out_dir_override;
    CLI::Option* out_opt = app.add_option(
        "--out-dir", out_dir_override, "replace the config's output directory");
    std::size_t jobs = 1;
    app.add_option("--jobs", jobs, "worker threads for the label-budget sweep")
        ->check(CLI::Range(std::size_t(1), std::size_t(256)));

    CLI::App* synth = app.add_subcommand("synth", "generate synthetic recordings");
    CLI::App* ingest = app.add_subcommand("ingest", "import EDF recordings");
    CLI::App* prep = app.add_subcommand(
        "prep", "filter, select channels, resample, window, and split");

    const std::vector<std::string> kTasks = {"rp", "ts", "fs"};
    const std::vector<std::string> kModels = {"rp", "ts", "fs", "rp+fs", "ts+fs"};

    std::string sample_task, pretrain_task, downstream_model;
    CLI::App* sample =
        app.add_subcommand("sample", "draw pretext examples (train/val only)");
    sample->add_option("task", sample_task, "rp | ts | fs")
        ->required()
        ->check(CLI::IsMember(kTasks));
    CLI::App* pretrain =
        app.add_subcommand("pretrain", "train an embedder on a pretext task");
    pretrain->add_option("task", pretrain_task, "rp | ts | fs")
        ->required()
        ->check(CLI::IsMember(kTasks));
    CLI::App* embed = app.add_subcommand(
        "embed", "extract frozen features for every pretrained task");
    CLI::App* downstream = app.add_subcommand(
        "downstream", "fit and score the frozen-feature stage classifier");
    downstream->add_option("model", downstream_model, "rp | ts | fs | rp+fs | ts+fs")
        ->required()
        ->check(CLI::IsMember(kModels));
    CLI::App* sweep =
        app.add_subcommand("sweep", "balanced accuracy vs labels per stage");
    CLI::App* report =
        app.add_subcommand("report", "aggregate downstream metrics");
    CLI::App* project2d =
        app.add_subcommand("project2d", "2-component PCA of the embeddings");

    for (CLI::App* sub : {synth, ingest, prep, sample, pretrain, embed,
                          downstream, sweep, report, project2d})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("bad-arguments", e.what());
    }

    dstf::PipelineConfig cfg;
    try {
        cfg = dstf::parse_pipeline_config(config_path);
        if (seed_opt->count()) cfg.seed = seed_override;
        if (out_opt->count()) cfg.out_dir = out_dir_override;
        std::vector<std::string> violations = dstf::validate_pipeline_config(cfg);
        if (!violations.empty()) throw dstf::ConfigError(std::move(violations));
    } catch (const dstf::ConfigError& e) {
        return fail("config-invalid", e.what());
    }

    try {
        std::ostream& log = std::cout;
        if (synth->parsed()) dstf::run_synth(cfg, log);
        if (ingest->parsed()) dstf::run_ingest(cfg, log);
        if (prep->parsed()) dstf::run_prep(cfg, log);
        if (sample->parsed())
            dstf::run_sample(cfg, dstf::pretext_from_name(sample_task), log);
        if (pretrain->parsed())
            dstf::run_pretrain(cfg, dstf::pretext_from_name(pretrain_task), log);
        if (embed->parsed()) dstf::run_embed(cfg, log);
        if (downstream->parsed()) dstf::run_downstream(cfg, downstream_model, log);
        if (sweep->parsed()) dstf::run_sweep(cfg, jobs, log);
        if (report->parsed()) dstf::run_report(cfg, log);
        if (project2d->parsed()) dstf::run_project2d(cfg, log);
    } catch (const dstf::MissingArtifact& e) {
        return fail("missing-artifact", e.what());
    } catch (const std::exception& e) {
        return fail("pipeline", e.what());
    }
    return 0;
}
