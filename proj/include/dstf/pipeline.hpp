#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "dstf/config.hpp"
#include "dstf/eval.hpp"
#include "dstf/samplers.hpp"
#include "dstf/train.hpp"

namespace dstf {

// A required input produced by an earlier subcommand is absent. The message
// names the subcommand to run first.
struct MissingArtifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Downstream model name -> pretext tasks, time-stream first ("rp+fs" -> rp
// then fs, so concatenated features keep the time block in front). Throws on
// anything outside {rp, ts, fs, rp+fs, ts+fs}.
std::vector<PretextKind> combo_tasks(const std::string& combo);

// Everything a run writes lives under one output directory.
struct PipelinePaths {
    explicit PipelinePaths(const std::string& out_dir);

    std::string out;
    std::string raw_dir, prep_dir, examples_dir, checkpoints_dir, features_dir,
        logs_dir, reports_dir;
    std::string raw_manifest, prep_manifest, split_csv;

    std::string raw_file(const std::string& id) const;
    std::string prep_file(const std::string& id) const;
    std::string examples_file(PretextKind kind, const std::string& role) const;
    std::string checkpoint_file(PretextKind kind) const;
    std::string epoch_log_file(PretextKind kind) const;
    std::string features_file(PretextKind kind, const std::string& role) const;
    std::string metrics_csv(const std::string& combo) const;
    std::string confusion_csv(const std::string& combo) const;
    std::string metrics_txt(const std::string& combo) const;
    std::string sweep_csv(const std::string& task) const;
    std::string sweep_summary_csv(const std::string& task) const;
    std::string projection_csv(const std::string& task) const;
    std::string summary_csv() const;
};

// Recording ids become file names; anything outside [A-Za-z0-9._-] is mapped
// to '_'. Distinct ids that collide after sanitizing are rejected upstream.
std::string sanitize_id(const std::string& id);

void write_manifest(const std::vector<std::string>& ids, const std::string& path);
std::vector<std::string> read_manifest(const std::string& path);

void write_split_csv(const RecordingSplit& split, const std::string& path);
RecordingSplit read_split_csv(const std::string& path);

// Embedded windows with their identity and stage label, as written by the
// embed step (one file per pretext task and split role).
struct FeatureTable {
    std::vector<std::string> recording_ids;
    std::vector<std::size_t> start_samples;
    std::vector<SleepStage> stages;
    Tensor features;  // (n, dim)
};

void write_feature_table(const FeatureTable& table, const std::string& path);
FeatureTable read_feature_table(const std::string& path);

// Subcommand bodies. Each reads its inputs from under cfg.out_dir, writes its
// outputs there, and throws MissingArtifact when a prerequisite has not been
// produced yet. Progress lines go to `log`.
void run_synth(const PipelineConfig& cfg, std::ostream& log);
void run_ingest(const PipelineConfig& cfg, std::ostream& log);
void run_prep(const PipelineConfig& cfg, std::ostream& log);
void run_sample(const PipelineConfig& cfg, PretextKind kind, std::ostream& log);
void run_pretrain(const PipelineConfig& cfg, PretextKind kind, std::ostream& log);
void run_embed(const PipelineConfig& cfg, std::ostream& log);
MetricsReport run_downstream(const PipelineConfig& cfg, const std::string& combo,
                             std::ostream& log);
std::vector<SweepPoint> run_sweep(const PipelineConfig& cfg, std::size_t jobs,
                                  std::ostream& log);
void run_report(const PipelineConfig& cfg, std::ostream& log);
void run_project2d(const PipelineConfig& cfg, std::ostream& log);

}  // namespace dstf
