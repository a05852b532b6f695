#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dstf/adam.hpp"
#include "dstf/eval.hpp"
#include "dstf/model.hpp"
#include "dstf/prep.hpp"
#include "dstf/recording.hpp"
#include "dstf/samplers.hpp"
#include "dstf/spectral.hpp"
#include "dstf/train.hpp"

namespace dstf {

// Thrown by load_pipeline_config; carries every violation found, not just the
// first, so a bad config can be fixed in one pass.
struct ConfigError : std::runtime_error {
    std::vector<std::string> violations;

    explicit ConfigError(std::vector<std::string> v);
};

struct DownstreamConfig {
    double l2_lambda = 1e-3;
    std::vector<double> lambda_grid;  // non-empty: select on validation split
    std::size_t max_iters = 5000;
    double grad_tol = 1e-6;
    double lr = 0.05;
};

struct SweepSection {
    std::string task = "rp";                 // rp|ts|fs|rp+fs|ts+fs
    std::vector<std::size_t> budgets = {1, 5, 10, 50, 0};  // 0 = all
    std::size_t iterations = 5;
};

struct Project2dSection {
    std::string task = "rp";
};

struct PipelineConfig {
    std::string out_dir;
    std::uint64_t seed = 0;

    SynthSpec synth;                  // seed filled from the master seed
    std::vector<std::string> ingest_paths;
    PrepConfig prep;
    WelchConfig welch;
    SplitSpec split;                  // seed filled from the master seed
    SamplerConfig sampler_rp;
    SamplerConfig sampler_ts;
    SamplerConfig sampler_fs;
    EmbedderConfig embedder;          // n_channels / n_times derived from prep
    TrainRunConfig train;             // seed filled from the master seed
    DownstreamConfig downstream;
    SweepSection sweep;
    Project2dSection project2d;

    // embedder config with input geometry filled in from the prep section
    EmbedderConfig derived_embedder() const;
    LogRegConfig logreg_config() const;
};

PipelineConfig default_pipeline_config();

// Reads the JSON file and applies defaults for absent keys. Throws
// ConfigError on malformed JSON, wrong types, and unknown keys — but performs
// no semantic checks, so command-line overrides can land before validation.
PipelineConfig parse_pipeline_config(const std::string& path);

// Checks every field and cross-field constraint; returns all violations.
std::vector<std::string> validate_pipeline_config(const PipelineConfig& cfg);

// parse + validate in one step; throws ConfigError listing every problem.
PipelineConfig load_pipeline_config(const std::string& path);

}  // namespace dstf
