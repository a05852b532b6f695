#include "dstf/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dstf {

namespace {

using nlohmann::json;

std::string join_violations(const std::vector<std::string>& v) {
    std::string out = "invalid config (" + std::to_string(v.size()) +
                      (v.size() == 1 ? " violation): " : " violations): ");
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += "; ";
        out += v[i];
    }
    return out;
}

// Pulls typed values out of one JSON object, remembering which keys were
// consumed so finish() can flag typos. Absent keys keep the default.
class Section {
public:
    Section(const json& obj, std::string prefix, std::vector<std::string>& errs)
        : obj_(obj), prefix_(std::move(prefix)), errs_(errs) {}

    void number(const char* key, double& out) {
        const json* v = take(key);
        if (!v) return;
        if (!v->is_number())
            fail(key, "must be a number");
        else
            out = v->get<double>();
    }

    void count(const char* key, std::size_t& out) {
        const json* v = take(key);
        if (!v) return;
        if (v->is_number_unsigned())
            out = v->get<std::size_t>();
        else if (v->is_number_integer() && v->get<long long>() >= 0)
            out = static_cast<std::size_t>(v->get<long long>());
        else
            fail(key, "must be a nonnegative integer");
    }

    void seed(const char* key, std::uint64_t& out) {
        const json* v = take(key);
        if (!v) return;
        if (v->is_number_unsigned())
            out = v->get<std::uint64_t>();
        else if (v->is_number_integer() && v->get<long long>() >= 0)
            out = static_cast<std::uint64_t>(v->get<long long>());
        else
            fail(key, "must be a nonnegative integer");
    }

    void boolean(const char* key, bool& out) {
        const json* v = take(key);
        if (!v) return;
        if (!v->is_boolean())
            fail(key, "must be a boolean");
        else
            out = v->get<bool>();
    }

    void text(const char* key, std::string& out) {
        const json* v = take(key);
        if (!v) return;
        if (!v->is_string())
            fail(key, "must be a string");
        else
            out = v->get<std::string>();
    }

    void texts(const char* key, std::vector<std::string>& out) {
        const json* v = take(key);
        if (!v) return;
        if (!v->is_array()) return fail(key, "must be an array of strings");
        std::vector<std::string> got;
        for (const auto& item : *v) {
            if (!item.is_string()) return fail(key, "must be an array of strings");
            got.push_back(item.get<std::string>());
        }
        out = std::move(got);
    }

    void numbers(const char* key, std::vector<double>& out) {
        const json* v = take(key);
        if (!v) return;
        if (!v->is_array()) return fail(key, "must be an array of numbers");
        std::vector<double> got;
        for (const auto& item : *v) {
            if (!item.is_number()) return fail(key, "must be an array of numbers");
            got.push_back(item.get<double>());
        }
        out = std::move(got);
    }

    // array of nonnegative integers, with "all" accepted as 0
    void budgets(const char* key, std::vector<std::size_t>& out) {
        const json* v = take(key);
        if (!v) return;
        const char* want = "must be an array of positive integers or \"all\"";
        if (!v->is_array()) return fail(key, want);
        std::vector<std::size_t> got;
        for (const auto& item : *v) {
            if (item.is_string() && item.get<std::string>() == "all")
                got.push_back(0);
            else if (item.is_number_unsigned() && item.get<std::size_t>() > 0)
                got.push_back(item.get<std::size_t>());
            else
                return fail(key, want);
        }
        out = std::move(got);
    }

    const json* take(const char* key) {
        known_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void fail(const char* key, const std::string& why) {
        errs_.push_back(prefix_ + key + ": " + why);
    }

    void finish() {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!known_.count(it.key()))
                errs_.push_back(prefix_ + it.key() + ": unknown key");
    }

private:
    const json& obj_;
    std::string prefix_;
    std::vector<std::string>& errs_;
    std::set<std::string> known_;
};

// Runs `fn` on the named sub-object if present; complains when it is not an
// object. Returns whether the section existed.
template <typename Fn>
void section(const json& root, const char* name, std::vector<std::string>& errs,
             Fn&& fn) {
    auto it = root.find(name);
    if (it == root.end()) return;
    if (!it->is_object()) {
        errs.push_back(std::string(name) + ": must be an object");
        return;
    }
    Section s(*it, std::string(name) + ".", errs);
    fn(s);
    s.finish();
}

int stage_code_from_name(const std::string& name) {
    for (std::size_t c = 0; c < kNumStages; ++c)
        if (name == stage_name(stage_from_code(static_cast<int>(c))))
            return static_cast<int>(c);
    return -1;
}

void parse_stage_profile(const json& arr, SynthSpec& synth,
                         std::vector<std::string>& errs) {
    if (!arr.is_array() || arr.size() != kNumStages) {
        errs.push_back("synth.stage_profile: must be an array with one entry per "
                       "stage (W, N1, N2, N3, R)");
        return;
    }
    std::set<int> seen;
    for (const auto& entry : arr) {
        if (!entry.is_object()) {
            errs.push_back("synth.stage_profile: entries must be objects");
            return;
        }
        Section s(entry, "synth.stage_profile.", errs);
        std::string stage;
        s.text("stage", stage);
        int code = stage_code_from_name(stage);
        if (code < 0) {
            errs.push_back("synth.stage_profile.stage: unknown stage \"" + stage +
                           "\"");
            return;
        }
        if (!seen.insert(code).second) {
            errs.push_back("synth.stage_profile: stage \"" + stage +
                           "\" listed twice");
            return;
        }
        StageRecipe& recipe = synth.stage_profile[static_cast<std::size_t>(code)];
        recipe.bands.clear();
        s.number("noise_amplitude", recipe.noise_amplitude);
        const json* bands = s.take("bands");
        if (!bands || !bands->is_array()) {
            errs.push_back("synth.stage_profile." + stage +
                           ".bands: must be an array");
            return;
        }
        for (const auto& b : *bands) {
            if (!b.is_object()) {
                errs.push_back("synth.stage_profile." + stage +
                               ".bands: entries must be objects");
                return;
            }
            Section bs(b, "synth.stage_profile." + stage + ".bands.", errs);
            BandComponent band;
            bs.number("center_hz", band.center_hz);
            bs.number("bandwidth_hz", band.bandwidth_hz);
            bs.number("amplitude", band.amplitude);
            bs.finish();
            recipe.bands.push_back(band);
        }
        s.finish();
    }
}

void parse_sampler(Section& s, SamplerConfig& out) {
    s.number("tau_pos_s", out.tau_pos_s);
    s.number("tau_neg_s", out.tau_neg_s);
    s.count("examples_per_recording", out.examples_per_recording);
    s.number("fs_tie_epsilon", out.fs_tie_epsilon);
    s.number("pos_fraction", out.pos_fraction);
}

bool valid_combo(const std::string& name) {
    return name == "rp" || name == "ts" || name == "fs" || name == "rp+fs" ||
           name == "ts+fs";
}

void check(std::vector<std::string>& errs, bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
}

// struct validators throw; fold their message into the violation list
template <typename Fn>
void check_throws(std::vector<std::string>& errs, const std::string& prefix,
                  Fn&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        errs.push_back(prefix + e.what());
    }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> v)
    : std::runtime_error(join_violations(v)), violations(std::move(v)) {}

EmbedderConfig PipelineConfig::derived_embedder() const {
    EmbedderConfig e = embedder;
    e.n_channels = prep.keep_channels.size();
    e.n_times = static_cast<std::size_t>(
        std::llround(prep.window_s * prep.target_rate));
    return e;
}

LogRegConfig PipelineConfig::logreg_config() const {
    LogRegConfig lc;
    lc.l2_lambda = downstream.l2_lambda;
    lc.max_iters = downstream.max_iters;
    lc.grad_tol = downstream.grad_tol;
    lc.seed = seed;
    lc.optimizer.lr = downstream.lr;
    return lc;
}

PipelineConfig default_pipeline_config() {
    PipelineConfig cfg;
    cfg.synth.stage_profile = default_stage_profile();
    return cfg;
}

std::vector<std::string> validate_pipeline_config(const PipelineConfig& cfg) {
    std::vector<std::string> errs;

    check(errs, !cfg.out_dir.empty(), "out_dir: must be set");

    const SynthSpec& sy = cfg.synth;
    check(errs, sy.n_recordings >= 1, "synth.n_recordings: must be >= 1");
    check(errs, sy.duration_s > 0.0, "synth.duration_s: must be positive");
    check(errs, sy.sample_rate > 0.0, "synth.sample_rate: must be positive");
    check(errs, sy.n_channels >= 1, "synth.n_channels: must be >= 1");
    check(errs, sy.epoch_s > 0.0 && sy.epoch_s <= sy.duration_s,
          "synth.epoch_s: must be positive and at most duration_s");
    check(errs, sy.markov_self_p >= 0.0 && sy.markov_self_p <= 1.0,
          "synth.self_transition_p: must lie in [0, 1]");
    for (std::size_t c = 0; c < kNumStages; ++c) {
        const StageRecipe& r = sy.stage_profile[c];
        std::string where = "synth.stage_profile." +
                            std::string(stage_name(stage_from_code(static_cast<int>(c))));
        check(errs, r.noise_amplitude >= 0.0, where + ": noise_amplitude must be >= 0");
        for (const BandComponent& b : r.bands) {
            check(errs, b.amplitude >= 0.0, where + ": band amplitudes must be >= 0");
            check(errs, b.bandwidth_hz >= 0.0, where + ": band bandwidths must be >= 0");
            check(errs,
                  b.center_hz - b.bandwidth_hz / 2.0 >= 0.0 &&
                      b.center_hz + b.bandwidth_hz / 2.0 < sy.sample_rate / 2.0,
                  where + ": band " + std::to_string(b.center_hz) +
                      " Hz must lie inside (0, nyquist)");
        }
    }

    for (const std::string& p : cfg.ingest_paths)
        check(errs, std::filesystem::exists(p), "ingest.paths: file not found: " + p);

    check_throws(errs, "prep: ", [&] { cfg.prep.validate(); });
    check(errs, cfg.prep.cutoff_hz <= cfg.prep.target_rate / 2.0,
          "prep.cutoff_hz: must be at most target_rate/2, or decimation aliases");
    if (cfg.ingest_paths.empty()) {
        // synthetic source: decimation ratio must be integral
        double ratio = sy.sample_rate / cfg.prep.target_rate;
        check(errs, std::abs(ratio - std::round(ratio)) < 1e-9 && ratio >= 1.0,
              "prep.target_rate: synth.sample_rate must be an integer multiple of it");
        check(errs, cfg.prep.window_s <= sy.duration_s,
              "prep.window_s: must be at most synth.duration_s");
    }
    double n_times = cfg.prep.window_s * cfg.prep.target_rate;
    check(errs, std::abs(n_times - std::round(n_times)) < 1e-9 && n_times >= 1.0,
          "prep.window_s: window_s * target_rate must be a positive integer");

    check(errs, cfg.welch.segment_len >= 2, "welch.segment_len: must be >= 2");
    check(errs, cfg.welch.overlap >= 0.0 && cfg.welch.overlap < 1.0,
          "welch.overlap: must lie in [0, 1)");
    check(errs, static_cast<double>(cfg.welch.segment_len) <= n_times,
          "welch.segment_len: must fit inside one analysis window");

    check_throws(errs, "split: ", [&] { cfg.split.validate(); });

    struct Named {
        const char* name;
        const SamplerConfig* cfg;
        bool uses_taus;
    };
    for (const Named& s : {Named{"rp", &cfg.sampler_rp, true},
                           Named{"ts", &cfg.sampler_ts, true},
                           Named{"fs", &cfg.sampler_fs, false}}) {
        std::string prefix = "samplers." + std::string(s.name) + ": ";
        check_throws(errs, prefix, [&] { s.cfg->validate(); });
        if (!s.uses_taus) continue;
        check(errs, s.cfg->tau_neg_s < sy.duration_s,
              prefix + "tau_neg_s must be below the recording duration, or no "
                       "negative pair exists");
        double min_gap = cfg.prep.window_s * (s.name[0] == 't' ? 2.0 : 1.0);
        check(errs, s.cfg->tau_pos_s >= min_gap,
              prefix + "tau_pos_s must cover at least " +
                  (s.name[0] == 't' ? "two window spacings" : "one window spacing") +
                  ", or no positive example exists");
    }

    check_throws(errs, "embedder: ", [&] { cfg.derived_embedder().validate(); });

    check_throws(errs, "train: ", [&] { cfg.train.validate(); });
    check(errs, cfg.train.optimizer.lr > 0.0, "train.lr: must be positive");
    check(errs,
          cfg.train.optimizer.beta1 >= 0.0 && cfg.train.optimizer.beta1 < 1.0 &&
              cfg.train.optimizer.beta2 >= 0.0 && cfg.train.optimizer.beta2 < 1.0,
          "train.beta1/beta2: must lie in [0, 1)");
    check(errs, cfg.train.optimizer.eps > 0.0, "train.eps: must be positive");

    check_throws(errs, "downstream: ", [&] { cfg.logreg_config().validate(); });
    for (double l : cfg.downstream.lambda_grid)
        check(errs, l >= 0.0, "downstream.lambda_grid: entries must be >= 0");

    check(errs, valid_combo(cfg.sweep.task),
          "sweep.task: must be one of rp, ts, fs, rp+fs, ts+fs");
    check(errs, !cfg.sweep.budgets.empty(), "sweep.budgets: must be non-empty");
    check(errs, cfg.sweep.iterations >= 1, "sweep.iterations: must be >= 1");

    check(errs, valid_combo(cfg.project2d.task),
          "project2d.task: must be one of rp, ts, fs, rp+fs, ts+fs");

    return errs;
}

PipelineConfig parse_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"cannot open config file: " + path});

    json root;
    try {
        root = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError({std::string("JSON parse error: ") + e.what()});
    }
    if (!root.is_object()) throw ConfigError({"top level: must be an object"});

    PipelineConfig cfg = default_pipeline_config();
    std::vector<std::string> errs;

    Section top(root, "", errs);
    top.text("out_dir", cfg.out_dir);
    top.seed("seed", cfg.seed);
    for (const char* name : {"synth", "ingest", "prep", "welch", "split",
                             "samplers", "embedder", "train", "downstream",
                             "sweep", "project2d"})
        top.take(name);
    top.finish();

    section(root, "synth", errs, [&](Section& s) {
        s.count("n_recordings", cfg.synth.n_recordings);
        s.number("duration_s", cfg.synth.duration_s);
        s.number("sample_rate", cfg.synth.sample_rate);
        s.count("n_channels", cfg.synth.n_channels);
        s.number("epoch_s", cfg.synth.epoch_s);
        s.number("self_transition_p", cfg.synth.markov_self_p);
        if (const json* prof = s.take("stage_profile"))
            parse_stage_profile(*prof, cfg.synth, errs);
    });

    section(root, "ingest", errs,
            [&](Section& s) { s.texts("paths", cfg.ingest_paths); });

    section(root, "prep", errs, [&](Section& s) {
        s.number("cutoff_hz", cfg.prep.cutoff_hz);
        s.count("fir_order", cfg.prep.fir_order);
        s.texts("keep_channels", cfg.prep.keep_channels);
        s.number("target_rate", cfg.prep.target_rate);
        s.number("window_s", cfg.prep.window_s);
    });

    section(root, "welch", errs, [&](Section& s) {
        s.count("segment_len", cfg.welch.segment_len);
        s.number("overlap", cfg.welch.overlap);
        s.boolean("detrend", cfg.welch.detrend);
    });

    section(root, "split", errs, [&](Section& s) {
        s.number("train_fraction", cfg.split.train_fraction);
        s.number("val_fraction", cfg.split.val_fraction);
        s.number("test_fraction", cfg.split.test_fraction);
    });

    if (auto it = root.find("samplers"); it != root.end()) {
        if (!it->is_object()) {
            errs.push_back("samplers: must be an object");
        } else {
            Section outer(*it, "samplers.", errs);
            const std::pair<const char*, SamplerConfig*> slots[] = {
                {"rp", &cfg.sampler_rp},
                {"ts", &cfg.sampler_ts},
                {"fs", &cfg.sampler_fs}};
            for (const auto& [name, target] : slots) {
                if (const json* sub = outer.take(name)) {
                    if (!sub->is_object()) {
                        errs.push_back("samplers." + std::string(name) +
                                       ": must be an object");
                        continue;
                    }
                    Section s(*sub, "samplers." + std::string(name) + ".", errs);
                    parse_sampler(s, *target);
                    s.finish();
                }
            }
            outer.finish();
        }
    }

    section(root, "embedder", errs, [&](Section& s) {
        s.count("n_conv_maps", cfg.embedder.n_conv_maps);
        s.count("temporal_kernel", cfg.embedder.temporal_kernel);
        s.count("pool_size", cfg.embedder.pool_size);
        s.number("dropout_p", cfg.embedder.dropout_p);
        s.count("embedding_dim", cfg.embedder.embedding_dim);
        s.boolean("use_batch_norm", cfg.embedder.use_batch_norm);
    });

    section(root, "train", errs, [&](Section& s) {
        s.count("max_epochs", cfg.train.max_epochs);
        s.count("patience", cfg.train.patience);
        s.count("batch_size", cfg.train.batch_size);
        s.number("lr", cfg.train.optimizer.lr);
        s.number("beta1", cfg.train.optimizer.beta1);
        s.number("beta2", cfg.train.optimizer.beta2);
        s.number("eps", cfg.train.optimizer.eps);
    });

    section(root, "downstream", errs, [&](Section& s) {
        s.number("l2_lambda", cfg.downstream.l2_lambda);
        s.numbers("lambda_grid", cfg.downstream.lambda_grid);
        s.count("max_iters", cfg.downstream.max_iters);
        s.number("grad_tol", cfg.downstream.grad_tol);
        s.number("lr", cfg.downstream.lr);
    });

    section(root, "sweep", errs, [&](Section& s) {
        s.text("task", cfg.sweep.task);
        s.budgets("budgets", cfg.sweep.budgets);
        s.count("iterations", cfg.sweep.iterations);
    });

    section(root, "project2d", errs,
            [&](Section& s) { s.text("task", cfg.project2d.task); });

    if (!errs.empty()) throw ConfigError(std::move(errs));
    return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    PipelineConfig cfg = parse_pipeline_config(path);
    std::vector<std::string> errs = validate_pipeline_config(cfg);
    if (!errs.empty()) throw ConfigError(std::move(errs));
    return cfg;
}

}  // namespace dstf
