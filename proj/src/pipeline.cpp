#include "dstf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dstf/model.hpp"
#include "dstf/prep.hpp"
#include "dstf/recording.hpp"

namespace dstf {

namespace fs = std::filesystem;

namespace {

const char* kRoles[] = {"train", "val", "test"};

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

void require_artifact(const std::string& path, const std::string& what,
                      const std::string& hint) {
    if (!fs::exists(path))
        throw MissingArtifact(what + " not found (" + path + "); run `" + hint +
                              "` first");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

void finish_out(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
}

// manifest order is the canonical recording order for every later stage
std::vector<std::string> checked_ids(std::vector<Recording>& recs) {
    std::set<std::string> names;
    std::vector<std::string> ids;
    for (Recording& rec : recs) {
        rec.id = sanitize_id(rec.id);
        if (rec.id.empty())
            throw std::runtime_error("recording has an empty id");
        if (!names.insert(rec.id).second)
            throw std::runtime_error("recording ids collide after sanitizing: " +
                                     rec.id);
        ids.push_back(rec.id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::map<std::string, std::string> role_by_id(const RecordingSplit& split) {
    std::map<std::string, std::string> roles;
    for (const std::string& id : split.train) roles[id] = "train";
    for (const std::string& id : split.val) roles[id] = "val";
    for (const std::string& id : split.test) roles[id] = "test";
    return roles;
}

std::string role_of(const std::map<std::string, std::string>& roles,
                    const std::string& id) {
    auto it = roles.find(id);
    if (it == roles.end())
        throw std::runtime_error("split does not cover recording " + id +
                                 "; re-run `prep`");
    return it->second;
}

std::vector<Window> materialize_windows(const Recording& rec, double window_s) {
    std::vector<Window> windows = extract_windows(rec, window_s);
    for (Window& w : windows) w = normalize_window(w);
    return windows;
}

SamplerConfig sampler_for(const PipelineConfig& cfg, PretextKind kind) {
    SamplerConfig scfg = kind == PretextKind::rp   ? cfg.sampler_rp
                         : kind == PretextKind::ts ? cfg.sampler_ts
                                                   : cfg.sampler_fs;
    scfg.seed = cfg.seed;
    return scfg;
}

Tensor concat_columns(const Tensor& a, const Tensor& b) {
    if (a.dim(0) != b.dim(0))
        throw std::runtime_error("feature tables have different row counts");
    const std::size_t n = a.dim(0), da = a.dim(1), db = b.dim(1);
    Tensor out({n, da + db});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(a.v.begin() + std::ptrdiff_t(i * da), da,
                    out.v.begin() + std::ptrdiff_t(i * (da + db)));
        std::copy_n(b.v.begin() + std::ptrdiff_t(i * db), db,
                    out.v.begin() + std::ptrdiff_t(i * (da + db) + da));
    }
    return out;
}

// train/val/test feature tables for one downstream model, column blocks in
// combo order (time stream first)
struct ComboFeatures {
    FeatureTable split[3];
};

ComboFeatures load_combo_features(const PipelineConfig& cfg,
                                  const std::string& combo) {
    PipelinePaths paths(cfg.out_dir);
    std::vector<PretextKind> tasks = combo_tasks(combo);
    ComboFeatures out;
    for (std::size_t r = 0; r < 3; ++r) {
        bool first = true;
        for (PretextKind kind : tasks) {
            std::string path = paths.features_file(kind, kRoles[r]);
            require_artifact(path,
                             std::string("features for ") + pretext_name(kind),
                             std::string("pretrain ") + pretext_name(kind) +
                                 "` then `embed");
            FeatureTable t = read_feature_table(path);
            if (first) {
                out.split[r] = std::move(t);
                first = false;
                continue;
            }
            FeatureTable& acc = out.split[r];
            if (t.recording_ids != acc.recording_ids ||
                t.start_samples != acc.start_samples || t.stages != acc.stages)
                throw std::runtime_error(
                    "feature tables for " + combo +
                    " cover different windows; re-run `embed`");
            acc.features = concat_columns(acc.features, t.features);
        }
    }
    return out;
}

std::string budget_label(std::size_t budget) {
    return budget == 0 ? "all" : std::to_string(budget);
}

}  // namespace

std::vector<PretextKind> combo_tasks(const std::string& combo) {
    if (combo == "rp") return {PretextKind::rp};
    if (combo == "ts") return {PretextKind::ts};
    if (combo == "fs") return {PretextKind::fs};
    if (combo == "rp+fs") return {PretextKind::rp, PretextKind::fs};
    if (combo == "ts+fs") return {PretextKind::ts, PretextKind::fs};
    throw std::invalid_argument("unknown model \"" + combo +
                                "\" (expected rp, ts, fs, rp+fs, or ts+fs)");
}

PipelinePaths::PipelinePaths(const std::string& out_dir) : out(out_dir) {
    while (out.size() > 1 && out.back() == '/') out.pop_back();
    raw_dir = out + "/raw";
    prep_dir = out + "/prep";
    examples_dir = out + "/examples";
    checkpoints_dir = out + "/checkpoints";
    features_dir = out + "/features";
    logs_dir = out + "/logs";
    reports_dir = out + "/reports";
    raw_manifest = raw_dir + "/manifest.txt";
    prep_manifest = prep_dir + "/manifest.txt";
    split_csv = out + "/split.csv";
}

std::string PipelinePaths::raw_file(const std::string& id) const {
    return raw_dir + "/" + sanitize_id(id) + ".raw";
}
std::string PipelinePaths::prep_file(const std::string& id) const {
    return prep_dir + "/" + sanitize_id(id) + ".raw";
}
std::string PipelinePaths::examples_file(PretextKind kind,
                                         const std::string& role) const {
    return examples_dir + "/" + pretext_name(kind) + "_" + role + ".csv";
}
std::string PipelinePaths::checkpoint_file(PretextKind kind) const {
    return checkpoints_dir + "/" + pretext_name(kind) + ".ckpt";
}
std::string PipelinePaths::epoch_log_file(PretextKind kind) const {
    return logs_dir + "/" + pretext_name(kind) + "_epochs.csv";
}
std::string PipelinePaths::features_file(PretextKind kind,
                                         const std::string& role) const {
    return features_dir + "/" + pretext_name(kind) + "_" + role + ".csv";
}
std::string PipelinePaths::metrics_csv(const std::string& combo) const {
    return reports_dir + "/" + combo + "_metrics.csv";
}
std::string PipelinePaths::confusion_csv(const std::string& combo) const {
    return reports_dir + "/" + combo + "_confusion.csv";
}
std::string PipelinePaths::metrics_txt(const std::string& combo) const {
    return reports_dir + "/" + combo + "_metrics.txt";
}
std::string PipelinePaths::sweep_csv(const std::string& task) const {
    return reports_dir + "/sweep_" + task + ".csv";
}
std::string PipelinePaths::sweep_summary_csv(const std::string& task) const {
    return reports_dir + "/sweep_" + task + "_summary.csv";
}
std::string PipelinePaths::projection_csv(const std::string& task) const {
    return reports_dir + "/projection_" + task + ".csv";
}
std::string PipelinePaths::summary_csv() const {
    return reports_dir + "/summary.csv";
}

std::string sanitize_id(const std::string& id) {
    std::string out = id;
    for (char& c : out) {
        bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                  (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
        if (!ok) c = '_';
    }
    return out;
}

void write_manifest(const std::vector<std::string>& ids,
                    const std::string& path) {
    std::ofstream out = open_out(path);
    for (const std::string& id : ids) out << id << '\n';
    finish_out(out, path);
}

std::vector<std::string> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ids.push_back(line);
    if (ids.empty()) throw std::runtime_error("manifest is empty: " + path);
    return ids;
}

void write_split_csv(const RecordingSplit& split, const std::string& path) {
    std::vector<std::pair<std::string, std::string>> rows;
    for (const std::string& id : split.train) rows.emplace_back(id, "train");
    for (const std::string& id : split.val) rows.emplace_back(id, "val");
    for (const std::string& id : split.test) rows.emplace_back(id, "test");
    std::sort(rows.begin(), rows.end());
    std::ofstream out = open_out(path);
    out << "recording_id,role\n";
    for (const auto& [id, role] : rows) out << id << ',' << role << '\n';
    finish_out(out, path);
}

RecordingSplit read_split_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open split file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "recording_id,role")
        throw std::runtime_error("corrupt split file (bad header): " + path);
    RecordingSplit split;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.rfind(',');
        if (comma == std::string::npos)
            throw std::runtime_error("corrupt split file (bad row): " + path);
        std::string id = line.substr(0, comma);
        std::string role = line.substr(comma + 1);
        if (role == "train")
            split.train.push_back(id);
        else if (role == "val")
            split.val.push_back(id);
        else if (role == "test")
            split.test.push_back(id);
        else
            throw std::runtime_error("corrupt split file (unknown role " + role +
                                     "): " + path);
    }
    return split;
}

void write_feature_table(const FeatureTable& table, const std::string& path) {
    const std::size_t n = table.features.dim(0), d = table.features.dim(1);
    if (table.recording_ids.size() != n || table.start_samples.size() != n ||
        table.stages.size() != n)
        throw std::invalid_argument("feature table columns disagree on length");
    std::ofstream out = open_out(path);
    out << "recording_id,start_sample,stage";
    for (std::size_t j = 0; j < d; ++j) out << ",e" << j;
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << table.recording_ids[i] << ',' << table.start_samples[i] << ','
            << static_cast<int>(table.stages[i]);
        for (std::size_t j = 0; j < d; ++j)
            out << ',' << g17(table.features.v[i * d + j]);
        out << '\n';
    }
    finish_out(out, path);
}

FeatureTable read_feature_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature table: " + path);
    std::string line;
    if (!std::getline(in, line) ||
        line.rfind("recording_id,start_sample,stage", 0) != 0)
        throw std::runtime_error("corrupt feature table (bad header): " + path);
    std::size_t d = 0;
    for (char c : line)
        if (c == ',') ++d;
    d -= 2;  // identity columns

    FeatureTable table;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string field;
        if (!std::getline(row, field, ','))
            throw std::runtime_error("corrupt feature table (bad row): " + path);
        table.recording_ids.push_back(field);
        if (!std::getline(row, field, ','))
            throw std::runtime_error("corrupt feature table (bad row): " + path);
        table.start_samples.push_back(std::strtoull(field.c_str(), nullptr, 10));
        if (!std::getline(row, field, ','))
            throw std::runtime_error("corrupt feature table (bad row): " + path);
        table.stages.push_back(stage_from_code(std::atoi(field.c_str())));
        std::size_t got = 0;
        while (std::getline(row, field, ',')) {
            values.push_back(std::strtod(field.c_str(), nullptr));
            ++got;
        }
        if (got != d)
            throw std::runtime_error("corrupt feature table (row width): " + path);
    }
    const std::size_t n = table.recording_ids.size();
    table.features = Tensor({n, d});
    table.features.v = std::move(values);
    return table;
}

void run_synth(const PipelineConfig& cfg, std::ostream& log) {
    PipelinePaths paths(cfg.out_dir);
    SynthSpec spec = cfg.synth;
    spec.seed = cfg.seed;
    std::vector<Recording> recs = generate_synthetic(spec);
    std::vector<std::string> ids = checked_ids(recs);
    ensure_dir(paths.raw_dir);
    for (const Recording& rec : recs) write_raw(rec, paths.raw_file(rec.id));
    write_manifest(ids, paths.raw_manifest);
    log << "synth: " << recs.size() << " recordings of " << spec.duration_s
        << " s at " << spec.sample_rate << " Hz -> " << paths.raw_dir << '\n';
}

void run_ingest(const PipelineConfig& cfg, std::ostream& log) {
    if (cfg.ingest_paths.empty())
        throw std::runtime_error(
            "ingest: no EDF files configured (set ingest.paths)");
    PipelinePaths paths(cfg.out_dir);
    std::vector<Recording> recs;
    recs.reserve(cfg.ingest_paths.size());
    for (const std::string& p : cfg.ingest_paths) recs.push_back(read_edf(p));
    std::vector<std::string> ids = checked_ids(recs);
    ensure_dir(paths.raw_dir);
    for (const Recording& rec : recs) write_raw(rec, paths.raw_file(rec.id));
    write_manifest(ids, paths.raw_manifest);
    log << "ingest: " << recs.size() << " EDF recordings -> " << paths.raw_dir
        << '\n';
}

void run_prep(const PipelineConfig& cfg, std::ostream& log) {
    PipelinePaths paths(cfg.out_dir);
    require_artifact(paths.raw_manifest, "raw recordings", "synth` or `ingest");
    std::vector<std::string> ids = read_manifest(paths.raw_manifest);
    ensure_dir(paths.prep_dir);
    std::size_t total_windows = 0;
    for (const std::string& id : ids) {
        require_artifact(paths.raw_file(id), "raw recording " + id,
                         "synth` or `ingest");
        Recording rec = read_raw(paths.raw_file(id));
        Recording prepped = preprocess(rec, cfg.prep);
        total_windows += extract_windows(prepped, cfg.prep.window_s).size();
        write_raw(prepped, paths.prep_file(id));
    }
    write_manifest(ids, paths.prep_manifest);

    SplitSpec spec = cfg.split;
    spec.seed = cfg.seed;
    RecordingSplit split = split_recordings(ids, spec);
    write_split_csv(split, paths.split_csv);
    log << "prep: " << ids.size() << " recordings -> " << total_windows
        << " windows; split train/val/test = " << split.train.size() << '/'
        << split.val.size() << '/' << split.test.size() << '\n';
}

void run_sample(const PipelineConfig& cfg, PretextKind kind, std::ostream& log) {
    PipelinePaths paths(cfg.out_dir);
    require_artifact(paths.prep_manifest, "preprocessed recordings", "prep");
    require_artifact(paths.split_csv, "recording split", "prep");
    std::vector<std::string> ids = read_manifest(paths.prep_manifest);
    auto roles = role_by_id(read_split_csv(paths.split_csv));
    SamplerConfig scfg = sampler_for(cfg, kind);

    std::vector<PretextExample> train_examples, val_examples;
    std::size_t n_sampled_recordings = 0;
    for (const std::string& id : ids) {
        std::string role = role_of(roles, id);
        if (role == "test") continue;  // test windows never feed the pretext
        require_artifact(paths.prep_file(id), "preprocessed recording " + id,
                         "prep");
        Recording rec = read_raw(paths.prep_file(id));
        std::vector<Window> windows = materialize_windows(rec, cfg.prep.window_s);
        std::vector<PretextExample> examples =
            kind == PretextKind::rp ? sample_rp(windows, rec.sample_rate, scfg)
            : kind == PretextKind::ts
                ? sample_ts(windows, rec.sample_rate, scfg)
                : sample_fs(windows, rec.sample_rate, scfg, cfg.welch);
        auto& sink = role == "train" ? train_examples : val_examples;
        sink.insert(sink.end(), examples.begin(), examples.end());
        ++n_sampled_recordings;
    }
    ensure_dir(paths.examples_dir);
    write_examples(train_examples, paths.examples_file(kind, "train"));
    write_examples(val_examples, paths.examples_file(kind, "val"));
    log << "sample " << pretext_name(kind) << ": " << train_examples.size()
        << " train / " << val_examples.size() << " val examples from "
        << n_sampled_recordings << " recordings\n";
}

void run_pretrain(const PipelineConfig& cfg, PretextKind kind,
                  std::ostream& log) {
    PipelinePaths paths(cfg.out_dir);
    require_artifact(paths.prep_manifest, "preprocessed recordings", "prep");
    require_artifact(paths.split_csv, "recording split", "prep");
    const std::string hint = std::string("sample ") + pretext_name(kind);
    require_artifact(paths.examples_file(kind, "train"),
                     std::string("pretext examples for ") + pretext_name(kind),
                     hint);
    require_artifact(paths.examples_file(kind, "val"),
                     std::string("pretext examples for ") + pretext_name(kind),
                     hint);

    std::vector<PretextExample> train_examples =
        read_examples(paths.examples_file(kind, "train"));
    std::vector<PretextExample> val_examples =
        read_examples(paths.examples_file(kind, "val"));

    std::vector<std::string> ids = read_manifest(paths.prep_manifest);
    auto roles = role_by_id(read_split_csv(paths.split_csv));
    std::vector<Window> windows;
    for (const std::string& id : ids) {
        std::string role = role_of(roles, id);
        if (role == "test") continue;
        require_artifact(paths.prep_file(id), "preprocessed recording " + id,
                         "prep");
        Recording rec = read_raw(paths.prep_file(id));
        std::vector<Window> w = materialize_windows(rec, cfg.prep.window_s);
        windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                       std::make_move_iterator(w.end()));
    }
    WindowIndex index(windows);

    TrainRunConfig run_cfg = cfg.train;
    run_cfg.seed = cfg.seed;
    PretrainResult result = pretrain(kind, train_examples, val_examples, index,
                                     cfg.derived_embedder(), run_cfg, &log);

    ensure_dir(paths.checkpoints_dir);
    ensure_dir(paths.logs_dir);
    save_checkpoint(result.embedder, result.meta, paths.checkpoint_file(kind));
    write_epoch_log_csv(result.log, paths.epoch_log_file(kind));
    log << "pretrain " << pretext_name(kind) << ": best val_loss "
        << result.meta.final_val_loss << " val_acc " << result.meta.final_val_acc
        << " after " << result.meta.epochs_run << " epochs -> "
        << paths.checkpoint_file(kind) << '\n';
}

void run_embed(const PipelineConfig& cfg, std::ostream& log) {
    PipelinePaths paths(cfg.out_dir);
    require_artifact(paths.prep_manifest, "preprocessed recordings", "prep");
    require_artifact(paths.split_csv, "recording split", "prep");

    std::vector<PretextKind> tasks;
    for (PretextKind kind : {PretextKind::rp, PretextKind::ts, PretextKind::fs})
        if (fs::exists(paths.checkpoint_file(kind))) tasks.push_back(kind);
    if (tasks.empty())
        throw MissingArtifact("no pretext checkpoints under " +
                              paths.checkpoints_dir +
                              "; run `pretrain rp` (or ts, fs) first");

    std::vector<std::string> ids = read_manifest(paths.prep_manifest);
    auto roles = role_by_id(read_split_csv(paths.split_csv));

    // per role: the labeled windows plus their identity columns
    std::vector<std::vector<Window>> storage(ids.size());
    struct RoleData {
        std::vector<const Window*> windows;
        std::vector<std::string> ids;
        std::vector<std::size_t> starts;
        std::vector<SleepStage> stages;
    };
    RoleData per_role[3];
    for (std::size_t r = 0; r < ids.size(); ++r) {
        std::string role = role_of(roles, ids[r]);
        std::size_t slot = role == "train" ? 0 : role == "val" ? 1 : 2;
        require_artifact(paths.prep_file(ids[r]),
                         "preprocessed recording " + ids[r], "prep");
        Recording rec = read_raw(paths.prep_file(ids[r]));
        storage[r] = materialize_windows(rec, cfg.prep.window_s);
        for (const Window* w : labeled_windows(storage[r])) {
            per_role[slot].windows.push_back(w);
            per_role[slot].ids.push_back(w->recording_id);
            per_role[slot].starts.push_back(w->start_sample);
            per_role[slot].stages.push_back(*w->stage);
        }
    }

    ensure_dir(paths.features_dir);
    for (PretextKind kind : tasks) {
        CheckpointMeta meta;
        Embedder embedder = load_checkpoint(paths.checkpoint_file(kind), &meta);
        if (!(embedder.config() == cfg.derived_embedder()))
            throw std::runtime_error(
                std::string("checkpoint for ") + pretext_name(kind) +
                " does not match the configured embedder; re-run `pretrain " +
                pretext_name(kind) + "`");
        for (std::size_t r = 0; r < 3; ++r) {
            FeatureTable table;
            table.recording_ids = per_role[r].ids;
            table.start_samples = per_role[r].starts;
            table.stages = per_role[r].stages;
            table.features = extract_features(embedder, per_role[r].windows,
                                              cfg.train.batch_size);
            write_feature_table(table, paths.features_file(kind, kRoles[r]));
        }
        log << "embed " << pretext_name(kind) << ": train/val/test = "
            << per_role[0].windows.size() << '/' << per_role[1].windows.size()
            << '/' << per_role[2].windows.size() << " windows, dim "
            << embedder.config().embedding_dim << '\n';
    }
}

MetricsReport run_downstream(const PipelineConfig& cfg, const std::string& combo,
                             std::ostream& log) {
    PipelinePaths paths(cfg.out_dir);
    ComboFeatures data = load_combo_features(cfg, combo);
    LogRegConfig lc = cfg.logreg_config();
    if (!cfg.downstream.lambda_grid.empty()) {
        lc.l2_lambda = select_l2_lambda(
            data.split[0].features, data.split[0].stages, data.split[1].features,
            data.split[1].stages, cfg.downstream.lambda_grid, lc);
        log << "downstream " << combo << ": selected l2_lambda " << lc.l2_lambda
            << " on the validation split\n";
    }
    LogReg clf = train_logreg(data.split[0].features, data.split[0].stages, lc);
    MetricsReport report =
        evaluate(clf, data.split[2].features, data.split[2].stages);

    ensure_dir(paths.reports_dir);
    write_metrics_csv(report, paths.metrics_csv(combo));
    write_confusion_csv(report, paths.confusion_csv(combo));
    std::ofstream txt = open_out(paths.metrics_txt(combo));
    write_metrics_text(report, txt);
    finish_out(txt, paths.metrics_txt(combo));

    log << "downstream " << combo << ": balanced accuracy " << report.balanced_accuracy
        << " on " << report.n_examples << " test windows ("
        << (clf.iters_run >= lc.max_iters ? "iteration cap" : "gradient tolerance")
        << " after " << clf.iters_run << " iterations)\n";
    return report;
}

std::vector<SweepPoint> run_sweep(const PipelineConfig& cfg, std::size_t jobs,
                                  std::ostream& log) {
    PipelinePaths paths(cfg.out_dir);
    const std::string& task = cfg.sweep.task;
    ComboFeatures data = load_combo_features(cfg, task);
    std::vector<SweepPoint> points = label_budget_sweep(
        data.split[0].features, data.split[0].stages, data.split[2].features,
        data.split[2].stages, cfg.sweep.budgets, cfg.sweep.iterations, cfg.seed,
        cfg.logreg_config(), &log, jobs);

    ensure_dir(paths.reports_dir);
    write_sweep_csv(points, paths.sweep_csv(task));
    std::ofstream out = open_out(paths.sweep_summary_csv(task));
    out << "budget,mean_balanced_accuracy,sd_balanced_accuracy,clipped\n";
    for (const SweepPoint& pt : points)
        out << budget_label(pt.budget) << ',' << g17(pt.mean) << ','
            << g17(pt.sd) << ',' << (pt.clipped ? 1 : 0) << '\n';
    finish_out(out, paths.sweep_summary_csv(task));

    for (const SweepPoint& pt : points)
        log << "sweep " << task << ": budget " << budget_label(pt.budget)
            << " mean " << pt.mean << " sd " << pt.sd
            << (pt.clipped ? " (clipped)" : "") << '\n';
    return points;
}

void run_report(const PipelineConfig& cfg, std::ostream& log) {
    PipelinePaths paths(cfg.out_dir);
    const char* combos[] = {"rp", "ts", "fs", "rp+fs", "ts+fs"};
    const char* wanted[] = {"balanced_accuracy", "weighted_precision",
                            "weighted_recall", "n_examples"};

    std::vector<std::pair<std::string, std::map<std::string, std::string>>> found;
    for (const char* combo : combos) {
        std::ifstream in(paths.metrics_csv(combo));
        if (!in) continue;
        std::map<std::string, std::string> row;
        std::string line;
        while (std::getline(in, line)) {
            auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            row[line.substr(0, comma)] = line.substr(comma + 1);
        }
        for (const char* key : wanted)
            if (!row.count(key))
                throw std::runtime_error("corrupt metrics file: " +
                                         paths.metrics_csv(combo));
        found.emplace_back(combo, std::move(row));
    }
    if (found.empty())
        throw MissingArtifact("no downstream metrics under " + paths.reports_dir +
                              "; run `downstream rp` (or ts, fs, rp+fs, ts+fs) first");

    ensure_dir(paths.reports_dir);
    std::ofstream out = open_out(paths.summary_csv());
    out << "model,balanced_accuracy,weighted_precision,weighted_recall,n_test\n";
    for (auto& [combo, row] : found) {
        out << combo;
        for (const char* key : wanted) out << ',' << row[key];
        out << '\n';
    }
    finish_out(out, paths.summary_csv());

    char buf[160];
    log << "model   balanced_acc  weighted_prec  weighted_rec  n_test\n";
    for (auto& [combo, row] : found) {
        std::snprintf(buf, sizeof(buf), "%-7s %12.4f  %13.4f  %12.4f  %6s\n",
                      combo.c_str(), std::strtod(row["balanced_accuracy"].c_str(), nullptr),
                      std::strtod(row["weighted_precision"].c_str(), nullptr),
                      std::strtod(row["weighted_recall"].c_str(), nullptr),
                      row["n_examples"].c_str());
        log << buf;
    }
}

void run_project2d(const PipelineConfig& cfg, std::ostream& log) {
    PipelinePaths paths(cfg.out_dir);
    const std::string& task = cfg.project2d.task;
    ComboFeatures data = load_combo_features(cfg, task);

    Pca2 pca = fit_pca2(data.split[0].features);

    std::size_t total = 0;
    for (int r = 0; r < 3; ++r) total += data.split[r].features.dim(0);
    const std::size_t d = data.split[0].features.dim(1);
    Tensor all({total, d});
    std::vector<SleepStage> stages;
    stages.reserve(total);
    std::size_t row = 0;
    for (int r = 0; r < 3; ++r) {
        const Tensor& f = data.split[r].features;
        std::copy(f.v.begin(), f.v.end(),
                  all.v.begin() + std::ptrdiff_t(row * d));
        row += f.dim(0);
        stages.insert(stages.end(), data.split[r].stages.begin(),
                      data.split[r].stages.end());
    }

    Tensor projected = pca2_project(pca, all);
    ensure_dir(paths.reports_dir);
    write_projection_csv(projected, stages, paths.projection_csv(task));
    log << "project2d " << task << ": " << total
        << " windows; component variances " << pca.eigenvalue1 << ", "
        << pca.eigenvalue2 << " -> " << paths.projection_csv(task) << '\n';
}

}  // namespace dstf
