#include "dstf/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>

#include "dstf/eval.hpp"
#include "dstf/ops.hpp"

namespace dstf {

void SplitSpec::validate() const {
    if (train_fraction < 0 || val_fraction < 0 || test_fraction < 0)
        throw std::invalid_argument("split fractions must be nonnegative");
    double sum = train_fraction + val_fraction + test_fraction;
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split fractions must sum to 1");
}

RecordingSplit split_recordings(std::vector<std::string> ids, const SplitSpec& spec) {
    spec.validate();
    // sort before shuffling so the split depends on the id set, not input order
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 1; i < ids.size(); ++i)
        if (ids[i] == ids[i - 1])
            throw std::invalid_argument("duplicate recording id '" + ids[i] + "'");

    Rng rng(derive_seed(spec.seed, "split"));
    for (std::size_t i = ids.size(); i > 1; --i)
        std::swap(ids[i - 1], ids[rng.uniform_int(i)]);

    const std::size_t n = ids.size();
    std::size_t n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * double(n)));
    std::size_t n_val = static_cast<std::size_t>(std::llround(spec.val_fraction * double(n)));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);

    RecordingSplit split;
    split.train.assign(ids.begin(), ids.begin() + std::ptrdiff_t(n_train));
    split.val.assign(ids.begin() + std::ptrdiff_t(n_train),
                     ids.begin() + std::ptrdiff_t(n_train + n_val));
    split.test.assign(ids.begin() + std::ptrdiff_t(n_train + n_val), ids.end());
    return split;
}

void TrainRunConfig::validate() const {
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be at least 1");
    if (patience < 1) throw std::invalid_argument("patience must be at least 1");
    if (patience > max_epochs)
        throw std::invalid_argument("patience must not exceed max_epochs");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
}

WindowIndex::WindowIndex(const std::vector<Window>& windows) {
    for (const Window& w : windows) {
        auto key = std::make_pair(w.recording_id, w.start_sample);
        if (!map_.emplace(key, &w).second)
            throw std::invalid_argument("duplicate window " + w.recording_id + ":" +
                                        std::to_string(w.start_sample));
    }
}

const Window* WindowIndex::find(const WindowRef& ref) const {
    auto it = map_.find(std::make_pair(ref.recording_id, ref.start_sample));
    if (it == map_.end())
        throw std::invalid_argument("example references unknown window " +
                                    ref.recording_id + ":" +
                                    std::to_string(ref.start_sample));
    return it->second;
}

namespace {

std::size_t refs_for(PretextKind kind) { return kind == PretextKind::rp ? 2 : 3; }

// one (B, 1, C, T) tensor per reference position, plus the label vector
struct Batch {
    std::vector<Tensor> inputs;
    Tensor labels;
};

Batch assemble_batch(const std::vector<PretextExample>& examples,
                     const std::vector<std::size_t>& order, std::size_t lo,
                     std::size_t hi, const WindowIndex& windows) {
    const std::size_t n_refs = examples[order[lo]].refs.size();
    Batch batch;
    batch.labels = Tensor({hi - lo});
    std::vector<const Window*> ptrs(hi - lo);
    for (std::size_t r = 0; r < n_refs; ++r) {
        for (std::size_t i = lo; i < hi; ++i)
            ptrs[i - lo] = windows.find(examples[order[i]].refs[r]);
        batch.inputs.push_back(window_batch(ptrs));
    }
    for (std::size_t i = lo; i < hi; ++i)
        batch.labels.v[i - lo] = double(examples[order[i]].label);
    return batch;
}

struct EmbedderSnapshot {
    std::vector<Tensor> params;
    BatchNormState bn1, bn2;
};

EmbedderSnapshot snapshot(const Embedder& emb) {
    EmbedderSnapshot s;
    for (const Var& p : emb.parameters()) s.params.push_back(p->val);
    s.bn1 = emb.bn1_state;
    s.bn2 = emb.bn2_state;
    return s;
}

void restore(Embedder& emb, const EmbedderSnapshot& s) {
    auto params = emb.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->val = s.params[i];
    emb.bn1_state = s.bn1;
    emb.bn2_state = s.bn2;
}

void check_examples(const char* split, PretextKind kind,
                    const std::vector<PretextExample>& examples) {
    if (examples.empty())
        throw std::invalid_argument(std::string("no pretext examples in the ") +
                                    split + " split");
    for (const PretextExample& ex : examples) {
        if (ex.kind != kind)
            throw std::invalid_argument(std::string("example of kind '") +
                                        pretext_name(ex.kind) + "' in a " +
                                        pretext_name(kind) + " run");
        if (ex.refs.size() != refs_for(kind))
            throw std::invalid_argument("example with wrong reference count");
        if (ex.label != 0 && ex.label != 1)
            throw std::invalid_argument("pretext labels must be 0 or 1");
    }
}

}  // namespace

PretrainResult pretrain(PretextKind kind,
                        const std::vector<PretextExample>& train_examples,
                        const std::vector<PretextExample>& val_examples,
                        const WindowIndex& windows, const EmbedderConfig& embed_cfg,
                        const TrainRunConfig& run_cfg, std::ostream* progress) {
    embed_cfg.validate();
    run_cfg.validate();
    check_examples("train", kind, train_examples);
    check_examples("validation", kind, val_examples);

    Embedder emb(embed_cfg, run_cfg.seed);
    std::optional<PairHead> pair_head;
    std::optional<TripleHead> triple_head;
    std::vector<Var> params = emb.parameters();
    if (kind == PretextKind::rp) {
        pair_head.emplace(embed_cfg.embedding_dim, embed_cfg.dropout_p, run_cfg.seed);
        for (const Var& p : pair_head->parameters()) params.push_back(p);
    } else {
        triple_head.emplace(embed_cfg.embedding_dim, embed_cfg.dropout_p, run_cfg.seed,
                            pretext_name(kind));
        for (const Var& p : triple_head->parameters()) params.push_back(p);
    }
    Adam opt(params, run_cfg.optimizer);

    Rng order_rng(derive_seed(run_cfg.seed, "pretrain/order"));
    Rng drop_rng(derive_seed(run_cfg.seed, "pretrain/dropout"));

    auto batch_logit = [&](const Batch& batch, bool train) {
        if (kind == PretextKind::rp) {
            Var ea = emb.forward(make_const(batch.inputs[0]), train, drop_rng);
            Var eb = emb.forward(make_const(batch.inputs[1]), train, drop_rng);
            return pair_head->logit(ea, eb, train, drop_rng);
        }
        Var et = emb.forward(make_const(batch.inputs[0]), train, drop_rng);
        Var etp = emb.forward(make_const(batch.inputs[1]), train, drop_rng);
        Var etpp = emb.forward(make_const(batch.inputs[2]), train, drop_rng);
        return triple_head->logit(et, etp, etpp, train, drop_rng);
    };

    std::vector<std::size_t> train_order(train_examples.size());
    for (std::size_t i = 0; i < train_order.size(); ++i) train_order[i] = i;
    std::vector<std::size_t> val_order(val_examples.size());
    for (std::size_t i = 0; i < val_order.size(); ++i) val_order[i] = i;

    double best_loss = std::numeric_limits<double>::infinity();
    double best_acc = 0.0;
    std::size_t best_epoch = 0;
    std::size_t since_improve = 0;
    EmbedderSnapshot best = snapshot(emb);
    std::vector<EpochLog> log;

    std::size_t epoch = 1;
    for (; epoch <= run_cfg.max_epochs; ++epoch) {
        for (std::size_t i = train_order.size(); i > 1; --i)
            std::swap(train_order[i - 1], train_order[order_rng.uniform_int(i)]);

        double train_loss_sum = 0.0;
        for (std::size_t lo = 0; lo < train_order.size(); lo += run_cfg.batch_size) {
            std::size_t hi = std::min(train_order.size(), lo + run_cfg.batch_size);
            Batch batch = assemble_batch(train_examples, train_order, lo, hi, windows);
            Var loss = bce_with_logits(batch_logit(batch, true), batch.labels);
            train_loss_sum += loss->val.v[0] * double(hi - lo);
            zero_grad(params);
            backward(loss);
            opt.step();
        }
        double train_loss = train_loss_sum / double(train_order.size());

        double val_loss_sum = 0.0;
        std::size_t val_correct = 0;
        for (std::size_t lo = 0; lo < val_order.size(); lo += run_cfg.batch_size) {
            std::size_t hi = std::min(val_order.size(), lo + run_cfg.batch_size);
            Batch batch = assemble_batch(val_examples, val_order, lo, hi, windows);
            Var z = batch_logit(batch, false);
            Var loss = bce_with_logits(z, batch.labels);
            val_loss_sum += loss->val.v[0] * double(hi - lo);
            for (std::size_t i = 0; i < z->val.numel(); ++i)
                if ((z->val.v[i] > 0.0) == (batch.labels.v[i] > 0.5)) ++val_correct;
        }
        double val_loss = val_loss_sum / double(val_order.size());
        double val_acc = double(val_correct) / double(val_order.size());

        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw std::runtime_error("pretext training diverged: loss is not finite at epoch " +
                                     std::to_string(epoch));

        log.push_back({epoch, train_loss, val_loss, val_acc});
        if (progress) {
            char line[160];
            std::snprintf(line, sizeof line,
                          "[%s] epoch %3zu/%zu  train_loss %.6f  val_loss %.6f  val_acc %.4f",
                          pretext_name(kind), epoch, run_cfg.max_epochs, train_loss,
                          val_loss, val_acc);
            *progress << line << '\n';
        }

        if (val_loss < best_loss) {
            best_loss = val_loss;
            best_acc = val_acc;
            best_epoch = epoch;
            best = snapshot(emb);
            since_improve = 0;
        } else if (++since_improve >= run_cfg.patience) {
            ++epoch;  // count this epoch as run before breaking
            break;
        }
    }

    std::size_t epochs_run = epoch - 1;
    if (progress)
        *progress << "[" << pretext_name(kind) << "] stopped after " << epochs_run
                  << " epochs; best epoch " << best_epoch << " (val_loss "
                  << best_loss << ")\n";

    restore(emb, best);
    CheckpointMeta meta;
    meta.pretext = pretext_name(kind);
    meta.seed = run_cfg.seed;
    meta.epochs_run = epochs_run;
    meta.final_val_loss = best_loss;
    meta.final_val_acc = best_acc;
    return PretrainResult{std::move(emb), meta, std::move(log)};
}

Tensor extract_features(Embedder& embedder, const std::vector<const Window*>& windows,
                        std::size_t batch_size) {
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    const std::size_t dim = embedder.config().embedding_dim;
    Tensor out({windows.size(), dim});
    Rng rng(0);  // eval mode draws nothing
    for (std::size_t lo = 0; lo < windows.size(); lo += batch_size) {
        std::size_t hi = std::min(windows.size(), lo + batch_size);
        std::vector<const Window*> slice(windows.begin() + std::ptrdiff_t(lo),
                                         windows.begin() + std::ptrdiff_t(hi));
        Var e = embedder.forward(make_const(window_batch(slice)), false, rng);
        std::copy(e->val.v.begin(), e->val.v.end(), out.v.begin() + std::ptrdiff_t(lo * dim));
    }
    return out;
}

Tensor extract_dual_features(Embedder& time_embedder, Embedder& fs_embedder,
                             const std::vector<const Window*>& windows,
                             std::size_t batch_size) {
    Tensor a = extract_features(time_embedder, windows, batch_size);
    Tensor b = extract_features(fs_embedder, windows, batch_size);
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

std::vector<const Window*> labeled_windows(const std::vector<Window>& windows) {
    std::vector<const Window*> out;
    for (const Window& w : windows)
        if (w.stage.has_value()) out.push_back(&w);
    return out;
}

std::vector<SleepStage> window_stages(const std::vector<const Window*>& windows) {
    std::vector<SleepStage> out;
    out.reserve(windows.size());
    for (const Window* w : windows) {
        if (!w->stage.has_value())
            throw std::invalid_argument("window " + w->recording_id + ":" +
                                        std::to_string(w->start_sample) +
                                        " has no stage annotation");
        out.push_back(*w->stage);
    }
    return out;
}

void write_epoch_log_csv(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "epoch,train_loss,val_loss,val_acc\n";
    for (const EpochLog& row : log)
        f << row.epoch << ',' << g17(row.train_loss) << ',' << g17(row.val_loss)
          << ',' << g17(row.val_acc) << '\n';
    if (!f) throw std::runtime_error("write to " + path + " failed");
}

}  // namespace dstf
