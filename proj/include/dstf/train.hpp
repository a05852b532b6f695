#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "dstf/adam.hpp"
#include "dstf/model.hpp"
#include "dstf/samplers.hpp"

namespace dstf {

// Recording-level split: no recording contributes windows to two splits.
struct SplitSpec {
    double train_fraction = 0.6;
    double val_fraction = 0.2;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;  // fractions nonnegative, summing to 1
};

struct RecordingSplit {
    std::vector<std::string> train, val, test;
};

// Depends only on the id set and the seed, not on input order.
RecordingSplit split_recordings(std::vector<std::string> ids, const SplitSpec& spec);

struct TrainRunConfig {
    std::size_t max_epochs = 70;
    std::size_t patience = 10;  // epochs without val-loss improvement before stopping
    std::size_t batch_size = 256;
    std::uint64_t seed = 0;
    Adam::Config optimizer;

    void validate() const;
};

// Resolves sampler window references against materialized windows. Holds
// pointers into the caller's vector, which must outlive the index.
class WindowIndex {
public:
    explicit WindowIndex(const std::vector<Window>& windows);

    const Window* find(const WindowRef& ref) const;  // throws on a dangling ref
    std::size_t size() const { return map_.size(); }

private:
    std::map<std::pair<std::string, std::size_t>, const Window*> map_;
};

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct PretrainResult {
    Embedder embedder;  // parameters of the best-validation-loss epoch
    CheckpointMeta meta;
    std::vector<EpochLog> log;
};

// Trains a fresh embedder plus a task head on binary pseudo-labels with
// sigmoid cross-entropy and Adam. Stops at max_epochs, or once the validation
// loss has gone `patience` consecutive epochs without improving on its best.
// Throws on empty splits and on NaN loss. Per-epoch lines go to `progress`
// when given.
PretrainResult pretrain(PretextKind kind,
                        const std::vector<PretextExample>& train_examples,
                        const std::vector<PretextExample>& val_examples,
                        const WindowIndex& windows, const EmbedderConfig& embed_cfg,
                        const TrainRunConfig& run_cfg,
                        std::ostream* progress = nullptr);

// Eval-mode embeddings, (n_windows, embedding_dim); deterministic.
Tensor extract_features(Embedder& embedder, const std::vector<const Window*>& windows,
                        std::size_t batch_size = 256);

// Column blocks: 0..dim-1 from the time-domain embedder, the rest from the
// frequency-domain one.
Tensor extract_dual_features(Embedder& time_embedder, Embedder& fs_embedder,
                             const std::vector<const Window*>& windows,
                             std::size_t batch_size = 256);

// Windows that carry a stage annotation, in input order.
std::vector<const Window*> labeled_windows(const std::vector<Window>& windows);
std::vector<SleepStage> window_stages(const std::vector<const Window*>& windows);

void write_epoch_log_csv(const std::vector<EpochLog>& log, const std::string& path);

}  // namespace dstf
