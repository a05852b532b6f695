#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dstf/ops.hpp"
#include "dstf/prep.hpp"
#include "dstf/rng.hpp"
#include "dstf/tensor.hpp"

namespace dstf {

struct EmbedderConfig {
    std::size_t n_channels = 2;
    std::size_t n_times = 3000;
    std::size_t n_conv_maps = 16;
    std::size_t temporal_kernel = 50;
    std::size_t pool_size = 13;
    double dropout_p = 0.5;
    std::size_t embedding_dim = 100;
    bool use_batch_norm = true;

    void validate() const;        // throws if the length arithmetic collapses
    std::size_t time_after_conv1() const;
    std::size_t time_after_pool1() const;
    std::size_t time_after_conv2() const;
    std::size_t time_after_pool2() const;
    std::size_t flat_dim() const;  // n_conv_maps * n_channels * time_after_pool2

    bool operator==(const EmbedderConfig&) const = default;
};

// Window embedder: spatial channel mixing, then two temporal
// conv/norm/relu/pool stages, then flatten -> dropout -> linear projection.
class Embedder {
public:
    Embedder(const EmbedderConfig& cfg, std::uint64_t seed);

    // x: (B, 1, n_channels, n_times) -> (B, embedding_dim).
    // Train mode enables dropout (driven by rng) and batch statistics.
    Var forward(const Var& x, bool train, Rng& rng);

    std::vector<Var> parameters() const;  // trainable, fixed order
    const EmbedderConfig& config() const { return cfg_; }

    // named parameters and batch-norm running statistics, in file order
    Var spatial_w, spatial_b;
    Var conv1_w, conv1_b, bn1_gamma, bn1_beta;
    Var conv2_w, conv2_b, bn2_gamma, bn2_beta;
    Var fc_w, fc_b;
    BatchNormState bn1_state, bn2_state;

private:
    EmbedderConfig cfg_;
};

// logit = w . dropout(|e_a - e_b|) + bias; symmetric in (a, b) at eval
class PairHead {
public:
    PairHead(std::size_t embedding_dim, double dropout_p, std::uint64_t seed);
    Var logit(const Var& e_a, const Var& e_b, bool train, Rng& rng);  // (B,)
    std::vector<Var> parameters() const { return {w, b}; }

    Var w, b;

private:
    std::size_t dim_;
    double dropout_p_;
};

// logit = w . dropout(concat(|e_t - e_t'|, |e_t' - e_t''|)) + bias.
// The two triple-based tasks each own an instance; parameters never shared.
class TripleHead {
public:
    TripleHead(std::size_t embedding_dim, double dropout_p, std::uint64_t seed,
               const std::string& tag);
    Var logit(const Var& e_t, const Var& e_tp, const Var& e_tpp, bool train,
              Rng& rng);  // (B,)
    std::vector<Var> parameters() const { return {w, b}; }

    Var w, b;

private:
    std::size_t dim_;
    double dropout_p_;
};

// (B, 1, C, T) input tensor from equally-shaped windows.
Tensor window_batch(const std::vector<const Window*>& windows);

struct CheckpointMeta {
    std::string pretext = "none";  // rp | ts | fs | none
    std::uint64_t seed = 0;
    std::uint64_t epochs_run = 0;
    double final_val_loss = 0.0;
    double final_val_acc = 0.0;

    bool operator==(const CheckpointMeta&) const = default;
};

void save_checkpoint(const Embedder& embedder, const CheckpointMeta& meta,
                     const std::string& path);
Embedder load_checkpoint(const std::string& path, CheckpointMeta* meta_out = nullptr);

}  // namespace dstf
