#pragma once

#include "dstf/rng.hpp"
#include "dstf/tensor.hpp"

namespace dstf {

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var relu(const Var& x);
Var abs_diff(const Var& a, const Var& b);  // |a - b|, subgradient 0 at 0

// x: (B, N) row-major, w: (M, N), b: (M) -> (B, M).
Var linear(const Var& x, const Var& w, const Var& b);

// Leading-dim concat of (B, N1) and (B, N2) -> (B, N1 + N2).
Var concat_cols(const Var& a, const Var& b);

// (B, F, S, T) -> (B, F*S*T).
Var flatten(const Var& x);

// (B, 1) -> (B,).
Var squeeze_col(const Var& x);

// Spatial filter across input channels: x (B, 1, C, T), w (M, C), b (M)
// -> (B, M, 1, T); each output map is a per-timestep linear combination of
// the C input channels.
Var conv_spatial(const Var& x, const Var& w, const Var& b);

// Swap the feature and spatial axes: (B, F, S, T) -> (B, S, F, T).
Var permute_fs(const Var& x);

// Valid temporal convolution along the last axis, stride 1:
// x (B, F, S, T), w (M, F, K), b (M) -> (B, M, S, T-K+1).
Var conv_time(const Var& x, const Var& w, const Var& b);

// Non-overlapping max pool along time; trailing remainder dropped.
// Ties resolve to the first maximum.
Var max_pool_time(const Var& x, std::size_t pool);

// Batch norm over the feature-map axis of (B, F, S, T): statistics across
// (B, S, T) per map. Train mode uses biased batch variance and updates the
// running stats in place; eval mode uses the running stats.
struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;
    double eps = 1e-5;
};
Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               BatchNormState& state, bool train);

// Train mode: Bernoulli(1-p) mask scaled by 1/(1-p); eval mode: identity.
Var dropout(const Var& x, double p, bool train, Rng& rng);

// Mean over batch of -[y log sigmoid(z) + (1-y) log(1-sigmoid(z))] in the
// stable form max(z,0) - z*y + log(1 + exp(-|z|)). z: (B,), y: (B,) in {0,1}.
Var bce_with_logits(const Var& z, const Tensor& y);

// Mean softmax cross-entropy: logits (B, C), labels in [0, C). Stable logsumexp.
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels);

// 0.5 * sum of squares (L2 penalty term, scaled by caller's lambda).
Var half_sum_squares(const Var& w);

// Σ x_i · w_i as a scalar; w is a fixed weighting, not a graph node.
Var reduce_dot(const Var& x, const Tensor& w);

}  // namespace dstf
