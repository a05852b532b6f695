#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dstf/model.hpp"

namespace dstf {

namespace {

// uniform +-1/sqrt(fan_in), the conventional conv/linear init
Var init_param(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    double bound = 1.0 / std::sqrt(double(fan_in));
    for (double& v : t.v) v = rng.uniform(-bound, bound);
    return make_var(std::move(t), true);
}

Var const_param(std::vector<std::size_t> shape, double fill) {
    return make_var(Tensor(std::move(shape), fill), true);
}

}  // namespace

void EmbedderConfig::validate() const {
    if (n_channels < 1 || n_times < 1 || n_conv_maps < 1 || embedding_dim < 1)
        throw std::invalid_argument("embedder config: counts must be >= 1");
    if (temporal_kernel < 1 || pool_size < 1)
        throw std::invalid_argument("embedder config: kernel and pool must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
        throw std::invalid_argument("embedder config: dropout_p must be in [0, 1)");
    if (n_times < temporal_kernel)
        throw std::invalid_argument("embedder config: window shorter than the kernel");
    if (time_after_pool1() < 1)
        throw std::invalid_argument("embedder config: first pool eats the signal");
    if (time_after_pool1() < temporal_kernel)
        throw std::invalid_argument(
            "embedder config: second conv kernel longer than its input");
    if (time_after_pool2() < 1)
        throw std::invalid_argument("embedder config: second pool eats the signal");
}

std::size_t EmbedderConfig::time_after_conv1() const {
    return n_times - temporal_kernel + 1;
}
std::size_t EmbedderConfig::time_after_pool1() const {
    return time_after_conv1() / pool_size;
}
std::size_t EmbedderConfig::time_after_conv2() const {
    return time_after_pool1() - temporal_kernel + 1;
}
std::size_t EmbedderConfig::time_after_pool2() const {
    return time_after_conv2() / pool_size;
}
std::size_t EmbedderConfig::flat_dim() const {
    return n_conv_maps * n_channels * time_after_pool2();
}

Embedder::Embedder(const EmbedderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    Rng rng(derive_seed(seed, "embedder/init"));
    std::size_t c = cfg.n_channels, m = cfg.n_conv_maps, k = cfg.temporal_kernel;

    spatial_w = init_param({c, c}, c, rng);
    spatial_b = init_param({c}, c, rng);
    conv1_w = init_param({m, 1, k}, k, rng);
    conv1_b = init_param({m}, k, rng);
    conv2_w = init_param({m, m, k}, m * k, rng);
    conv2_b = init_param({m}, m * k, rng);
    fc_w = init_param({cfg.embedding_dim, cfg.flat_dim()}, cfg.flat_dim(), rng);
    fc_b = init_param({cfg.embedding_dim}, cfg.flat_dim(), rng);

    bn1_gamma = const_param({m}, 1.0);
    bn1_beta = const_param({m}, 0.0);
    bn2_gamma = const_param({m}, 1.0);
    bn2_beta = const_param({m}, 0.0);
    bn1_state.running_mean = Tensor({m}, 0.0);
    bn1_state.running_var = Tensor({m}, 1.0);
    bn2_state.running_mean = Tensor({m}, 0.0);
    bn2_state.running_var = Tensor({m}, 1.0);
}

Var Embedder::forward(const Var& x, bool train, Rng& rng) {
    if (x->val.ndim() != 4 || x->val.dim(1) != 1 || x->val.dim(2) != cfg_.n_channels ||
        x->val.dim(3) != cfg_.n_times)
        throw std::invalid_argument(
            "embedder: input shape " + x->val.shape_str() + " does not match (B, 1, " +
            std::to_string(cfg_.n_channels) + ", " + std::to_string(cfg_.n_times) + ")");

    Var h = conv_spatial(x, spatial_w, spatial_b);  // (B, C, 1, T)
    h = permute_fs(h);                              // (B, 1, C, T)
    h = conv_time(h, conv1_w, conv1_b);             // (B, M, C, .)
    if (cfg_.use_batch_norm) h = batch_norm(h, bn1_gamma, bn1_beta, bn1_state, train);
    h = relu(h);
    h = max_pool_time(h, cfg_.pool_size);
    h = conv_time(h, conv2_w, conv2_b);
    if (cfg_.use_batch_norm) h = batch_norm(h, bn2_gamma, bn2_beta, bn2_state, train);
    h = relu(h);
    h = max_pool_time(h, cfg_.pool_size);
    h = flatten(h);                                 // (B, flat_dim)
    h = dropout(h, cfg_.dropout_p, train, rng);
    return linear(h, fc_w, fc_b);                   // (B, embedding_dim)
}

std::vector<Var> Embedder::parameters() const {
    std::vector<Var> p = {spatial_w, spatial_b, conv1_w, conv1_b,
                          conv2_w,   conv2_b,   fc_w,    fc_b};
    if (cfg_.use_batch_norm) {
        p.push_back(bn1_gamma);
        p.push_back(bn1_beta);
        p.push_back(bn2_gamma);
        p.push_back(bn2_beta);
    }
    return p;
}

PairHead::PairHead(std::size_t embedding_dim, double dropout_p, std::uint64_t seed)
    : dim_(embedding_dim), dropout_p_(dropout_p) {
    if (embedding_dim < 1)
        throw std::invalid_argument("pair head: embedding_dim must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
        throw std::invalid_argument("pair head: dropout_p must be in [0, 1)");
    Rng rng(derive_seed(seed, "head/rp/init"));
    w = init_param({1, embedding_dim}, embedding_dim, rng);
    b = init_param({1}, embedding_dim, rng);
}

Var PairHead::logit(const Var& e_a, const Var& e_b, bool train, Rng& rng) {
    if (e_a->val.ndim() != 2 || e_a->val.dim(1) != dim_ ||
        !same_shape(e_a->val, e_b->val))
        throw std::invalid_argument("pair head: embeddings must both be (B, " +
                                    std::to_string(dim_) + ")");
    Var d = abs_diff(e_a, e_b);
    d = dropout(d, dropout_p_, train, rng);
    return squeeze_col(linear(d, w, b));
}

TripleHead::TripleHead(std::size_t embedding_dim, double dropout_p, std::uint64_t seed,
                       const std::string& tag)
    : dim_(embedding_dim), dropout_p_(dropout_p) {
    if (embedding_dim < 1)
        throw std::invalid_argument("triple head: embedding_dim must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
        throw std::invalid_argument("triple head: dropout_p must be in [0, 1)");
    Rng rng(derive_seed(seed, "head/" + tag + "/init"));
    w = init_param({1, 2 * embedding_dim}, 2 * embedding_dim, rng);
    b = init_param({1}, 2 * embedding_dim, rng);
}

Var TripleHead::logit(const Var& e_t, const Var& e_tp, const Var& e_tpp, bool train,
                      Rng& rng) {
    if (e_t->val.ndim() != 2 || e_t->val.dim(1) != dim_ ||
        !same_shape(e_t->val, e_tp->val) || !same_shape(e_t->val, e_tpp->val))
        throw std::invalid_argument("triple head: embeddings must all be (B, " +
                                    std::to_string(dim_) + ")");
    // first block anchors the pair (t, t'), second compares (t', t'')
    Var d = concat_cols(abs_diff(e_t, e_tp), abs_diff(e_tp, e_tpp));
    d = dropout(d, dropout_p_, train, rng);
    return squeeze_col(linear(d, w, b));
}

Tensor window_batch(const std::vector<const Window*>& windows) {
    if (windows.empty()) throw std::invalid_argument("window_batch: empty batch");
    std::size_t c = windows[0]->n_channels();
    std::size_t t = windows[0]->n_times();
    if (c == 0 || t == 0) throw std::invalid_argument("window_batch: empty window");
    Tensor out({windows.size(), 1, c, t});
    double* dst = out.v.data();
    for (const Window* w : windows) {
        if (w->n_channels() != c || w->n_times() != t)
            throw std::invalid_argument("window_batch: inconsistent window shapes");
        for (std::size_t ch = 0; ch < c; ++ch) {
            const auto& src = w->data[ch];
            for (std::size_t i = 0; i < t; ++i) dst[ch * t + i] = src[i];
        }
        dst += c * t;
    }
    return out;
}

}  // namespace dstf
