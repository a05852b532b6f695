// Micro-benchmark: StagerNet-sized forward+backward pass, single core.
// Prints wall time per window and effective GFLOP/s so training budgets in
// bundled configs can be sized against real hardware.
#include <malloc.h>

#include <chrono>
#include <cstdio>
#include <vector>

#include "dstf/adam.hpp"
#include "dstf/ops.hpp"
#include "dstf/rng.hpp"
#include "dstf/tensor.hpp"

using namespace dstf;

int main(int argc, char** argv) {
    // keep big tensor blocks on the heap across iterations instead of
    // mmap/munmap churn (page faults dominate otherwise)
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, -1);
    std::size_t batch = argc > 1 ? std::stoul(argv[1]) : 64;
    std::size_t iters = argc > 2 ? std::stoul(argv[2]) : 10;
    const std::size_t C = 2, T = 3000, M = 16, K = 50, P = 13, E = 100;

    Rng rng(42);
    auto init = [&](std::vector<std::size_t> shape, double sd) {
        Tensor t(shape);
        for (auto& x : t.v) x = sd * rng.normal();
        return make_var(std::move(t), true);
    };

    auto ws = init({C, C}, 0.5);
    auto bs = init({C}, 0.0);
    auto w1 = init({M, 1, K}, 0.1);
    auto b1 = init({M}, 0.0);
    auto g1 = make_var(Tensor({M}, 1.0), true);
    auto be1 = make_var(Tensor({M}, 0.0), true);
    auto w2 = init({M, M, K}, 0.05);
    auto b2 = init({M}, 0.0);
    auto g2 = make_var(Tensor({M}, 1.0), true);
    auto be2 = make_var(Tensor({M}, 0.0), true);
    std::size_t flat = M * C * ((T - K + 1) / P - K + 1) / P * 1;
    flat = M * C * (((T - K + 1) / P - K + 1) / P);
    auto wo = init({E, flat}, 0.05);
    auto bo = init({E}, 0.0);
    std::vector<Var> params = {ws, bs, w1, b1, g1, be1, w2, b2, g2, be2, wo, bo};

    BatchNormState bn1{Tensor({M}, 0.0), Tensor({M}, 1.0)};
    BatchNormState bn2{Tensor({M}, 0.0), Tensor({M}, 1.0)};

    Tensor xin({batch, 1, C, T});
    for (auto& x : xin.v) x = rng.normal();
    Tensor yt({batch});
    for (auto& y : yt.v) y = rng.bernoulli(0.5) ? 1.0 : 0.0;

    auto fwd = [&](const Var& x) {
        auto h = conv_spatial(x, ws, bs);
        h = permute_fs(h);
        h = conv_time(h, w1, b1);
        h = batch_norm(h, g1, be1, bn1, true);
        h = relu(h);
        h = max_pool_time(h, P);
        h = conv_time(h, w2, b2);
        h = batch_norm(h, g2, be2, bn2, true);
        h = relu(h);
        h = max_pool_time(h, P);
        h = flatten(h);
        h = dropout(h, 0.5, true, rng);
        return linear(h, wo, bo);
    };

    // analytic flop count per window, forward only (mul+add pairs)
    std::size_t to1 = T - K + 1, tp1 = to1 / P, to2 = tp1 - K + 1, tp2 = to2 / P;
    double f_conv1 = 2.0 * M * 1 * K * C * to1;
    double f_conv2 = 2.0 * M * M * K * C * to2;
    double f_spat = 2.0 * C * C * T;
    double f_lin = 2.0 * E * (M * C * tp2);
    double fwd_flops = f_conv1 + f_conv2 + f_spat + f_lin;
    double total_flops = 3.0 * fwd_flops;  // fwd + dx + dw

    // warmup
    {
        auto x = make_const(xin);
        auto emb = fwd(x);
        auto sq = half_sum_squares(emb);
        backward(sq);
        zero_grad(params);
    }

    double windows = static_cast<double>(batch * iters);
    double sink = 0.0;

    auto f0 = std::chrono::steady_clock::now();
    for (std::size_t it = 0; it < iters; ++it) {
        auto x = make_const(xin);
        auto emb = fwd(x);
        sink += emb->val.v[0];
    }
    auto f1 = std::chrono::steady_clock::now();
    double fsecs = std::chrono::duration<double>(f1 - f0).count();
    std::printf("fwd only: %.3f ms/window, %.2f GF/s\n", fsecs / windows * 1e3,
                fwd_flops * windows / fsecs / 1e9);

    auto t0 = std::chrono::steady_clock::now();
    for (std::size_t it = 0; it < iters; ++it) {
        auto x = make_const(xin);
        auto emb = fwd(x);
        auto sq = half_sum_squares(emb);
        backward(sq);
        sink += sq->val.v[0];
        zero_grad(params);
    }
    auto t1 = std::chrono::steady_clock::now();
    double secs = std::chrono::duration<double>(t1 - t0).count();
    double gf = total_flops * windows / secs / 1e9;
    std::printf("batch %zu, iters %zu, flat %zu\n", batch, iters, flat);
    std::printf("fwd+bwd flops/window: %.1f MF\n", total_flops / 1e6);
    std::printf("%.3f s total, %.3f ms/window, %.2f GF/s (sink %.3g)\n", secs,
                secs / windows * 1e3, gf, sink);
    return 0;
}
