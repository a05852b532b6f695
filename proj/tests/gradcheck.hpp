#pragma once
// Central finite-difference gradient checker shared by the test binaries.
#include <cmath>
#include <functional>
#include <vector>

#include "dstf/tensor.hpp"

namespace testutil {

// f builds a fresh scalar-valued graph from leaf variables each call.
// Returns the worst relative error between analytic and numeric gradients.
inline double gradcheck(
    const std::function<dstf::Var(std::vector<dstf::Var>&)>& f,
    const std::vector<dstf::Tensor>& xs, double h = 1e-5) {
    std::vector<dstf::Var> vars;
    vars.reserve(xs.size());
    for (const auto& t : xs) vars.push_back(dstf::make_var(t, true));
    dstf::Var loss = f(vars);
    dstf::backward(loss);

    double worst = 0.0;
    for (std::size_t p = 0; p < xs.size(); ++p) {
        for (std::size_t i = 0; i < xs[p].numel(); ++i) {
            auto eval = [&](double delta) {
                std::vector<dstf::Var> vs;
                vs.reserve(xs.size());
                for (std::size_t q = 0; q < xs.size(); ++q) {
                    dstf::Tensor t = xs[q];
                    if (q == p) t.v[i] += delta;
                    vs.push_back(dstf::make_var(std::move(t), false));
                }
                return f(vs)->val.v[0];
            };
            double gn = (eval(h) - eval(-h)) / (2.0 * h);
            double ga = vars[p]->grad.v[i];
            double denom = std::max({1.0, std::fabs(ga), std::fabs(gn)});
            worst = std::max(worst, std::fabs(ga - gn) / denom);
        }
    }
    return worst;
}

}  // namespace testutil
