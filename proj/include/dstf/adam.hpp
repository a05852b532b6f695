#pragma once

#include <vector>

#include "dstf/tensor.hpp"

namespace dstf {

// Adam with bias correction. Step count starts at 0; call step() after
// gradients have been accumulated into each parameter's grad tensor.
class Adam {
public:
    struct Config {
        double lr = 5e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam(std::vector<Var> params, Config cfg);
    explicit Adam(std::vector<Var> params) : Adam(std::move(params), Config()) {}

    void step();
    const std::vector<Var>& params() const { return params_; }
    std::size_t steps_taken() const { return t_; }

private:
    std::vector<Var> params_;
    Config cfg_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

}  // namespace dstf
