#include "dstf/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace dstf {

Adam::Adam(std::vector<Var> params, Config cfg)
    : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
        if (!p || !p->requires_grad)
            throw std::invalid_argument("Adam: all parameters must require grad");
        m_.emplace_back(p->val.numel(), 0.0);
        v_.emplace_back(p->val.numel(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& p = *params_[pi];
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < p.val.numel(); ++i) {
            double g = p.grad.v[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            double mh = m[i] / bc1;
            double vh = v[i] / bc2;
            p.val.v[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
        }
    }
}

}  // namespace dstf
