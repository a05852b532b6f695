#include "dstf/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace dstf {

std::string Tensor::shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

void require_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!same_shape(a, b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a.shape_str() + " vs " + b.shape_str());
}

Var make_var(Tensor t, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad = Tensor(t.shape, 0.0);
    n->val = std::move(t);
    return n;
}

Var make_const(Tensor t) { return make_var(std::move(t), false); }

namespace {

void topo_visit(const Var& n, std::unordered_set<Node*>& seen,
                std::vector<Var>& order) {
    if (!n || seen.count(n.get())) return;
    seen.insert(n.get());
    for (const auto& p : n->parents) topo_visit(p, seen, order);
    order.push_back(n);
}

}  // namespace

void backward(const Var& root) {
    if (!root) throw std::invalid_argument("backward: null root");
    if (root->val.numel() != 1)
        throw std::invalid_argument("backward: root must be scalar, got shape " +
                                    root->val.shape_str());
    if (!root->requires_grad) return;

    std::unordered_set<Node*> seen;
    std::vector<Var> order;
    topo_visit(root, seen, order);

    root->grad.v[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn();
    }
}

void zero_grad(const std::vector<Var>& params) {
    for (const auto& p : params)
        std::fill(p->grad.v.begin(), p->grad.v.end(), 0.0);
}

}  // namespace dstf
