#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace dstf {

// Dense row-major double tensor. Shape may be empty (scalar with one value).
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
        : shape(std::move(s)), v(count(shape), fill) {}

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }
    static Tensor scalar(double x) {
        Tensor t(std::vector<std::size_t>{});
        t.v[0] = x;
        return t;
    }

    std::size_t numel() const { return v.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    std::size_t ndim() const { return shape.size(); }

    double& at2(std::size_t i, std::size_t j) { return v[i * shape[1] + j]; }
    double at2(std::size_t i, std::size_t j) const { return v[i * shape[1] + j]; }

    std::string shape_str() const;
};

bool same_shape(const Tensor& a, const Tensor& b);
void require_shape(const Tensor& a, const Tensor& b, const char* op);

// Reverse-mode autodiff node. Ops build a graph of shared_ptr<Node>; backward()
// runs the recorded closures in reverse topological order.
struct Node {
    Tensor val;
    Tensor grad;  // allocated iff requires_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;  // accumulates into parents' grads
};

using Var = std::shared_ptr<Node>;

Var make_var(Tensor t, bool requires_grad);
Var make_const(Tensor t);

// Seeds d(root)/d(root) = 1 and propagates; root must be scalar.
void backward(const Var& root);
void zero_grad(const std::vector<Var>& params);

}  // namespace dstf
