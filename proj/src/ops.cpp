#include "dstf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace dstf {

namespace {

bool any_grad(const std::vector<Var>& parents) {
    for (const auto& p : parents)
        if (p->requires_grad) return true;
    return false;
}

// Wires a result node: parents/backward only kept when a parent needs grads.
Var result(Tensor val, std::vector<Var> parents,
           const std::function<void(Node&)>& attach) {
    bool rg = any_grad(parents);
    Var out = make_var(std::move(val), rg);
    if (rg) {
        out->parents = std::move(parents);
        attach(*out);
    }
    return out;
}

void require_4d(const Tensor& t, const char* op) {
    if (t.ndim() != 4)
        throw std::invalid_argument(std::string(op) + ": expected 4-d tensor, got " +
                                    t.shape_str());
}

}  // namespace

Var add(const Var& a, const Var& b) {
    require_shape(a->val, b->val, "add");
    Tensor out(a->val.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] = a->val.v[i] + b->val.v[i];
    return result(std::move(out), {a, b}, [a, b](Node& n) {
        n.backward_fn = [&n, a, b] {
            if (a->requires_grad)
                for (std::size_t i = 0; i < n.grad.numel(); ++i) a->grad.v[i] += n.grad.v[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < n.grad.numel(); ++i) b->grad.v[i] += n.grad.v[i];
        };
    });
}

Var sub(const Var& a, const Var& b) {
    require_shape(a->val, b->val, "sub");
    Tensor out(a->val.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] = a->val.v[i] - b->val.v[i];
    return result(std::move(out), {a, b}, [a, b](Node& n) {
        n.backward_fn = [&n, a, b] {
            if (a->requires_grad)
                for (std::size_t i = 0; i < n.grad.numel(); ++i) a->grad.v[i] += n.grad.v[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < n.grad.numel(); ++i) b->grad.v[i] -= n.grad.v[i];
        };
    });
}

Var mul(const Var& a, const Var& b) {
    require_shape(a->val, b->val, "mul");
    Tensor out(a->val.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] = a->val.v[i] * b->val.v[i];
    return result(std::move(out), {a, b}, [a, b](Node& n) {
        n.backward_fn = [&n, a, b] {
            if (a->requires_grad)
                for (std::size_t i = 0; i < n.grad.numel(); ++i)
                    a->grad.v[i] += n.grad.v[i] * b->val.v[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < n.grad.numel(); ++i)
                    b->grad.v[i] += n.grad.v[i] * a->val.v[i];
        };
    });
}

Var scale(const Var& a, double c) {
    Tensor out(a->val.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] = a->val.v[i] * c;
    return result(std::move(out), {a}, [a, c](Node& n) {
        n.backward_fn = [&n, a, c] {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) a->grad.v[i] += n.grad.v[i] * c;
        };
    });
}

Var relu(const Var& x) {
    Tensor out(x->val.shape);
    // written as (x < 0 ? 0 : x) so NaN passes through instead of silently
    // turning into 0; a diverged forward pass must be able to reach the loss
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.v[i] = x->val.v[i] < 0.0 ? 0.0 : x->val.v[i];
    return result(std::move(out), {x}, [x](Node& n) {
        n.backward_fn = [&n, x] {
            for (std::size_t i = 0; i < n.grad.numel(); ++i)
                if (x->val.v[i] > 0.0) x->grad.v[i] += n.grad.v[i];
        };
    });
}

Var abs_diff(const Var& a, const Var& b) {
    require_shape(a->val, b->val, "abs_diff");
    Tensor out(a->val.shape);
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.v[i] = std::fabs(a->val.v[i] - b->val.v[i]);
    return result(std::move(out), {a, b}, [a, b](Node& n) {
        n.backward_fn = [&n, a, b] {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) {
                double d = a->val.v[i] - b->val.v[i];
                double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);  // subgradient 0 at 0
                if (a->requires_grad) a->grad.v[i] += n.grad.v[i] * s;
                if (b->requires_grad) b->grad.v[i] -= n.grad.v[i] * s;
            }
        };
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const Tensor &X = x->val, &W = w->val, &B = b->val;
    if (X.ndim() != 2 || W.ndim() != 2 || B.ndim() != 1)
        throw std::invalid_argument("linear: expected x(B,N), w(M,N), b(M); got " +
                                    X.shape_str() + ", " + W.shape_str() + ", " +
                                    B.shape_str());
    if (X.dim(1) != W.dim(1) || W.dim(0) != B.dim(0))
        throw std::invalid_argument("linear: incompatible shapes " + X.shape_str() +
                                    ", " + W.shape_str() + ", " + B.shape_str());
    std::size_t n = X.dim(0), in = X.dim(1), m = W.dim(0);
    Tensor out({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = &X.v[i * in];
        for (std::size_t j = 0; j < m; ++j) {
            const double* wj = &W.v[j * in];
            double acc = B.v[j];
            for (std::size_t k = 0; k < in; ++k) acc += xi[k] * wj[k];
            out.v[i * m + j] = acc;
        }
    }
    return result(std::move(out), {x, w, b}, [x, w, b, n, in, m](Node& nd) {
        nd.backward_fn = [&nd, x, w, b, n, in, m] {
            const double* g = nd.grad.v.data();
            if (x->requires_grad) {
                for (std::size_t i = 0; i < n; ++i) {
                    double* dxi = &x->grad.v[i * in];
                    for (std::size_t j = 0; j < m; ++j) {
                        double gij = g[i * m + j];
                        if (gij == 0.0) continue;
                        const double* wj = &w->val.v[j * in];
                        for (std::size_t k = 0; k < in; ++k) dxi[k] += gij * wj[k];
                    }
                }
            }
            if (w->requires_grad) {
                for (std::size_t j = 0; j < m; ++j) {
                    double* dwj = &w->grad.v[j * in];
                    for (std::size_t i = 0; i < n; ++i) {
                        double gij = g[i * m + j];
                        if (gij == 0.0) continue;
                        const double* xi = &x->val.v[i * in];
                        for (std::size_t k = 0; k < in; ++k) dwj[k] += gij * xi[k];
                    }
                }
            }
            if (b->requires_grad) {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) b->grad.v[j] += g[i * m + j];
            }
        };
    });
}

Var concat_cols(const Var& a, const Var& b) {
    const Tensor &A = a->val, &B = b->val;
    if (A.ndim() != 2 || B.ndim() != 2 || A.dim(0) != B.dim(0))
        throw std::invalid_argument("concat_cols: need matching row counts, got " +
                                    A.shape_str() + " vs " + B.shape_str());
    std::size_t n = A.dim(0), n1 = A.dim(1), n2 = B.dim(1);
    Tensor out({n, n1 + n2});
    for (std::size_t i = 0; i < n; ++i) {
        std::memcpy(&out.v[i * (n1 + n2)], &A.v[i * n1], n1 * sizeof(double));
        std::memcpy(&out.v[i * (n1 + n2) + n1], &B.v[i * n2], n2 * sizeof(double));
    }
    return result(std::move(out), {a, b}, [a, b, n, n1, n2](Node& nd) {
        nd.backward_fn = [&nd, a, b, n, n1, n2] {
            for (std::size_t i = 0; i < n; ++i) {
                if (a->requires_grad)
                    for (std::size_t k = 0; k < n1; ++k)
                        a->grad.v[i * n1 + k] += nd.grad.v[i * (n1 + n2) + k];
                if (b->requires_grad)
                    for (std::size_t k = 0; k < n2; ++k)
                        b->grad.v[i * n2 + k] += nd.grad.v[i * (n1 + n2) + n1 + k];
            }
        };
    });
}

Var flatten(const Var& x) {
    require_4d(x->val, "flatten");
    std::size_t bsz = x->val.dim(0);
    std::size_t rest = x->val.numel() / (bsz ? bsz : 1);
    Tensor out({bsz, rest});
    out.v = x->val.v;  // row-major: same storage order
    return result(std::move(out), {x}, [x](Node& n) {
        n.backward_fn = [&n, x] {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) x->grad.v[i] += n.grad.v[i];
        };
    });
}

Var squeeze_col(const Var& x) {
    if (x->val.ndim() != 2 || x->val.dim(1) != 1)
        throw std::invalid_argument("squeeze_col: expected (B,1), got " +
                                    x->val.shape_str());
    Tensor out({x->val.dim(0)});
    out.v = x->val.v;
    return result(std::move(out), {x}, [x](Node& n) {
        n.backward_fn = [&n, x] {
            for (std::size_t i = 0; i < n.grad.numel(); ++i) x->grad.v[i] += n.grad.v[i];
        };
    });
}

Var conv_spatial(const Var& x, const Var& w, const Var& b) {
    const Tensor &X = x->val, &W = w->val;
    require_4d(X, "conv_spatial");
    if (X.dim(1) != 1)
        throw std::invalid_argument("conv_spatial: expected (B,1,C,T), got " +
                                    X.shape_str());
    if (W.ndim() != 2 || W.dim(1) != X.dim(2))
        throw std::invalid_argument("conv_spatial: weight " + W.shape_str() +
                                    " does not match input " + X.shape_str());
    if (b->val.ndim() != 1 || b->val.dim(0) != W.dim(0))
        throw std::invalid_argument("conv_spatial: bias shape " + b->val.shape_str());
    std::size_t bsz = X.dim(0), c = X.dim(2), t = X.dim(3), m = W.dim(0);
    Tensor out({bsz, m, 1, t});
    for (std::size_t bi = 0; bi < bsz; ++bi) {
        for (std::size_t mi = 0; mi < m; ++mi) {
            double* o = &out.v[(bi * m + mi) * t];
            std::fill(o, o + t, b->val.v[mi]);
            for (std::size_t ci = 0; ci < c; ++ci) {
                double wv = W.v[mi * c + ci];
                const double* xi = &X.v[(bi * c + ci) * t];
                for (std::size_t ti = 0; ti < t; ++ti) o[ti] += wv * xi[ti];
            }
        }
    }
    return result(std::move(out), {x, w, b}, [x, w, b, bsz, c, t, m](Node& nd) {
        nd.backward_fn = [&nd, x, w, b, bsz, c, t, m] {
            for (std::size_t bi = 0; bi < bsz; ++bi) {
                for (std::size_t mi = 0; mi < m; ++mi) {
                    const double* g = &nd.grad.v[(bi * m + mi) * t];
                    if (b->requires_grad) {
                        double acc = 0.0;
                        for (std::size_t ti = 0; ti < t; ++ti) acc += g[ti];
                        b->grad.v[mi] += acc;
                    }
                    for (std::size_t ci = 0; ci < c; ++ci) {
                        const double* xi = &x->val.v[(bi * c + ci) * t];
                        if (w->requires_grad) {
                            double acc = 0.0;
                            for (std::size_t ti = 0; ti < t; ++ti) acc += g[ti] * xi[ti];
                            w->grad.v[mi * c + ci] += acc;
                        }
                        if (x->requires_grad) {
                            double wv = w->val.v[mi * c + ci];
                            double* dx = &x->grad.v[(bi * c + ci) * t];
                            for (std::size_t ti = 0; ti < t; ++ti) dx[ti] += wv * g[ti];
                        }
                    }
                }
            }
        };
    });
}

Var permute_fs(const Var& x) {
    require_4d(x->val, "permute_fs");
    std::size_t bsz = x->val.dim(0), f = x->val.dim(1), s = x->val.dim(2),
                t = x->val.dim(3);
    Tensor out({bsz, s, f, t});
    for (std::size_t bi = 0; bi < bsz; ++bi)
        for (std::size_t fi = 0; fi < f; ++fi)
            for (std::size_t si = 0; si < s; ++si)
                std::memcpy(&out.v[((bi * s + si) * f + fi) * t],
                            &x->val.v[((bi * f + fi) * s + si) * t], t * sizeof(double));
    return result(std::move(out), {x}, [x, bsz, f, s, t](Node& nd) {
        nd.backward_fn = [&nd, x, bsz, f, s, t] {
            for (std::size_t bi = 0; bi < bsz; ++bi)
                for (std::size_t fi = 0; fi < f; ++fi)
                    for (std::size_t si = 0; si < s; ++si) {
                        const double* g = &nd.grad.v[((bi * s + si) * f + fi) * t];
                        double* dx = &x->grad.v[((bi * f + fi) * s + si) * t];
                        for (std::size_t ti = 0; ti < t; ++ti) dx[ti] += g[ti];
                    }
        };
    });
}

Var conv_time(const Var& x, const Var& w, const Var& b) {
    const Tensor &X = x->val, &W = w->val;
    require_4d(X, "conv_time");
    if (W.ndim() != 3 || W.dim(1) != X.dim(1))
        throw std::invalid_argument("conv_time: weight " + W.shape_str() +
                                    " does not match input " + X.shape_str());
    if (b->val.ndim() != 1 || b->val.dim(0) != W.dim(0))
        throw std::invalid_argument("conv_time: bias shape " + b->val.shape_str());
    std::size_t bsz = X.dim(0), f = X.dim(1), s = X.dim(2), t = X.dim(3);
    std::size_t m = W.dim(0), k = W.dim(2);
    if (t < k)
        throw std::invalid_argument("conv_time: kernel longer than input (" +
                                    std::to_string(k) + " > " + std::to_string(t) + ")");
    std::size_t to = t - k + 1;
    Tensor out({bsz, m, s, to});
    for (std::size_t bi = 0; bi < bsz; ++bi) {
        for (std::size_t mi = 0; mi < m; ++mi) {
            for (std::size_t si = 0; si < s; ++si) {
                double* __restrict__ o = &out.v[((bi * m + mi) * s + si) * to];
                std::fill(o, o + to, b->val.v[mi]);
                for (std::size_t fi = 0; fi < f; ++fi) {
                    const double* xi = &X.v[((bi * f + fi) * s + si) * t];
                    const double* wr = &W.v[(mi * f + fi) * k];
                    for (std::size_t ki = 0; ki < k; ++ki) {
                        double wv = wr[ki];
                        const double* xs = xi + ki;
                        for (std::size_t ti = 0; ti < to; ++ti) o[ti] += wv * xs[ti];
                    }
                }
            }
        }
    }
    return result(std::move(out), {x, w, b}, [x, w, b, bsz, f, s, t, m, k, to](Node& nd) {
        nd.backward_fn = [&nd, x, w, b, bsz, f, s, t, m, k, to] {
            for (std::size_t bi = 0; bi < bsz; ++bi) {
                for (std::size_t mi = 0; mi < m; ++mi) {
                    for (std::size_t si = 0; si < s; ++si) {
                        const double* g = &nd.grad.v[((bi * m + mi) * s + si) * to];
                        if (b->requires_grad) {
                            double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
                            std::size_t ti = 0;
                            for (; ti + 4 <= to; ti += 4) {
                                a0 += g[ti];
                                a1 += g[ti + 1];
                                a2 += g[ti + 2];
                                a3 += g[ti + 3];
                            }
                            for (; ti < to; ++ti) a0 += g[ti];
                            b->grad.v[mi] += (a0 + a1) + (a2 + a3);
                        }
                        for (std::size_t fi = 0; fi < f; ++fi) {
                            const double* xi = &x->val.v[((bi * f + fi) * s + si) * t];
                            if (w->requires_grad) {
                                // t outer / k inner keeps each dw[k] an
                                // independent chain so the loop vectorizes
                                double* __restrict__ dwr = &w->grad.v[(mi * f + fi) * k];
                                for (std::size_t ti = 0; ti < to; ++ti) {
                                    double gv = g[ti];
                                    const double* xs = xi + ti;
                                    for (std::size_t ki = 0; ki < k; ++ki)
                                        dwr[ki] += gv * xs[ki];
                                }
                            }
                            if (x->requires_grad) {
                                double* dx = &x->grad.v[((bi * f + fi) * s + si) * t];
                                const double* wr = &w->val.v[(mi * f + fi) * k];
                                for (std::size_t ki = 0; ki < k; ++ki) {
                                    double wv = wr[ki];
                                    double* __restrict__ ds = dx + ki;
                                    for (std::size_t ti = 0; ti < to; ++ti)
                                        ds[ti] += wv * g[ti];
                                }
                            }
                        }
                    }
                }
            }
        };
    });
}

Var max_pool_time(const Var& x, std::size_t pool) {
    require_4d(x->val, "max_pool_time");
    if (pool == 0) throw std::invalid_argument("max_pool_time: pool must be positive");
    std::size_t bsz = x->val.dim(0), f = x->val.dim(1), s = x->val.dim(2),
                t = x->val.dim(3);
    std::size_t to = t / pool;
    if (to == 0)
        throw std::invalid_argument("max_pool_time: pool " + std::to_string(pool) +
                                    " exceeds length " + std::to_string(t));
    Tensor out({bsz, f, s, to});
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
    std::size_t rows = bsz * f * s;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xi = &x->val.v[r * t];
        double* o = &out.v[r * to];
        std::size_t* am = &(*argmax)[r * to];
        for (std::size_t ti = 0; ti < to; ++ti) {
            std::size_t base = ti * pool, best = base;
            double bv = xi[base];
            for (std::size_t p = 1; p < pool; ++p)
                if (xi[base + p] > bv) {  // strict: ties keep the first max
                    bv = xi[base + p];
                    best = base + p;
                }
            o[ti] = bv;
            am[ti] = best;
        }
    }
    return result(std::move(out), {x}, [x, argmax, rows, t, to](Node& nd) {
        nd.backward_fn = [&nd, x, argmax, rows, t, to] {
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t ti = 0; ti < to; ++ti)
                    x->grad.v[r * t + (*argmax)[r * to + ti]] += nd.grad.v[r * to + ti];
        };
    });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               BatchNormState& state, bool train) {
    require_4d(x->val, "batch_norm");
    std::size_t bsz = x->val.dim(0), f = x->val.dim(1), s = x->val.dim(2),
                t = x->val.dim(3);
    if (gamma->val.ndim() != 1 || gamma->val.dim(0) != f ||
        beta->val.ndim() != 1 || beta->val.dim(0) != f)
        throw std::invalid_argument("batch_norm: affine params must be (" +
                                    std::to_string(f) + ")");
    if (state.running_mean.numel() != f || state.running_var.numel() != f)
        throw std::invalid_argument("batch_norm: state does not match feature count");

    std::size_t n = bsz * s * t;
    auto mean = std::make_shared<std::vector<double>>(f, 0.0);
    auto var = std::make_shared<std::vector<double>>(f, 0.0);
    if (train) {
        if (n < 2) throw std::invalid_argument("batch_norm: batch too small");
        std::size_t st = s * t;
        for (std::size_t fi = 0; fi < f; ++fi) {
            double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
            for (std::size_t bi = 0; bi < bsz; ++bi) {
                const double* row = &x->val.v[((bi * f + fi) * s) * t];
                std::size_t i = 0;
                for (; i + 4 <= st; i += 4) {
                    a0 += row[i];
                    a1 += row[i + 1];
                    a2 += row[i + 2];
                    a3 += row[i + 3];
                }
                for (; i < st; ++i) a0 += row[i];
            }
            double mu = ((a0 + a1) + (a2 + a3)) / static_cast<double>(n);
            double q0 = 0.0, q1 = 0.0, q2 = 0.0, q3 = 0.0;
            for (std::size_t bi = 0; bi < bsz; ++bi) {
                const double* row = &x->val.v[((bi * f + fi) * s) * t];
                std::size_t i = 0;
                for (; i + 4 <= st; i += 4) {
                    double d0 = row[i] - mu, d1 = row[i + 1] - mu;
                    double d2 = row[i + 2] - mu, d3 = row[i + 3] - mu;
                    q0 += d0 * d0;
                    q1 += d1 * d1;
                    q2 += d2 * d2;
                    q3 += d3 * d3;
                }
                for (; i < st; ++i) {
                    double d = row[i] - mu;
                    q0 += d * d;
                }
            }
            double acc2 = (q0 + q1) + (q2 + q3);
            (*mean)[fi] = mu;
            (*var)[fi] = acc2 / static_cast<double>(n);  // biased, used to normalize
            // running stats follow the usual convention: unbiased variance
            double unbiased = acc2 / static_cast<double>(n - 1);
            state.running_mean.v[fi] =
                (1.0 - state.momentum) * state.running_mean.v[fi] + state.momentum * mu;
            state.running_var.v[fi] =
                (1.0 - state.momentum) * state.running_var.v[fi] + state.momentum * unbiased;
        }
    } else {
        for (std::size_t fi = 0; fi < f; ++fi) {
            (*mean)[fi] = state.running_mean.v[fi];
            (*var)[fi] = state.running_var.v[fi];
        }
    }

    double eps = state.eps;
    Tensor out(x->val.shape);
    auto xhat = std::make_shared<std::vector<double>>(x->val.numel());
    for (std::size_t bi = 0; bi < bsz; ++bi)
        for (std::size_t fi = 0; fi < f; ++fi) {
            double inv = 1.0 / std::sqrt((*var)[fi] + eps);
            double mu = (*mean)[fi], ga = gamma->val.v[fi], be = beta->val.v[fi];
            const double* row = &x->val.v[((bi * f + fi) * s) * t];
            double* __restrict__ h = &(*xhat)[((bi * f + fi) * s) * t];
            double* __restrict__ o = &out.v[((bi * f + fi) * s) * t];
            for (std::size_t i = 0; i < s * t; ++i) {
                h[i] = (row[i] - mu) * inv;
                o[i] = ga * h[i] + be;
            }
        }

    return result(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat, var, bsz, f, s, t, n, eps, train](Node& nd) {
                      nd.backward_fn = [&nd, x, gamma, beta, xhat, var, bsz, f, s, t, n,
                                        eps, train] {
                          std::size_t st = s * t;
                          for (std::size_t fi = 0; fi < f; ++fi) {
                              double inv = 1.0 / std::sqrt((*var)[fi] + eps);
                              double ga = gamma->val.v[fi];
                              double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
                              double h0 = 0.0, h1 = 0.0, h2 = 0.0, h3 = 0.0;
                              for (std::size_t bi = 0; bi < bsz; ++bi) {
                                  const double* g = &nd.grad.v[((bi * f + fi) * st)];
                                  const double* h = &(*xhat)[((bi * f + fi) * st)];
                                  std::size_t i = 0;
                                  for (; i + 4 <= st; i += 4) {
                                      s0 += g[i];
                                      s1 += g[i + 1];
                                      s2 += g[i + 2];
                                      s3 += g[i + 3];
                                      h0 += g[i] * h[i];
                                      h1 += g[i + 1] * h[i + 1];
                                      h2 += g[i + 2] * h[i + 2];
                                      h3 += g[i + 3] * h[i + 3];
                                  }
                                  for (; i < st; ++i) {
                                      s0 += g[i];
                                      h0 += g[i] * h[i];
                                  }
                              }
                              double sum_g = (s0 + s1) + (s2 + s3);
                              double sum_gh = (h0 + h1) + (h2 + h3);
                              if (gamma->requires_grad) gamma->grad.v[fi] += sum_gh;
                              if (beta->requires_grad) beta->grad.v[fi] += sum_g;
                              if (x->requires_grad) {
                                  double nn = static_cast<double>(n);
                                  for (std::size_t bi = 0; bi < bsz; ++bi) {
                                      const double* g = &nd.grad.v[((bi * f + fi) * st)];
                                      const double* h = &(*xhat)[((bi * f + fi) * st)];
                                      double* __restrict__ dx =
                                          &x->grad.v[((bi * f + fi) * st)];
                                      if (train) {
                                          for (std::size_t i = 0; i < st; ++i)
                                              dx[i] += ga * inv *
                                                       (g[i] - sum_g / nn -
                                                        h[i] * sum_gh / nn);
                                      } else {
                                          for (std::size_t i = 0; i < st; ++i)
                                              dx[i] += ga * inv * g[i];
                                      }
                                  }
                              }
                          }
                      };
                  });
}

Var dropout(const Var& x, double p, bool train, Rng& rng) {
    if (p < 0.0 || p >= 1.0)
        throw std::invalid_argument("dropout: p must be in [0,1), got " +
                                    std::to_string(p));
    if (!train || p == 0.0) {
        Tensor out = x->val;
        return result(std::move(out), {x}, [x](Node& n) {
            n.backward_fn = [&n, x] {
                for (std::size_t i = 0; i < n.grad.numel(); ++i)
                    x->grad.v[i] += n.grad.v[i];
            };
        });
    }
    double keep = 1.0 - p, inv = 1.0 / keep;
    auto mask = std::make_shared<std::vector<double>>(x->val.numel());
    Tensor out(x->val.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        (*mask)[i] = rng.bernoulli(keep) ? inv : 0.0;
        out.v[i] = x->val.v[i] * (*mask)[i];
    }
    return result(std::move(out), {x}, [x, mask](Node& n) {
        n.backward_fn = [&n, x, mask] {
            for (std::size_t i = 0; i < n.grad.numel(); ++i)
                x->grad.v[i] += n.grad.v[i] * (*mask)[i];
        };
    });
}

Var bce_with_logits(const Var& z, const Tensor& y) {
    if (z->val.ndim() != 1)
        throw std::invalid_argument("bce_with_logits: expected logits (B,), got " +
                                    z->val.shape_str());
    require_shape(z->val, y, "bce_with_logits");
    std::size_t n = z->val.numel();
    if (n == 0) throw std::invalid_argument("bce_with_logits: empty batch");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double zi = z->val.v[i], yi = y.v[i];
        acc += std::max(zi, 0.0) - zi * yi + std::log1p(std::exp(-std::fabs(zi)));
    }
    Tensor out = Tensor::scalar(acc / static_cast<double>(n));
    Tensor yc = y;
    return result(std::move(out), {z}, [z, yc = std::move(yc), n](Node& nd) {
        nd.backward_fn = [&nd, z, yc, n] {
            double g = nd.grad.v[0] / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                double sig = 1.0 / (1.0 + std::exp(-z->val.v[i]));
                z->grad.v[i] += g * (sig - yc.v[i]);
            }
        };
    });
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels) {
    const Tensor& Z = logits->val;
    if (Z.ndim() != 2)
        throw std::invalid_argument("softmax_cross_entropy: expected (B,C), got " +
                                    Z.shape_str());
    std::size_t n = Z.dim(0), c = Z.dim(1);
    if (labels.size() != n)
        throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= c)
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
    if (n == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");
    double acc = 0.0;
    auto probs = std::make_shared<std::vector<double>>(n * c);
    for (std::size_t i = 0; i < n; ++i) {
        const double* zi = &Z.v[i * c];
        double m = zi[0];
        for (std::size_t j = 1; j < c; ++j) m = std::max(m, zi[j]);
        double se = 0.0;
        for (std::size_t j = 0; j < c; ++j) se += std::exp(zi[j] - m);
        double lse = m + std::log(se);
        acc += lse - zi[labels[i]];
        for (std::size_t j = 0; j < c; ++j)
            (*probs)[i * c + j] = std::exp(zi[j] - lse);
    }
    Tensor out = Tensor::scalar(acc / static_cast<double>(n));
    auto lab = std::make_shared<std::vector<int>>(labels);
    return result(std::move(out), {logits}, [logits, probs, lab, n, c](Node& nd) {
        nd.backward_fn = [&nd, logits, probs, lab, n, c] {
            double g = nd.grad.v[0] / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    double p = (*probs)[i * c + j];
                    double ind = (static_cast<std::size_t>((*lab)[i]) == j) ? 1.0 : 0.0;
                    logits->grad.v[i * c + j] += g * (p - ind);
                }
        };
    });
}

Var reduce_dot(const Var& x, const Tensor& w) {
    require_shape(x->val, w, "reduce_dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < w.numel(); ++i) acc += x->val.v[i] * w.v[i];
    Tensor out = Tensor::scalar(acc);
    Tensor wc = w;
    return result(std::move(out), {x}, [x, wc = std::move(wc)](Node& n) {
        n.backward_fn = [&n, x, wc] {
            double g = n.grad.v[0];
            for (std::size_t i = 0; i < wc.numel(); ++i)
                x->grad.v[i] += g * wc.v[i];
        };
    });
}

Var half_sum_squares(const Var& w) {
    double acc = 0.0;
    for (double x : w->val.v) acc += x * x;
    Tensor out = Tensor::scalar(0.5 * acc);
    return result(std::move(out), {w}, [w](Node& n) {
        n.backward_fn = [&n, w] {
            double g = n.grad.v[0];
            for (std::size_t i = 0; i < w->val.numel(); ++i)
                w->grad.v[i] += g * w->val.v[i];
        };
    });
}

}  // namespace dstf
