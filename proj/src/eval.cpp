#include "dstf/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "dstf/ops.hpp"
#include "dstf/rng.hpp"

namespace dstf {

void LogRegConfig::validate() const {
    if (l2_lambda < 0) throw std::invalid_argument("l2_lambda must be nonnegative");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
    if (grad_tol <= 0) throw std::invalid_argument("grad_tol must be positive");
    if (optimizer.lr <= 0) throw std::invalid_argument("optimizer lr must be positive");
}

namespace {

constexpr std::size_t kStages = 5;

void check_feature_matrix(const Tensor& x, const std::vector<SleepStage>& y,
                          const char* who) {
    if (x.ndim() != 2)
        throw std::invalid_argument(std::string(who) + ": features must be (n, d)");
    if (x.dim(0) != y.size())
        throw std::invalid_argument(std::string(who) +
                                    ": feature rows and labels disagree");
}

double grad_max_norm(const std::vector<Var>& params) {
    double m = 0.0;
    for (const Var& p : params)
        for (double g : p->grad.v) m = std::max(m, std::abs(g));
    return m;
}

}  // namespace

LogReg train_logreg(const Tensor& features, const std::vector<SleepStage>& labels,
                    const LogRegConfig& cfg) {
    cfg.validate();
    check_feature_matrix(features, labels, "train_logreg");
    const std::size_t n = features.dim(0), d = features.dim(1);
    if (n == 0) throw std::invalid_argument("train_logreg: no examples");

    std::vector<int> y(n);
    std::set<int> present;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(labels[i]);
        present.insert(y[i]);
    }

    Var w = make_var(Tensor({kStages, d}), true);
    Var b = make_var(Tensor({kStages}), true);
    Var x = make_const(features);
    Adam opt({w, b}, cfg.optimizer);

    double gmax = std::numeric_limits<double>::infinity();
    std::size_t it = 0;
    while (it < cfg.max_iters) {
        Var loss = softmax_cross_entropy(linear(x, w, b), y);
        if (cfg.l2_lambda > 0)
            loss = add(loss, scale(half_sum_squares(w), cfg.l2_lambda));
        if (!std::isfinite(loss->val.v[0]))
            throw std::runtime_error("train_logreg: objective is not finite");
        zero_grad({w, b});
        backward(loss);
        gmax = grad_max_norm({w, b});
        if (gmax < cfg.grad_tol) break;
        opt.step();
        ++it;
    }

    LogReg clf;
    clf.w = w->val;
    clf.b = b->val;
    clf.l2_lambda = cfg.l2_lambda;
    clf.degenerate = present.size() < 2;
    clf.iters_run = it;
    clf.final_grad_norm = gmax;
    return clf;
}

std::vector<SleepStage> predict(const LogReg& clf, const Tensor& features) {
    if (features.ndim() != 2 || features.dim(1) != clf.w.dim(1))
        throw std::invalid_argument("predict: features must be (n, " +
                                    std::to_string(clf.w.dim(1)) + ")");
    const std::size_t n = features.dim(0), d = features.dim(1);
    std::vector<SleepStage> out(n, SleepStage::W);
    for (std::size_t i = 0; i < n; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t c = 0; c < kStages; ++c) {
            double s = clf.b.v[c];
            for (std::size_t j = 0; j < d; ++j)
                s += clf.w.at2(c, j) * features.at2(i, j);
            if (s > best) {  // ties keep the lowest stage code
                best = s;
                arg = c;
            }
        }
        out[i] = static_cast<SleepStage>(arg);
    }
    return out;
}

double select_l2_lambda(const Tensor& train_features,
                        const std::vector<SleepStage>& train_labels,
                        const Tensor& val_features,
                        const std::vector<SleepStage>& val_labels,
                        const std::vector<double>& candidates,
                        const LogRegConfig& cfg) {
    if (candidates.empty())
        throw std::invalid_argument("select_l2_lambda: no candidates");
    std::vector<double> sorted = candidates;
    std::sort(sorted.begin(), sorted.end());
    double best_lambda = sorted.front();
    double best_acc = -1.0;
    for (double lambda : sorted) {
        LogRegConfig c = cfg;
        c.l2_lambda = lambda;
        LogReg clf = train_logreg(train_features, train_labels, c);
        double acc = evaluate(clf, val_features, val_labels).balanced_accuracy;
        if (acc > best_acc) {
            best_acc = acc;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

MetricsReport metrics_from_predictions(const std::vector<SleepStage>& y_true,
                                       const std::vector<SleepStage>& y_pred) {
    if (y_true.empty()) throw std::invalid_argument("metrics: no examples");
    if (y_true.size() != y_pred.size())
        throw std::invalid_argument("metrics: prediction count mismatch");

    MetricsReport r;
    r.n_examples = y_true.size();
    for (std::size_t i = 0; i < y_true.size(); ++i)
        ++r.confusion[std::size_t(y_true[i])][std::size_t(y_pred[i])];

    // accumulate in extended precision so worked fixtures come out to the bit
    long double balanced = 0.0L, wprec = 0.0L, wrec = 0.0L;
    std::size_t present = 0;
    const long double total = static_cast<long double>(r.n_examples);
    for (std::size_t c = 0; c < kStages; ++c) {
        std::size_t tp = r.confusion[c][c];
        std::size_t nc = 0, predicted_c = 0;
        for (std::size_t j = 0; j < kStages; ++j) {
            nc += r.confusion[c][j];
            predicted_c += r.confusion[j][c];
        }
        if (nc == 0) {
            r.per_class_accuracy[c] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        ++present;
        double recall = double(tp) / double(nc);
        double precision = predicted_c == 0 ? 0.0 : double(tp) / double(predicted_c);
        r.per_class_accuracy[c] = recall;
        balanced += recall;
        wrec += (long double)(nc) / total * recall;
        wprec += (long double)(nc) / total * precision;
    }
    r.balanced_accuracy = double(balanced / (long double)(present));
    r.weighted_recall = double(wrec);
    r.weighted_precision = double(wprec);
    return r;
}

MetricsReport evaluate(const LogReg& clf, const Tensor& features,
                       const std::vector<SleepStage>& labels) {
    check_feature_matrix(features, labels, "evaluate");
    return metrics_from_predictions(labels, predict(clf, features));
}

std::vector<SweepPoint> label_budget_sweep(
    const Tensor& train_features, const std::vector<SleepStage>& train_labels,
    const Tensor& test_features, const std::vector<SleepStage>& test_labels,
    const std::vector<std::size_t>& budgets, std::size_t n_iterations,
    std::uint64_t seed, const LogRegConfig& cfg, std::ostream* warn,
    std::size_t jobs) {
    check_feature_matrix(train_features, train_labels, "label_budget_sweep");
    check_feature_matrix(test_features, test_labels, "label_budget_sweep");
    if (n_iterations < 1)
        throw std::invalid_argument("label_budget_sweep: need at least one iteration");
    if (jobs < 1)
        throw std::invalid_argument("label_budget_sweep: jobs must be >= 1");

    const std::size_t d = train_features.dim(1);
    std::array<std::vector<std::size_t>, kStages> by_class;
    for (std::size_t i = 0; i < train_labels.size(); ++i)
        by_class[std::size_t(train_labels[i])].push_back(i);

    // clipping depends only on budgets and class counts, so detect it (and
    // warn, in stable order) before any fit runs
    std::vector<SweepPoint> points(budgets.size());
    for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
        points[bi].budget = budgets[bi];
        points[bi].balanced_accuracies.resize(n_iterations);
        for (std::size_t c = 0; c < kStages; ++c) {
            const std::size_t nc = by_class[c].size();
            if (nc == 0 || budgets[bi] == 0 || budgets[bi] <= nc) continue;
            points[bi].clipped = true;
            if (warn)
                *warn << "warning: budget " << budgets[bi] << " exceeds class "
                      << stage_name(static_cast<SleepStage>(c)) << " (" << nc
                      << " available); using all " << nc << '\n';
        }
    }

    // each cell derives its own generator from (budget, iteration), so the
    // schedule below can hand cells to any thread in any order
    auto run_cell = [&](std::size_t budget, std::size_t iter) {
        Rng rng(derive_seed(seed, "sweep/" + std::to_string(budget) + "/" +
                                      std::to_string(iter)));
        std::vector<std::size_t> chosen;
        for (std::size_t c = 0; c < kStages; ++c) {
            const std::size_t nc = by_class[c].size();
            if (nc == 0) continue;
            std::size_t take = (budget == 0 || budget >= nc) ? nc : budget;
            if (take == nc) {
                chosen.insert(chosen.end(), by_class[c].begin(), by_class[c].end());
            } else {
                std::vector<std::size_t> pool = by_class[c];
                for (std::size_t k = 0; k < take; ++k) {
                    std::size_t j = k + rng.uniform_int(pool.size() - k);
                    std::swap(pool[k], pool[j]);
                    chosen.push_back(pool[k]);
                }
            }
        }
        Tensor sub({chosen.size(), d});
        std::vector<SleepStage> sub_labels(chosen.size());
        for (std::size_t i = 0; i < chosen.size(); ++i) {
            std::copy_n(train_features.v.begin() + std::ptrdiff_t(chosen[i] * d), d,
                        sub.v.begin() + std::ptrdiff_t(i * d));
            sub_labels[i] = train_labels[chosen[i]];
        }
        LogReg clf = train_logreg(sub, sub_labels, cfg);
        MetricsReport rep = evaluate(clf, test_features, test_labels);
        return rep.balanced_accuracy;
    };

    const std::size_t n_cells = budgets.size() * n_iterations;
    if (jobs == 1 || n_cells == 1) {
        for (std::size_t k = 0; k < n_cells; ++k)
            points[k / n_iterations].balanced_accuracies[k % n_iterations] =
                run_cell(budgets[k / n_iterations], k % n_iterations);
    } else {
        std::atomic<std::size_t> next{0};
        std::mutex err_mu;
        std::exception_ptr first_error;
        auto worker = [&] {
            for (;;) {
                std::size_t k = next.fetch_add(1);
                if (k >= n_cells) return;
                try {
                    points[k / n_iterations].balanced_accuracies[k % n_iterations] =
                        run_cell(budgets[k / n_iterations], k % n_iterations);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!first_error) first_error = std::current_exception();
                    next.store(n_cells);
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(jobs, n_cells); ++t)
            pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    for (SweepPoint& pt : points) {
        long double mean = 0.0L;
        for (double a : pt.balanced_accuracies) mean += a;
        mean /= (long double)(pt.balanced_accuracies.size());
        long double var = 0.0L;
        for (double a : pt.balanced_accuracies) {
            long double dlt = a - mean;
            var += dlt * dlt;
        }
        var /= (long double)(pt.balanced_accuracies.size());
        pt.mean = double(mean);
        pt.sd = double(std::sqrt(double(var)));
    }
    return points;
}

namespace {

// one cyclic Jacobi sweep over the symmetric matrix a; v accumulates rotations
double jacobi_sweep(Tensor& a, Tensor& v) {
    const std::size_t d = a.dim(0);
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < d; ++p) {
        for (std::size_t q = p + 1; q < d; ++q) {
            double apq = a.at2(p, q);
            if (apq == 0.0) continue;
            double theta = (a.at2(q, q) - a.at2(p, p)) / (2.0 * apq);
            double t = (theta >= 0 ? 1.0 : -1.0) /
                       (std::abs(theta) + std::sqrt(theta * theta + 1.0));
            double c = 1.0 / std::sqrt(t * t + 1.0);
            double s = t * c;
            for (std::size_t k = 0; k < d; ++k) {
                double akp = a.at2(k, p), akq = a.at2(k, q);
                a.at2(k, p) = c * akp - s * akq;
                a.at2(k, q) = s * akp + c * akq;
            }
            for (std::size_t k = 0; k < d; ++k) {
                double apk = a.at2(p, k), aqk = a.at2(q, k);
                a.at2(p, k) = c * apk - s * aqk;
                a.at2(q, k) = s * apk + c * aqk;
            }
            a.at2(p, q) = 0.0;
            a.at2(q, p) = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                double vkp = v.at2(k, p), vkq = v.at2(k, q);
                v.at2(k, p) = c * vkp - s * vkq;
                v.at2(k, q) = s * vkp + c * vkq;
            }
        }
    }
    for (std::size_t p = 0; p + 1 < d; ++p)
        for (std::size_t q = p + 1; q < d; ++q) off += a.at2(p, q) * a.at2(p, q);
    return std::sqrt(off);
}

}  // namespace

Pca2 fit_pca2(const Tensor& features) {
    if (features.ndim() != 2)
        throw std::invalid_argument("fit_pca2: features must be (n, d)");
    const std::size_t n = features.dim(0), d = features.dim(1);
    if (n < 2) throw std::invalid_argument("fit_pca2: need at least 2 rows");
    if (d < 2) throw std::invalid_argument("fit_pca2: need at least 2 features");

    Pca2 pca;
    pca.mean.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        long double m = 0.0L;
        for (std::size_t i = 0; i < n; ++i) m += features.at2(i, j);
        pca.mean[j] = double(m / (long double)(n));
    }

    Tensor centered = features;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) centered.at2(i, j) -= pca.mean[j];

    Tensor cov({d, d});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a) {
            double xa = centered.at2(i, a);
            for (std::size_t bcol = a; bcol < d; ++bcol)
                cov.at2(a, bcol) += xa * centered.at2(i, bcol);
        }
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t bcol = a; bcol < d; ++bcol) {
            cov.at2(a, bcol) /= double(n - 1);
            cov.at2(bcol, a) = cov.at2(a, bcol);
        }

    double scale = 0.0;
    for (double x : cov.v) scale = std::max(scale, std::abs(x));
    Tensor a = cov;
    Tensor v({d, d});
    for (std::size_t i = 0; i < d; ++i) v.at2(i, i) = 1.0;
    for (std::size_t sweep = 0; sweep < 100; ++sweep)
        if (jacobi_sweep(a, v) <= 1e-14 * std::max(scale, 1e-300)) break;

    std::vector<std::size_t> order(d);
    for (std::size_t i = 0; i < d; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        return a.at2(l, l) > a.at2(r, r);
    });
    pca.eigenvalue1 = a.at2(order[0], order[0]);
    pca.eigenvalue2 = a.at2(order[1], order[1]);

    pca.components = Tensor({2, d});
    for (std::size_t r = 0; r < 2; ++r) {
        std::size_t col = order[r];
        std::size_t arg = 0;
        for (std::size_t k = 1; k < d; ++k)
            if (std::abs(v.at2(k, col)) > std::abs(v.at2(arg, col))) arg = k;
        double sign = v.at2(arg, col) < 0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < d; ++k)
            pca.components.at2(r, k) = sign * v.at2(k, col);
    }
    return pca;
}

Tensor pca2_project(const Pca2& pca, const Tensor& features) {
    if (features.ndim() != 2 || features.dim(1) != pca.mean.size())
        throw std::invalid_argument("pca2_project: feature width mismatch");
    const std::size_t n = features.dim(0), d = features.dim(1);
    Tensor out({n, 2});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t r = 0; r < 2; ++r) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j)
                s += (features.at2(i, j) - pca.mean[j]) * pca.components.at2(r, j);
            out.at2(i, r) = s;
        }
    return out;
}

std::string g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    return f;
}

void finish(std::ofstream& f, const std::string& path) {
    if (!f) throw std::runtime_error("write to " + path + " failed");
}

}  // namespace

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream f = open_out(path);
    f << "metric,value\n";
    f << "balanced_accuracy," << g17(report.balanced_accuracy) << '\n';
    f << "weighted_precision," << g17(report.weighted_precision) << '\n';
    f << "weighted_recall," << g17(report.weighted_recall) << '\n';
    for (std::size_t c = 0; c < kStages; ++c)
        f << "per_class_accuracy_" << stage_name(static_cast<SleepStage>(c)) << ','
          << g17(report.per_class_accuracy[c]) << '\n';
    f << "n_examples," << report.n_examples << '\n';
    finish(f, path);
}

void write_confusion_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream f = open_out(path);
    f << "true\\predicted";
    for (std::size_t c = 0; c < kStages; ++c)
        f << ',' << stage_name(static_cast<SleepStage>(c));
    f << '\n';
    for (std::size_t r = 0; r < kStages; ++r) {
        f << stage_name(static_cast<SleepStage>(r));
        for (std::size_t c = 0; c < kStages; ++c) f << ',' << report.confusion[r][c];
        f << '\n';
    }
    finish(f, path);
}

void write_metrics_text(const MetricsReport& report, std::ostream& out) {
    out << "examples: " << report.n_examples << '\n';
    out << "balanced accuracy:  " << g17(report.balanced_accuracy) << '\n';
    out << "weighted precision: " << g17(report.weighted_precision) << '\n';
    out << "weighted recall:    " << g17(report.weighted_recall) << '\n';
    out << "per-class accuracy:";
    for (std::size_t c = 0; c < kStages; ++c)
        out << ' ' << stage_name(static_cast<SleepStage>(c)) << '='
            << g17(report.per_class_accuracy[c]);
    out << '\n';
    out << "confusion (rows true, columns predicted):\n";
    for (std::size_t r = 0; r < kStages; ++r) {
        out << "  " << std::setw(2) << stage_name(static_cast<SleepStage>(r));
        for (std::size_t c = 0; c < kStages; ++c)
            out << ' ' << std::setw(6) << report.confusion[r][c];
        out << '\n';
    }
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
    std::ofstream f = open_out(path);
    f << "budget,iteration,balanced_accuracy\n";
    for (const SweepPoint& pt : points)
        for (std::size_t i = 0; i < pt.balanced_accuracies.size(); ++i) {
            if (pt.budget == 0)
                f << "all";
            else
                f << pt.budget;
            f << ',' << i << ',' << g17(pt.balanced_accuracies[i]) << '\n';
        }
    finish(f, path);
}

void write_projection_csv(const Tensor& projected,
                          const std::vector<SleepStage>& stages,
                          const std::string& path) {
    if (projected.ndim() != 2 || projected.dim(1) != 2 ||
        projected.dim(0) != stages.size())
        throw std::invalid_argument("write_projection_csv: want (n, 2) plus n stages");
    std::ofstream f = open_out(path);
    f << "x,y,stage\n";
    for (std::size_t i = 0; i < stages.size(); ++i)
        f << g17(projected.at2(i, 0)) << ',' << g17(projected.at2(i, 1)) << ','
          << stage_name(stages[i]) << '\n';
    finish(f, path);
}

}  // namespace dstf
