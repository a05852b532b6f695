#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "dstf/adam.hpp"
#include "dstf/recording.hpp"
#include "dstf/tensor.hpp"

namespace dstf {

struct LogRegConfig {
    double l2_lambda = 1e-3;
    std::size_t max_iters = 5000;
    double grad_tol = 1e-6;  // stop once the gradient max-norm drops below this
    std::uint64_t seed = 0;
    Adam::Config optimizer;

    LogRegConfig() { optimizer.lr = 0.05; }  // full-batch steps on a convex objective
    void validate() const;
};

// 5-way softmax classifier minimizing mean cross-entropy + (lambda/2)||W||^2.
struct LogReg {
    Tensor w;  // (5, n_features)
    Tensor b;  // (5)
    double l2_lambda = 0.0;
    bool degenerate = false;  // training set had fewer than two classes
    std::size_t iters_run = 0;
    double final_grad_norm = 0.0;
};

LogReg train_logreg(const Tensor& features, const std::vector<SleepStage>& labels,
                    const LogRegConfig& cfg);

std::vector<SleepStage> predict(const LogReg& clf, const Tensor& features);

// Trains one classifier per candidate and keeps the lambda with the best
// validation balanced accuracy; ties go to the smaller lambda.
double select_l2_lambda(const Tensor& train_features,
                        const std::vector<SleepStage>& train_labels,
                        const Tensor& val_features,
                        const std::vector<SleepStage>& val_labels,
                        const std::vector<double>& candidates, const LogRegConfig& cfg);

struct MetricsReport {
    std::array<std::array<std::size_t, 5>, 5> confusion{};  // [true][predicted]
    double balanced_accuracy = 0.0;   // mean recall over classes present
    double weighted_precision = 0.0;  // class-frequency-weighted precision
    double weighted_recall = 0.0;     // equals plain accuracy
    std::array<double, 5> per_class_accuracy{};  // recall; NaN for absent classes
    std::size_t n_examples = 0;
};

MetricsReport metrics_from_predictions(const std::vector<SleepStage>& y_true,
                                       const std::vector<SleepStage>& y_pred);

MetricsReport evaluate(const LogReg& clf, const Tensor& features,
                       const std::vector<SleepStage>& labels);

struct SweepPoint {
    std::size_t budget = 0;  // labeled examples per class; 0 means all available
    bool clipped = false;    // some class had fewer examples than the budget
    std::vector<double> balanced_accuracies;  // one per iteration
    double mean = 0.0;
    double sd = 0.0;  // population sd over iterations
};

// For each budget, draws that many training examples per class without
// replacement (n_iterations independent draws), fits a classifier on the
// subset, and scores balanced accuracy on the full test set. Clipping
// warnings go to `warn` when given. Each (budget, iteration) cell seeds its
// own generator, so `jobs > 1` fans the fits across threads without changing
// any result.
std::vector<SweepPoint> label_budget_sweep(
    const Tensor& train_features, const std::vector<SleepStage>& train_labels,
    const Tensor& test_features, const std::vector<SleepStage>& test_labels,
    const std::vector<std::size_t>& budgets, std::size_t n_iterations,
    std::uint64_t seed, const LogRegConfig& cfg, std::ostream* warn = nullptr,
    std::size_t jobs = 1);

// Top-2 principal components of the sample covariance (n-1 normalization),
// computed with cyclic Jacobi rotations. Component signs are fixed so the
// largest-magnitude entry of each is positive.
struct Pca2 {
    std::vector<double> mean;  // per-feature
    Tensor components;         // (2, n_features), orthonormal rows
    double eigenvalue1 = 0.0;
    double eigenvalue2 = 0.0;
};

Pca2 fit_pca2(const Tensor& features);                       // needs >= 2 rows
Tensor pca2_project(const Pca2& pca, const Tensor& features);  // (n, 2)

// All CSV output goes through %.17g so repeated runs are byte-identical.
std::string g17(double x);

void write_metrics_csv(const MetricsReport& report, const std::string& path);
void write_confusion_csv(const MetricsReport& report, const std::string& path);
void write_metrics_text(const MetricsReport& report, std::ostream& out);
void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path);
void write_projection_csv(const Tensor& projected,
                          const std::vector<SleepStage>& stages,
                          const std::string& path);

}  // namespace dstf
