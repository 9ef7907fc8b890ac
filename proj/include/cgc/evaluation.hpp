#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cgc/errors.hpp"
#include "cgc/matrix.hpp"
#include "cgc/rng.hpp"

namespace cgc {

struct FoldSplit {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
};

// Stratified k-fold: per class, shuffled indices are dealt round-robin
// into folds. Classes smaller than k force a plain unstratified split.
inline std::vector<FoldSplit> kfold_split(const std::vector<int>& labels, int k,
                                          std::uint64_t seed) {
    const std::size_t n = labels.size();
    if (k < 2) throw ConfigError("kfold_split: k must be >= 2");
    if (n < std::size_t(k)) throw ConfigError("kfold_split: n < k");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);

    bool stratified = true;
    for (const auto& kv : by_class)
        if (kv.second.size() < std::size_t(k)) stratified = false;
    if (!stratified)
        std::cerr << "[cgc] warning: class smaller than k folds, using unstratified split\n";

    std::vector<std::vector<std::size_t>> folds;
    folds.resize(std::size_t(k));
    Rng rng = make_rng(seed, 0xf01d5ULL);
    if (stratified) {
        for (auto& kv : by_class) {
            std::vector<std::size_t> idx = kv.second;
            std::shuffle(idx.begin(), idx.end(), rng);
            for (std::size_t i = 0; i < idx.size(); ++i) folds[i % std::size_t(k)].push_back(idx[i]);
        }
    } else {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i = 0; i < n; ++i) folds[i % std::size_t(k)].push_back(idx[i]);
    }

    std::vector<FoldSplit> splits;
    splits.resize(std::size_t(k));
    for (int f = 0; f < k; ++f) {
        std::vector<std::size_t>& test = folds[std::size_t(f)];
        std::sort(test.begin(), test.end());
        splits[std::size_t(f)].test_idx = test;
        for (std::size_t i = 0; i < n; ++i)
            if (!std::binary_search(test.begin(), test.end(), i))
                splits[std::size_t(f)].train_idx.push_back(i);
    }
    return splits;
}

// One-vs-rest linear SVM trained with Pegasos subgradient descent on the
// L2-regularized hinge loss. Bias handled by constant-feature
// augmentation; the permutation schedule is fixed by the seed, so
// training is deterministic.
inline Matrix train_linear_svm(const Matrix& x, const std::vector<int>& y, double reg,
                               int num_classes, int epochs = 100, std::uint64_t seed = 0) {
    const std::size_t n = x.rows(), d = x.cols();
    if (y.size() != n) throw ShapeError("train_linear_svm: labels/rows mismatch");
    {
        std::map<int, int> present;
        for (int l : y) present[l]++;
        if (present.size() < 2)
            throw DegenerateFoldError("train_linear_svm: training split has a single class");
    }

    Matrix w(std::size_t(num_classes), d + 1);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    long t = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng rng = make_rng(seed, 0x5e9a505ULL + std::uint64_t(epoch));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t pos = 0; pos < n; ++pos) {
            ++t;
            const std::size_t i = order[pos];
            const double eta = 1.0 / (reg * double(t));
            const double shrink = 1.0 - 1.0 / double(t); // = 1 - eta*reg
            for (int c = 0; c < num_classes; ++c) {
                const double yc = y[i] == c ? 1.0 : -1.0;
                double margin = w(std::size_t(c), d); // bias term
                for (std::size_t j = 0; j < d; ++j) margin += w(std::size_t(c), j) * x(i, j);
                margin *= yc;
                for (std::size_t j = 0; j <= d; ++j) w(std::size_t(c), j) *= shrink;
                if (margin < 1.0) {
                    for (std::size_t j = 0; j < d; ++j)
                        w(std::size_t(c), j) += eta * yc * x(i, j);
                    w(std::size_t(c), d) += eta * yc;
                }
            }
        }
    }
    return w;
}

inline int svm_predict_row(const Matrix& w, const Matrix& x, std::size_t row) {
    const std::size_t d = x.cols();
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < w.rows(); ++c) {
        double s = w(c, d);
        for (std::size_t j = 0; j < d; ++j) s += w(c, j) * x(row, j);
        if (s > best_score) {
            best_score = s;
            best = int(c);
        }
    }
    return best;
}

// Micro/macro F1 over single-label multiclass predictions. Classes absent
// from both truth and prediction contribute F1 = 0 to the macro mean.
inline std::pair<double, double> f1_scores(const std::vector<int>& y_true,
                                           const std::vector<int>& y_pred, int num_classes) {
    if (y_true.size() != y_pred.size())
        throw ShapeError("f1_scores: length mismatch " + std::to_string(y_true.size()) + " vs " +
                         std::to_string(y_pred.size()));
    const std::size_t nc = std::size_t(num_classes);
    std::vector<double> tp(nc, 0.0), fp(nc, 0.0), fn(nc, 0.0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] == y_pred[i]) {
            tp[std::size_t(y_true[i])] += 1.0;
        } else {
            fp[std::size_t(y_pred[i])] += 1.0;
            fn[std::size_t(y_true[i])] += 1.0;
        }
    }
    double tp_all = 0.0, fp_all = 0.0, fn_all = 0.0, macro = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        tp_all += tp[std::size_t(c)];
        fp_all += fp[std::size_t(c)];
        fn_all += fn[std::size_t(c)];
        const double denom = tp[std::size_t(c)] + 0.5 * (fp[std::size_t(c)] + fn[std::size_t(c)]);
        macro += denom > 0.0 ? tp[std::size_t(c)] / denom : 0.0;
    }
    const double micro_denom = tp_all + 0.5 * (fp_all + fn_all);
    const double micro = micro_denom > 0.0 ? tp_all / micro_denom : 0.0;
    return {micro, macro / double(num_classes)};
}

struct FoldScore {
    double f1_micro = 0.0;
    double f1_macro = 0.0;
};

struct EvalReport {
    std::vector<FoldScore> per_fold;
    double mean_micro = 0.0, std_micro = 0.0;
    double mean_macro = 0.0, std_macro = 0.0;
    std::vector<std::string> fold_errors; // recorded, non-fatal
};

// Linear evaluation protocol: one SVM per fold on the frozen embeddings,
// mean and population standard deviation over fold scores.
inline EvalReport evaluate(const Matrix& embeddings, const std::vector<int>& labels, int k,
                           std::uint64_t seed, double reg = 1e-3, int svm_epochs = 100) {
    if (embeddings.rows() != labels.size())
        throw ShapeError("evaluate: embeddings rows != label count");
    int num_classes = 0;
    for (int l : labels) num_classes = std::max(num_classes, l + 1);

    EvalReport report;
    const auto splits = kfold_split(labels, k, seed);
    for (std::size_t f = 0; f < splits.size(); ++f) {
        const FoldSplit& split = splits[f];
        try {
            Matrix x_train(split.train_idx.size(), embeddings.cols());
            std::vector<int> y_train(split.train_idx.size());
            for (std::size_t i = 0; i < split.train_idx.size(); ++i) {
                y_train[i] = labels[split.train_idx[i]];
                for (std::size_t j = 0; j < embeddings.cols(); ++j)
                    x_train(i, j) = embeddings(split.train_idx[i], j);
            }
            Matrix w = train_linear_svm(x_train, y_train, reg, num_classes, svm_epochs,
                                        derive_seed(seed, 0x5f01dULL + f));

            Matrix x_test(split.test_idx.size(), embeddings.cols());
            std::vector<int> y_test(split.test_idx.size()), y_pred(split.test_idx.size());
            for (std::size_t i = 0; i < split.test_idx.size(); ++i) {
                y_test[i] = labels[split.test_idx[i]];
                for (std::size_t j = 0; j < embeddings.cols(); ++j)
                    x_test(i, j) = embeddings(split.test_idx[i], j);
            }
            for (std::size_t i = 0; i < split.test_idx.size(); ++i)
                y_pred[i] = svm_predict_row(w, x_test, i);

            const auto [micro, macro] = f1_scores(y_test, y_pred, num_classes);
            report.per_fold.push_back({micro, macro});
        } catch (const DegenerateFoldError& e) {
            report.fold_errors.push_back("fold " + std::to_string(f) + ": " + e.what());
        }
    }

    if (report.per_fold.empty())
        throw DegenerateFoldError("evaluate: all folds failed");

    const double n = double(report.per_fold.size());
    for (const FoldScore& s : report.per_fold) {
        report.mean_micro += s.f1_micro / n;
        report.mean_macro += s.f1_macro / n;
    }
    for (const FoldScore& s : report.per_fold) {
        report.std_micro += (s.f1_micro - report.mean_micro) * (s.f1_micro - report.mean_micro) / n;
        report.std_macro += (s.f1_macro - report.mean_macro) * (s.f1_macro - report.mean_macro) / n;
    }
    report.std_micro = std::sqrt(report.std_micro);
    report.std_macro = std::sqrt(report.std_macro);
    return report;
}

// Table-style text row: "NAME  micro(std)  macro(std)" in percent.
inline std::string report_row(const std::string& name, const EvalReport& r) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s  %.2f(%.2f)  %.2f(%.2f)", name.c_str(),
                  100.0 * r.mean_micro, 100.0 * r.std_micro, 100.0 * r.mean_macro,
                  100.0 * r.std_macro);
    return buf;
}

} // namespace cgc
