// metrics.hpp — Confusion matrix and per-class precision, recall, F score and Matthews correlation

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cohlab/dataset.hpp"
#include "cohlab/errors.hpp"

namespace cohlab {

// A metric that may be undefined (zero denominator). Undefined values carry
// NaN and defined == false; they are never reported as 0.
struct MetricValue {
    double value = std::numeric_limits<double>::quiet_NaN();
    bool defined = false;

    static MetricValue of(double v) { return {v, true}; }
    static MetricValue undefined() { return {}; }
};

// chi(m, n): rows are predicted classes, columns true classes.
class ConfusionMatrix {
public:
    using Counts = std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses>;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(const Counts& c) : chi_(c) {}

    static ConfusionMatrix from(std::span<const int> predicted, std::span<const int> truth) {
        if (predicted.size() != truth.size())
            throw DomainError("ConfusionMatrix: predictions and labels differ in length");
        ConfusionMatrix cm;
        for (std::size_t i = 0; i < truth.size(); ++i) cm.add(predicted[i], truth[i]);
        return cm;
    }

    void add(int predicted, int truth) {
        if (predicted < 0 || predicted >= kNumClasses || truth < 0 || truth >= kNumClasses)
            throw DomainError("ConfusionMatrix: class index out of range");
        ++chi_[static_cast<std::size_t>(predicted)][static_cast<std::size_t>(truth)];
    }

    std::uint64_t operator()(int m, int n) const {
        return chi_[static_cast<std::size_t>(m)][static_cast<std::size_t>(n)];
    }

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (const auto& row : chi_)
            for (auto v : row) t += v;
        return t;
    }
    std::uint64_t row_sum(int m) const {
        std::uint64_t t = 0;
        for (int n = 0; n < kNumClasses; ++n) t += (*this)(m, n);
        return t;
    }
    std::uint64_t col_sum(int n) const {
        std::uint64_t t = 0;
        for (int m = 0; m < kNumClasses; ++m) t += (*this)(m, n);
        return t;
    }
    std::uint64_t trace() const {
        std::uint64_t t = 0;
        for (int k = 0; k < kNumClasses; ++k) t += (*this)(k, k);
        return t;
    }

    const Counts& counts() const noexcept { return chi_; }
    bool operator==(const ConfusionMatrix&) const = default;

private:
    Counts chi_{};
};

inline void check_class(int k) {
    if (k < 0 || k >= kNumClasses) throw DomainError("metrics: class index out of range");
}

/// Trace over total, in percent.
inline double accuracy(const ConfusionMatrix& chi) {
    const auto total = chi.total();
    if (total == 0) throw DomainError("accuracy: empty confusion matrix");
    return 100.0 * static_cast<double>(chi.trace()) / static_cast<double>(total);
}

struct PrecisionRecall {
    MetricValue precision; // chi_kk / column-k sum
    MetricValue recall;    // chi_kk / row-k sum
};

// With rows = predicted, the column-sum ratio is what is usually called recall
// and vice versa; the names here follow the formulas, not the convention.
inline PrecisionRecall precision_recall(const ConfusionMatrix& chi, int k) {
    check_class(k);
    const auto d = static_cast<double>(chi(k, k));
    const auto col = chi.col_sum(k);
    const auto row = chi.row_sum(k);
    PrecisionRecall out;
    out.precision = col > 0 ? MetricValue::of(d / static_cast<double>(col)) : MetricValue::undefined();
    out.recall = row > 0 ? MetricValue::of(d / static_cast<double>(row)) : MetricValue::undefined();
    return out;
}

/// Harmonic mean of precision and recall, in percent.
inline MetricValue f_score(const ConfusionMatrix& chi, int k) {
    const auto pr = precision_recall(chi, k);
    if (!pr.precision.defined || !pr.recall.defined) return MetricValue::undefined();
    const double p = pr.precision.value, r = pr.recall.value;
    if (!(p + r > 0.0)) return MetricValue::undefined();
    return MetricValue::of(200.0 * p * r / (p + r));
}

/// One-vs-rest Matthews correlation for class k, in percent.
inline MetricValue mcc(const ConfusionMatrix& chi, int k) {
    check_class(k);
    const auto tp = static_cast<double>(chi(k, k));
    const double fp = static_cast<double>(chi.col_sum(k)) - tp; // sum_{m != k} chi_mk
    const double fn = static_cast<double>(chi.row_sum(k)) - tp; // sum_{m != k} chi_km
    const double tn = static_cast<double>(chi.total()) - tp - fp - fn;
    const double a = tp + fp, b = tp + fn, c = tn + fp, d = tn + fn;
    if (!(a > 0.0 && b > 0.0 && c > 0.0 && d > 0.0)) return MetricValue::undefined();
    return MetricValue::of(100.0 * (tp * tn - fp * fn) / std::sqrt(a * b * c * d));
}

struct ClassReport {
    int k;
    MetricValue precision, recall, f, mcc;
};

inline std::vector<ClassReport> class_reports(const ConfusionMatrix& chi) {
    std::vector<ClassReport> out;
    for (int k = 0; k < kNumClasses; ++k) {
        const auto pr = precision_recall(chi, k);
        out.push_back({k, pr.precision, pr.recall, f_score(chi, k), mcc(chi, k)});
    }
    return out;
}

inline std::string format_metric(const MetricValue& v, int digits = 2) {
    if (!v.defined) return "nan";
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v.value;
    return os.str();
}

/// Per-class table: class,precision,recall,f_score,mcc (F and MCC in percent).
inline void write_class_csv(std::ostream& os, const ConfusionMatrix& chi) {
    os << "class,precision,recall,f_score,mcc\n";
    for (const auto& r : class_reports(chi))
        os << r.k << ',' << format_metric(r.precision, 6) << ',' << format_metric(r.recall, 6) << ','
           << format_metric(r.f, 4) << ',' << format_metric(r.mcc, 4) << '\n';
}

struct MappingSummary {
    std::string mapping;
    int k;
    std::string weighting;
    std::string metric;
    double cv_accuracy;         // mean k-fold accuracy on the training split
    double validation_accuracy; // single shot on the held-out split
};

/// Hyperparameter/accuracy table, one row per mapping.
inline void write_summary_csv(std::ostream& os, std::span<const MappingSummary> rows) {
    os << "mapping,k,weighting,metric,cv_accuracy,validation_accuracy\n";
    for (const auto& r : rows) {
        char buf[64];
        os << r.mapping << ',' << r.k << ',' << r.weighting << ',' << r.metric << ',';
        std::snprintf(buf, sizeof buf, "%.4f,%.4f", r.cv_accuracy, r.validation_accuracy);
        os << buf << '\n';
    }
}

// Plain-text grid, predicted classes down the side, true classes across.
inline std::string render_confusion(const ConfusionMatrix& chi) {
    std::ostringstream os;
    os << "            true\n";
    os << "pred   ";
    for (int n = 0; n < kNumClasses; ++n) os << std::setw(8) << n;
    os << '\n';
    for (int m = 0; m < kNumClasses; ++m) {
        os << std::setw(4) << m << "   ";
        for (int n = 0; n < kNumClasses; ++n) os << std::setw(8) << chi(m, n);
        os << '\n';
    }
    return os.str();
}

inline void write_confusion_csv(std::ostream& os, const ConfusionMatrix& chi) {
    os << "predicted\\true";
    for (int n = 0; n < kNumClasses; ++n) os << ',' << n;
    os << '\n';
    for (int m = 0; m < kNumClasses; ++m) {
        os << m;
        for (int n = 0; n < kNumClasses; ++n) os << ',' << chi(m, n);
        os << '\n';
    }
}

} // namespace cohlab
