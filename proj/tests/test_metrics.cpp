#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "cohlab/knn.hpp"
#include "cohlab/metrics.hpp"
#include "cohlab/random.hpp"

using namespace cohlab;

namespace {

ConfusionMatrix diag(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    ConfusionMatrix::Counts k{};
    k[0][0] = a;
    k[1][1] = b;
    k[2][2] = c;
    k[3][3] = d;
    return ConfusionMatrix(k);
}

} // namespace

TEST(Confusion, RowsArePredictions) {
    const std::vector<int> pred{0, 1, 1, 3}, truth{0, 0, 1, 2};
    const auto cm = ConfusionMatrix::from(pred, truth);
    EXPECT_EQ(cm(1, 0), 1u); // predicted 1, truly 0
    EXPECT_EQ(cm(3, 2), 1u);
    EXPECT_EQ(cm.total(), 4u);
    EXPECT_THROW(ConfusionMatrix::from(std::vector<int>{0}, truth), DomainError);
    EXPECT_THROW(ConfusionMatrix::from(std::vector<int>{4}, std::vector<int>{0}), DomainError);
}

TEST(Accuracy, Examples) {
    EXPECT_EQ(accuracy(diag(3, 5, 0, 2)), 100.0);
    ConfusionMatrix::Counts k{};
    k[0][0] = 3;
    k[0][1] = 1;
    k[1][0] = 1;
    k[1][1] = 3;
    EXPECT_EQ(accuracy(ConfusionMatrix(k)), 75.0);
    EXPECT_THROW(accuracy(ConfusionMatrix{}), DomainError);
}

TEST(PrecisionRecall, Examples) {
    const auto d = diag(4, 4, 4, 4);
    for (int k = 0; k < 4; ++k) {
        const auto pr = precision_recall(d, k);
        EXPECT_EQ(pr.precision.value, 1.0);
        EXPECT_EQ(pr.recall.value, 1.0);
        EXPECT_EQ(f_score(d, k).value, 100.0);
        EXPECT_EQ(mcc(d, k).value, 100.0);
    }
    ConfusionMatrix::Counts k{};
    k[0][0] = 8;
    k[0][1] = 2;
    k[1][0] = 2;
    k[1][1] = 8;
    const ConfusionMatrix cm(k);
    EXPECT_DOUBLE_EQ(precision_recall(cm, 0).precision.value, 0.8);
    EXPECT_DOUBLE_EQ(precision_recall(cm, 0).recall.value, 0.8);
    EXPECT_DOUBLE_EQ(f_score(cm, 0).value, 80.0);
}

TEST(PrecisionRecall, FollowsPrintedFormulas) {
    ConfusionMatrix::Counts k{};
    k[0][0] = 6; // predicted 0, true 0
    k[0][1] = 3; // predicted 0, true 1
    k[1][0] = 1; // predicted 1, true 0
    k[1][1] = 2;
    const ConfusionMatrix cm(k);
    // p_0 = chi_00 / column-0 sum, R_0 = chi_00 / row-0 sum
    EXPECT_DOUBLE_EQ(precision_recall(cm, 0).precision.value, 6.0 / 7.0);
    EXPECT_DOUBLE_EQ(precision_recall(cm, 0).recall.value, 6.0 / 9.0);
}

TEST(Metrics, UndefinedIsFlaggedNotZero) {
    const auto cm = diag(5, 5, 0, 5);
    const auto pr = precision_recall(cm, 2);
    EXPECT_FALSE(pr.precision.defined);
    EXPECT_FALSE(pr.recall.defined);
    EXPECT_TRUE(std::isnan(pr.precision.value));
    EXPECT_FALSE(f_score(cm, 2).defined);
    EXPECT_FALSE(mcc(cm, 2).defined);
    EXPECT_EQ(format_metric(f_score(cm, 2)), "nan");
    // Only one class present: its one-vs-rest negatives are empty.
    EXPECT_FALSE(mcc(diag(9, 0, 0, 0), 0).defined);
}

TEST(Mcc, HandComputed) {
    ConfusionMatrix::Counts k{};
    k[0][0] = 5;
    k[0][1] = 2;
    k[1][0] = 1;
    k[1][1] = 7;
    k[2][2] = 4;
    k[3][2] = 1;
    const ConfusionMatrix cm(k);
    const double tp = 5, fp = 1, fn = 2, tn = 20 - 8;
    const double expect = 100 * (tp * tn - fp * fn) / std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
    EXPECT_DOUBLE_EQ(mcc(cm, 0).value, expect);
}

TEST(Mcc, RandomPredictionsNearZero) {
    Rng rng(3, 90, 0);
    std::vector<int> pred(10000), truth(10000);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        truth[i] = static_cast<int>(i % 4);
        pred[i] = static_cast<int>(rng.below(4));
    }
    const auto cm = ConfusionMatrix::from(pred, truth);
    for (int k = 0; k < 4; ++k) EXPECT_LT(std::abs(mcc(cm, k).value), 5.0);
}

TEST(Metrics, AccuracyEqualsSingleShot) {
    Rng rng(4, 91, 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> pred(333), truth(333);
        for (std::size_t i = 0; i < truth.size(); ++i) {
            truth[i] = static_cast<int>(rng.below(4));
            pred[i] = rng.uniform() < 0.6 ? truth[i] : static_cast<int>(rng.below(4));
        }
        EXPECT_EQ(accuracy(ConfusionMatrix::from(pred, truth)), single_shot_accuracy(pred, truth));
    }
}

TEST(Metrics, PermutationEquivariance) {
    Rng rng(5, 92, 0);
    std::vector<int> pred(2000), truth(2000);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        truth[i] = static_cast<int>(rng.below(4));
        pred[i] = rng.uniform() < 0.5 ? truth[i] : static_cast<int>(rng.below(4));
    }
    const std::array<int, 4> perm{2, 0, 3, 1};
    std::vector<int> pp(pred.size()), pt(truth.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        pp[i] = perm[static_cast<std::size_t>(pred[i])];
        pt[i] = perm[static_cast<std::size_t>(truth[i])];
    }
    const auto a = ConfusionMatrix::from(pred, truth), b = ConfusionMatrix::from(pp, pt);
    for (int k = 0; k < 4; ++k) {
        const int pk = perm[static_cast<std::size_t>(k)];
        EXPECT_DOUBLE_EQ(f_score(a, k).value, f_score(b, pk).value);
        EXPECT_DOUBLE_EQ(mcc(a, k).value, mcc(b, pk).value);
        EXPECT_DOUBLE_EQ(precision_recall(a, k).recall.value, precision_recall(b, pk).recall.value);
    }
}

TEST(Metrics, Bounds) {
    Rng rng(6, 93, 0);
    for (int trial = 0; trial < 200; ++trial) {
        ConfusionMatrix::Counts k{};
        for (auto& row : k)
            for (auto& v : row) v = rng.below(50);
        const ConfusionMatrix cm(k);
        for (int c = 0; c < 4; ++c) {
            const auto f = f_score(cm, c), m = mcc(cm, c);
            if (f.defined) {
                EXPECT_LE(f.value, 100.0 + 1e-12);
            }
            if (m.defined) {
                EXPECT_LE(m.value, 100.0 + 1e-12);
                EXPECT_GE(m.value, -100.0 - 1e-12);
            }
        }
    }
}

TEST(Reports, CsvAndRendering) {
    const auto cm = diag(10, 0, 3, 4);
    std::ostringstream os;
    write_class_csv(os, cm);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "class,precision,recall,f_score,mcc");
    EXPECT_NE(os.str().find("1,nan,nan,nan,nan"), std::string::npos);
    const auto txt = render_confusion(cm);
    EXPECT_NE(txt.find("pred"), std::string::npos);
    EXPECT_NE(txt.find("10"), std::string::npos);
    std::ostringstream s2;
    const MappingSummary rows[] = {{"f3", 15, "distance", "euclidean", 81.64, 82.82}};
    write_summary_csv(s2, rows);
    EXPECT_EQ(s2.str(), "mapping,k,weighting,metric,cv_accuracy,validation_accuracy\n"
                        "f3,15,distance,euclidean,81.6400,82.8200\n");
}
