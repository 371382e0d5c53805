// decision_tree.hpp — Small CART classifier (Gini impurity, depth cap), kept as a comparison baseline

#pragma once

#include <algorithm>
#include <array>
#include <numeric>
#include <span>
#include <vector>

#include "cohlab/dataset.hpp"
#include "cohlab/errors.hpp"
#include "cohlab/knn.hpp"

namespace cohlab {

struct TreeOptions {
    int max_depth = 10;
    std::size_t min_samples_split = 2;
};

class DecisionTree {
public:
    static DecisionTree fit(const FeatureMatrix& x, std::span<const int> labels, TreeOptions opts = {}) {
        if (x.rows() != labels.size()) throw DomainError("DecisionTree: features and labels differ in length");
        if (x.rows() == 0) throw DomainError("DecisionTree: empty training set");
        if (opts.max_depth < 0) throw DomainError("DecisionTree: max_depth must be >= 0");
        DecisionTree t;
        t.cols_ = x.cols();
        std::vector<std::size_t> idx(x.rows());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        t.grow(x, labels, idx, 0, opts);
        return t;
    }

    int predict(std::span<const double> q) const {
        if (nodes_.empty()) throw StateError("DecisionTree: not fitted");
        if (q.size() != cols_) throw DomainError("DecisionTree: query width mismatch");
        std::size_t n = 0;
        while (nodes_[n].feature >= 0)
            n = q[static_cast<std::size_t>(nodes_[n].feature)] <= nodes_[n].threshold ? nodes_[n].left
                                                                                       : nodes_[n].right;
        return nodes_[n].label;
    }

    std::vector<int> predict(const FeatureMatrix& x) const {
        std::vector<int> out(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
        return out;
    }

    std::size_t node_count() const noexcept { return nodes_.size(); }

private:
    struct Node {
        int feature = -1; // -1 marks a leaf
        double threshold = 0.0;
        std::size_t left = 0, right = 0;
        int label = 0;
    };

    using Hist = std::array<std::size_t, kNumClasses>;

    static double gini(const Hist& h, std::size_t n) {
        if (n == 0) return 0.0;
        double s = 1.0;
        for (auto c : h) {
            const double p = static_cast<double>(c) / static_cast<double>(n);
            s -= p * p;
        }
        return s;
    }

    std::size_t grow(const FeatureMatrix& x, std::span<const int> y, std::vector<std::size_t>& idx,
                     int depth, const TreeOptions& opts) {
        Hist h{};
        for (auto i : idx) ++h[static_cast<std::size_t>(y[i])];
        const auto majority = static_cast<int>(std::max_element(h.begin(), h.end()) - h.begin());
        const std::size_t me = nodes_.size();
        nodes_.push_back({-1, 0.0, 0, 0, majority});

        const double parent = gini(h, idx.size());
        if (depth >= opts.max_depth || idx.size() < opts.min_samples_split || parent == 0.0) return me;

        // Best split over all features and midpoints between distinct sorted values.
        int best_f = -1;
        double best_t = 0.0, best_score = parent;
        std::vector<std::size_t> order = idx;
        for (std::size_t f = 0; f < x.cols(); ++f) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return x(a, f) < x(b, f) || (x(a, f) == x(b, f) && a < b);
            });
            Hist left{}, right = h;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                const auto c = static_cast<std::size_t>(y[order[i]]);
                ++left[c];
                --right[c];
                const double a = x(order[i], f), b = x(order[i + 1], f);
                if (a == b) continue;
                const std::size_t nl = i + 1, nr = order.size() - nl;
                const double score = (static_cast<double>(nl) * gini(left, nl) +
                                      static_cast<double>(nr) * gini(right, nr)) /
                                     static_cast<double>(order.size());
                if (score < best_score - 1e-15) {
                    best_score = score;
                    best_f = static_cast<int>(f);
                    best_t = 0.5 * (a + b);
                }
            }
        }
        if (best_f < 0) return me;

        std::vector<std::size_t> li, ri;
        for (auto i : idx) (x(i, static_cast<std::size_t>(best_f)) <= best_t ? li : ri).push_back(i);
        idx.clear();
        idx.shrink_to_fit();
        const std::size_t l = grow(x, y, li, depth + 1, opts);
        const std::size_t r = grow(x, y, ri, depth + 1, opts);
        nodes_[me].feature = best_f;
        nodes_[me].threshold = best_t;
        nodes_[me].left = l;
        nodes_[me].right = r;
        return me;
    }

    std::vector<Node> nodes_;
    std::size_t cols_ = 0;
};

} // namespace cohlab
