// knn.hpp — Exhaustive-scan k-nearest-neighbour classifier, k-fold CV and randomized search

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cohlab/dataset.hpp"
#include "cohlab/errors.hpp"
#include "cohlab/random.hpp"

namespace cohlab {

using ClassMass = std::array<double, kNumClasses>;

enum class Weighting { uniform, distance };
enum class Metric { euclidean, manhattan };

inline std::string to_string(Weighting w) { return w == Weighting::uniform ? "uniform" : "distance"; }
inline std::string to_string(Metric m) { return m == Metric::euclidean ? "euclidean" : "manhattan"; }

inline Weighting weighting_from_string(const std::string& s) {
    if (s == "uniform") return Weighting::uniform;
    if (s == "distance") return Weighting::distance;
    throw DomainError("unknown weighting '" + s + "'");
}

inline Metric metric_from_string(const std::string& s) {
    if (s == "euclidean") return Metric::euclidean;
    if (s == "manhattan") return Metric::manhattan;
    throw DomainError("unknown metric '" + s + "'");
}

struct Hyperparams {
    int k = 5;
    Weighting weighting = Weighting::uniform;
    Metric metric = Metric::euclidean;

    bool operator==(const Hyperparams&) const = default;
};

// Tie order for equal scores: smaller k, uniform before distance, euclidean before manhattan.
inline bool canonical_less(const Hyperparams& a, const Hyperparams& b) {
    return std::tuple(a.k, a.weighting, a.metric) < std::tuple(b.k, b.weighting, b.metric);
}

inline void to_json(nlohmann::json& j, const Hyperparams& h) {
    j = nlohmann::json{{"k", h.k}, {"weighting", to_string(h.weighting)}, {"metric", to_string(h.metric)}};
}
inline void from_json(const nlohmann::json& j, Hyperparams& h) {
    h.k = j.at("k").get<int>();
    h.weighting = weighting_from_string(j.at("weighting").get<std::string>());
    h.metric = metric_from_string(j.at("metric").get<std::string>());
}

struct HyperSpace {
    std::vector<int> k_range;
    std::vector<Weighting> weightings{Weighting::uniform, Weighting::distance};
    std::vector<Metric> metrics{Metric::euclidean, Metric::manhattan};

    HyperSpace() {
        for (int k = 1; k <= 50; ++k) k_range.push_back(k);
    }

    std::size_t size() const { return k_range.size() * weightings.size() * metrics.size(); }

    // k-major enumeration.
    std::vector<Hyperparams> enumerate() const {
        std::vector<Hyperparams> out;
        out.reserve(size());
        for (int k : k_range)
            for (Weighting w : weightings)
                for (Metric m : metrics) out.push_back({k, w, m});
        return out;
    }
};

// Which cumulant ratios a classifier sees: f1 all four, f2 the first three, f3 the first two.
enum class Mapping { f1, f2, f3 };

inline std::vector<int> feature_subset(Mapping m) {
    switch (m) {
    case Mapping::f1: return {0, 1, 2, 3};
    case Mapping::f2: return {0, 1, 2};
    case Mapping::f3: return {0, 1};
    }
    return {};
}

inline std::string to_string(Mapping m) {
    switch (m) {
    case Mapping::f1: return "f1";
    case Mapping::f2: return "f2";
    case Mapping::f3: return "f3";
    }
    return "?";
}

inline Mapping mapping_from_string(const std::string& s) {
    if (s == "f1") return Mapping::f1;
    if (s == "f2") return Mapping::f2;
    if (s == "f3") return Mapping::f3;
    throw DomainError("unknown mapping '" + s + "' (expected f1, f2 or f3)");
}

// Dense row-major N x d matrix.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
    FeatureMatrix(std::size_t cols, std::vector<double> data) : cols_(cols), data_(std::move(data)) {
        if (cols_ == 0 || data_.size() % cols_ != 0)
            throw DomainError("FeatureMatrix: data size is not a multiple of the column count");
        rows_ = data_.size() / cols_;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    const std::vector<double>& data() const noexcept { return data_; }

    FeatureMatrix select_rows(std::span<const std::size_t> idx) const {
        FeatureMatrix out(idx.size(), cols_);
        for (std::size_t r = 0; r < idx.size(); ++r)
            std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(idx[r] * cols_), cols_,
                        out.data_.begin() + static_cast<std::ptrdiff_t>(r * cols_));
        return out;
    }

    bool operator==(const FeatureMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Projects the chosen samples of `ds` onto the feature columns in `subset`.
inline FeatureMatrix project(const Dataset& ds, std::span<const std::size_t> idx,
                             std::span<const int> subset) {
    FeatureMatrix out(idx.size(), subset.size());
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < subset.size(); ++c)
            out(r, c) = ds.samples[idx[r]].features[static_cast<std::size_t>(subset[c])];
    return out;
}

inline std::vector<int> labels_of(const Dataset& ds, std::span<const std::size_t> idx) {
    std::vector<int> out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) out[r] = ds.samples[idx[r]].label;
    return out;
}

// Per-column z-score, fitted on training data.
struct ZScore {
    std::vector<double> mean;
    std::vector<double> scale;

    static ZScore fit(const FeatureMatrix& x) {
        ZScore z;
        z.mean.assign(x.cols(), 0.0);
        z.scale.assign(x.cols(), 1.0);
        if (x.rows() == 0) return z;
        const auto n = static_cast<double>(x.rows());
        for (std::size_t c = 0; c < x.cols(); ++c) {
            double m = 0.0;
            for (std::size_t r = 0; r < x.rows(); ++r) m += x(r, c);
            m /= n;
            double v = 0.0;
            for (std::size_t r = 0; r < x.rows(); ++r) v += (x(r, c) - m) * (x(r, c) - m);
            v /= n;
            z.mean[c] = m;
            z.scale[c] = v > 0.0 ? std::sqrt(v) : 1.0;
        }
        return z;
    }

    void apply(std::span<double> row) const {
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mean[c]) / scale[c];
    }

    FeatureMatrix apply(FeatureMatrix x) const {
        for (std::size_t r = 0; r < x.rows(); ++r) apply(x.row(r));
        return x;
    }

    bool operator==(const ZScore&) const = default;
};

struct Neighbor {
    double dist; // squared for euclidean, L1 for manhattan
    std::size_t index;
    int label;

    friend bool operator<(const Neighbor& a, const Neighbor& b) {
        return a.dist < b.dist || (a.dist == b.dist && a.index < b.index);
    }
};

namespace detail {

inline double distance_key(std::span<const double> a, std::span<const double> b, Metric m) {
    double acc = 0.0;
    if (m == Metric::euclidean) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            acc += d * d;
        }
    } else {
        for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    }
    return acc;
}

} // namespace detail

/// The k nearest rows of `train` to `query`, ascending by (distance, index).
inline std::vector<Neighbor> nearest(const FeatureMatrix& train, std::span<const int> labels,
                                     std::span<const double> query, std::size_t k, Metric metric) {
    std::priority_queue<Neighbor> heap; // max-heap on (dist, index)
    for (std::size_t i = 0; i < train.rows(); ++i) {
        const double d = detail::distance_key(train.row(i), query, metric);
        if (heap.size() < k) {
            heap.push({d, i, labels[i]});
        } else if (d < heap.top().dist) {
            heap.pop();
            heap.push({d, i, labels[i]});
        }
    }
    std::vector<Neighbor> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
        out[i] = heap.top();
        heap.pop();
    }
    return out;
}

/// Vote mass per class over the first k entries of a sorted neighbour list.
/// Distance weighting: 1/d, except that zero-distance neighbours take all the mass.
inline ClassMass vote(std::span<const Neighbor> sorted, std::size_t k, Weighting w, Metric m) {
    ClassMass mass{};
    const std::size_t n = std::min(k, sorted.size());
    if (w == Weighting::uniform) {
        for (std::size_t i = 0; i < n; ++i) mass[static_cast<std::size_t>(sorted[i].label)] += 1.0;
        return mass;
    }
    if (n > 0 && sorted[0].dist == 0.0) {
        for (std::size_t i = 0; i < n && sorted[i].dist == 0.0; ++i)
            mass[static_cast<std::size_t>(sorted[i].label)] += 1.0;
        return mass;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double d = m == Metric::euclidean ? std::sqrt(sorted[i].dist) : sorted[i].dist;
        mass[static_cast<std::size_t>(sorted[i].label)] += 1.0 / d;
    }
    return mass;
}

// First class holding the maximum mass.
inline int argmax_class(const ClassMass& mass) {
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c)
        if (mass[static_cast<std::size_t>(c)] > mass[static_cast<std::size_t>(best)]) best = c;
    return best;
}

inline std::array<double, kNumClasses> normalize(const ClassMass& mass) {
    double total = 0.0;
    for (double v : mass) total += v;
    std::array<double, kNumClasses> out{};
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = mass[c] / total;
    return out;
}

class KnnModel {
public:
    KnnModel() = default;

    // `train` columns correspond to `subset` (indices into C1..C4, 0-based).
    KnnModel(FeatureMatrix train, std::vector<int> labels, Hyperparams hp, std::vector<int> subset,
             std::optional<ZScore> scaler = std::nullopt)
        : train_(std::move(train)), labels_(std::move(labels)), hp_(hp), subset_(std::move(subset)),
          scaler_(std::move(scaler)) {
        if (train_.rows() != labels_.size())
            throw DomainError("KnnModel: feature rows and labels differ in length");
        if (train_.rows() > 0 && train_.cols() != subset_.size())
            throw DomainError("KnnModel: feature columns do not match feature_subset");
        for (int l : labels_)
            if (l < 0 || l >= kNumClasses) throw DomainError("KnnModel: label out of range");
        for (int f : subset_)
            if (f < 0 || f >= kNumFeatures) throw DomainError("KnnModel: feature index out of range");
        if (hp_.k < 1) throw DomainError("KnnModel: k must be >= 1");
        if (!labels_.empty() && static_cast<std::size_t>(hp_.k) > labels_.size())
            throw DomainError("KnnModel: k exceeds the number of training samples");
        if (scaler_) train_ = scaler_->apply(std::move(train_));
    }

    /// Fits on the listed samples of `ds`, optionally z-scoring the features.
    static KnnModel fit(const Dataset& ds, std::span<const std::size_t> idx, Mapping mapping,
                        Hyperparams hp, bool standardize = false) {
        const auto subset = cohlab::feature_subset(mapping);
        FeatureMatrix x = project(ds, idx, subset);
        std::optional<ZScore> z;
        if (standardize) z = ZScore::fit(x);
        return KnnModel(std::move(x), labels_of(ds, idx), hp, subset, std::move(z));
    }

    // Training rows already standardized by `z` (used when loading a saved model).
    static KnnModel with_prescaled(FeatureMatrix scaled, std::vector<int> labels, Hyperparams hp,
                                   std::vector<int> subset, ZScore z) {
        if (z.mean.size() != subset.size() || z.scale.size() != subset.size())
            throw DomainError("KnnModel: scaler width does not match feature_subset");
        KnnModel m(std::move(scaled), std::move(labels), hp, std::move(subset));
        m.scaler_ = std::move(z);
        return m;
    }

    bool empty() const noexcept { return labels_.empty(); }
    std::size_t size() const noexcept { return labels_.size(); }
    const Hyperparams& hyperparams() const noexcept { return hp_; }
    const std::vector<int>& feature_subset() const noexcept { return subset_; }
    const FeatureMatrix& train_features() const noexcept { return train_; }
    const std::vector<int>& train_labels() const noexcept { return labels_; }
    const std::optional<ZScore>& scaler() const noexcept { return scaler_; }

    std::vector<Neighbor> neighbors(std::span<const double> x) const {
        check_query(x);
        if (!scaler_) return nearest(train_, labels_, x, static_cast<std::size_t>(hp_.k), hp_.metric);
        std::vector<double> q(x.begin(), x.end());
        scaler_->apply(q);
        return nearest(train_, labels_, q, static_cast<std::size_t>(hp_.k), hp_.metric);
    }

    ClassMass vote_mass(std::span<const double> x) const {
        const auto nb = neighbors(x);
        return vote(nb, nb.size(), hp_.weighting, hp_.metric);
    }

    int predict(std::span<const double> x) const { return argmax_class(vote_mass(x)); }

    std::array<double, kNumClasses> predict_proba(std::span<const double> x) const {
        return normalize(vote_mass(x));
    }

    std::vector<int> predict(const FeatureMatrix& x) const {
        std::vector<int> out(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict(x.row(i));
        return out;
    }

    bool operator==(const KnnModel&) const = default;

private:
    void check_query(std::span<const double> x) const {
        if (empty()) throw StateError("KnnModel: no training data");
        if (x.size() != subset_.size())
            throw DomainError("KnnModel: query has " + std::to_string(x.size()) +
                              " features, model expects " + std::to_string(subset_.size()));
    }

    FeatureMatrix train_;
    std::vector<int> labels_;
    Hyperparams hp_;
    std::vector<int> subset_;
    std::optional<ZScore> scaler_;
};

inline constexpr const char* kKnnSchema = "cohlab.knn/1";

inline nlohmann::json model_to_json(const KnnModel& m) {
    nlohmann::json j;
    j["schema"] = kKnnSchema;
    j["hyperparams"] = m.hyperparams();
    nlohmann::json subset = nlohmann::json::array();
    for (int f : m.feature_subset()) subset.push_back(f + 1); // C^(i) numbering
    j["feature_subset"] = subset;
    if (m.scaler()) j["zscore"] = {{"mean", m.scaler()->mean}, {"scale", m.scaler()->scale}};
    j["labels"] = m.train_labels();
    nlohmann::json rows = nlohmann::json::array();
    const auto& x = m.train_features();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto r = x.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    j["features"] = std::move(rows);
    return j;
}

inline KnnModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema").get<std::string>() != kKnnSchema)
            throw DomainError("model: unsupported schema '" + j.at("schema").get<std::string>() + "'");
        const auto hp = j.at("hyperparams").get<Hyperparams>();
        std::vector<int> subset;
        for (int f : j.at("feature_subset").get<std::vector<int>>()) subset.push_back(f - 1);
        auto labels = j.at("labels").get<std::vector<int>>();
        std::vector<double> data;
        for (const auto& row : j.at("features")) {
            const auto r = row.get<std::vector<double>>();
            if (r.size() != subset.size()) throw DomainError("model: feature row width mismatch");
            data.insert(data.end(), r.begin(), r.end());
        }
        FeatureMatrix x = labels.empty() ? FeatureMatrix(0, subset.size())
                                         : FeatureMatrix(subset.size(), std::move(data));
        if (j.contains("zscore")) {
            // Stored features are already scaled.
            ZScore z{j["zscore"].at("mean").get<std::vector<double>>(),
                     j["zscore"].at("scale").get<std::vector<double>>()};
            return KnnModel::with_prescaled(std::move(x), std::move(labels), hp, std::move(subset),
                                            std::move(z));
        }
        return KnnModel(std::move(x), std::move(labels), hp, std::move(subset));
    } catch (const nlohmann::json::exception& e) {
        throw DomainError(std::string("model: malformed JSON: ") + e.what());
    }
}

/// Percentage of exact label matches.
inline double single_shot_accuracy(std::span<const int> predicted, std::span<const int> labels) {
    if (predicted.size() != labels.size())
        throw DomainError("single_shot_accuracy: predictions and labels differ in length");
    if (labels.empty()) throw DomainError("single_shot_accuracy: empty evaluation set");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
    return 100.0 * static_cast<double>(hits) / static_cast<double>(labels.size());
}

inline double single_shot_accuracy(const KnnModel& model, const FeatureMatrix& x,
                                   std::span<const int> labels) {
    if (x.rows() != labels.size())
        throw DomainError("single_shot_accuracy: features and labels differ in length");
    const auto pred = model.predict(x);
    return single_shot_accuracy(pred, labels);
}

// Shuffled, contiguous folds: fold f owns order[start_f, end_f).
struct FoldPlan {
    std::vector<std::size_t> order;
    std::vector<std::size_t> bounds; // folds + 1 entries

    static FoldPlan make(std::size_t n, int folds, std::uint64_t seed) {
        if (folds < 2) throw DomainError("kfold: folds must be >= 2");
        if (n < static_cast<std::size_t>(folds)) throw DomainError("kfold: a fold would be empty");
        FoldPlan p;
        p.order.resize(n);
        for (std::size_t i = 0; i < n; ++i) p.order[i] = i;
        Rng rng(seed, stream::folds, 0);
        shuffle(p.order.begin(), p.order.end(), rng);
        const auto f = static_cast<std::size_t>(folds);
        p.bounds.push_back(0);
        for (std::size_t i = 0; i < f; ++i) p.bounds.push_back(p.bounds.back() + n / f + (i < n % f ? 1 : 0));
        return p;
    }

    int folds() const { return static_cast<int>(bounds.size()) - 1; }

    std::vector<std::size_t> held_out(int f) const {
        return {order.begin() + static_cast<std::ptrdiff_t>(bounds[f]),
                order.begin() + static_cast<std::ptrdiff_t>(bounds[f + 1])};
    }

    std::vector<std::size_t> training(int f) const {
        std::vector<std::size_t> out;
        out.reserve(order.size() - (bounds[f + 1] - bounds[f]));
        out.insert(out.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(bounds[f]));
        out.insert(out.end(), order.begin() + static_cast<std::ptrdiff_t>(bounds[f + 1]), order.end());
        return out;
    }
};

// Sorted neighbour lists of every held-out point, per fold and metric, so
// that many (k, weighting) candidates can be scored from one scan.
class FoldNeighborCache {
public:
    FoldNeighborCache(const FeatureMatrix& x, std::span<const int> labels, const FoldPlan& plan,
                      std::size_t max_k, std::span<const Metric> metrics)
        : plan_(plan), labels_(labels.begin(), labels.end()) {
        for (Metric m : metrics) {
            auto& per_fold = lists_[static_cast<std::size_t>(m)];
            per_fold.resize(static_cast<std::size_t>(plan.folds()));
            for (int f = 0; f < plan.folds(); ++f) {
                const auto tr = plan.training(f);
                if (max_k > tr.size())
                    throw DomainError("kfold: k exceeds the training size of a fold");
                const FeatureMatrix xt = x.select_rows(tr);
                std::vector<int> yt(tr.size());
                for (std::size_t i = 0; i < tr.size(); ++i) yt[i] = labels_[tr[i]];
                for (std::size_t q : plan.held_out(f))
                    per_fold[static_cast<std::size_t>(f)].push_back(nearest(xt, yt, x.row(q), max_k, m));
            }
        }
    }

    // Accuracy of each fold for one candidate.
    std::vector<double> fold_accuracies(const Hyperparams& hp) const {
        const auto& per_fold = lists_[static_cast<std::size_t>(hp.metric)];
        if (per_fold.empty()) throw DomainError("kfold: metric not cached");
        std::vector<double> out;
        for (int f = 0; f < plan_.folds(); ++f) {
            const auto held = plan_.held_out(f);
            const auto& lists = per_fold[static_cast<std::size_t>(f)];
            std::size_t hits = 0;
            for (std::size_t i = 0; i < held.size(); ++i) {
                const auto mass = vote(lists[i], static_cast<std::size_t>(hp.k), hp.weighting, hp.metric);
                hits += argmax_class(mass) == labels_[held[i]];
            }
            out.push_back(100.0 * static_cast<double>(hits) / static_cast<double>(held.size()));
        }
        return out;
    }

    double mean_accuracy(const Hyperparams& hp) const {
        const auto acc = fold_accuracies(hp);
        double s = 0.0;
        for (double a : acc) s += a;
        return s / static_cast<double>(acc.size());
    }

private:
    const FoldPlan& plan_;
    std::vector<int> labels_;
    std::array<std::vector<std::vector<std::vector<Neighbor>>>, 2> lists_;
};

/// Mean single-shot accuracy over `folds` seeded-shuffled contiguous folds.
inline double kfold_accuracy(const FeatureMatrix& x, std::span<const int> labels, const Hyperparams& hp,
                             int folds = 5, std::uint64_t seed = 0) {
    if (x.rows() != labels.size()) throw DomainError("kfold: features and labels differ in length");
    if (hp.k < 1) throw DomainError("kfold: k must be >= 1");
    const FoldPlan plan = FoldPlan::make(x.rows(), folds, seed);
    const Metric metric[] = {hp.metric};
    const FoldNeighborCache cache(x, labels, plan, static_cast<std::size_t>(hp.k), metric);
    return cache.mean_accuracy(hp);
}

struct SearchTrial {
    Hyperparams hp;
    double score;
};

struct SearchResult {
    Hyperparams best;
    double best_score = 0.0;
    std::vector<SearchTrial> trials; // in sampling order
};

/// Scores n_iter combinations drawn without replacement from `space` by
/// k-fold accuracy and returns the best, ties broken by canonical_less.
inline SearchResult random_search(const FeatureMatrix& x, std::span<const int> labels,
                                  const HyperSpace& space, std::size_t n_iter, std::uint64_t seed,
                                  int folds = 5) {
    if (n_iter < 1) throw DomainError("random_search: n_iter must be >= 1");
    if (space.size() == 0) throw DomainError("random_search: empty hyperparameter space");
    if (x.rows() != labels.size())
        throw DomainError("random_search: features and labels differ in length");
    auto combos = space.enumerate();
    if (n_iter > combos.size()) {
        std::clog << "random_search: n_iter " << n_iter << " exceeds space size " << combos.size()
                  << "; clipped\n";
        n_iter = combos.size();
    }
    Rng rng(seed, stream::search, 0);
    shuffle(combos.begin(), combos.end(), rng);
    combos.resize(n_iter);

    std::size_t max_k = 0;
    std::vector<Metric> metrics;
    for (const auto& c : combos) {
        if (c.k < 1) throw DomainError("random_search: k must be >= 1");
        max_k = std::max(max_k, static_cast<std::size_t>(c.k));
        if (std::find(metrics.begin(), metrics.end(), c.metric) == metrics.end()) metrics.push_back(c.metric);
    }
    const FoldPlan plan = FoldPlan::make(x.rows(), folds, seed);
    const FoldNeighborCache cache(x, labels, plan, max_k, metrics);

    SearchResult out;
    bool have = false;
    for (const auto& c : combos) {
        const double s = cache.mean_accuracy(c);
        out.trials.push_back({c, s});
        if (!have || s > out.best_score || (s == out.best_score && canonical_less(c, out.best))) {
            out.best = c;
            out.best_score = s;
            have = true;
        }
    }
    return out;
}

} // namespace cohlab
