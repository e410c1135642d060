#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "cropml/model.hpp"

namespace cropml {

// One binary axis-aligned tree shared by every tree-based family.
// Classification trees carry class-frequency leaves; regression trees carry
// a single shrinkage-ready value.

struct TreeNode {
    int feature = -1;        // -1 marks a leaf
    double threshold = 0.0;  // go left iff x[feature] <= threshold
    int left = -1, right = -1;
    Vector leaf;  // class distribution (classification) or 1-vector (regression)
};

struct TreeConfig {
    int max_depth = 32;
    int min_leaf = 1;
    std::string criterion = "gini";  // gini | entropy | mse
    int max_features = 0;            // 0 = all features
    bool random_thresholds = false;  // extra-trees style splits
    double l2_leaf = 0.0;            // regression leaf shrinkage denominator
    std::uint64_t seed = 0;
};

namespace tree_detail {

inline double impurity(const Vector& class_w, double total, const std::string& criterion) {
    if (total <= 0) return 0.0;
    double imp = 0.0;
    if (criterion == "gini") {
        imp = 1.0;
        for (Eigen::Index k = 0; k < class_w.size(); ++k) {
            double p = class_w(k) / total;
            imp -= p * p;
        }
    } else {  // entropy, bits
        for (Eigen::Index k = 0; k < class_w.size(); ++k) {
            double p = class_w(k) / total;
            if (p > 0) imp -= p * std::log2(p);
        }
    }
    return imp;
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = std::numeric_limits<double>::infinity();
    bool found() const { return feature >= 0; }
};

}  // namespace tree_detail

class DecisionTree {
public:
    std::vector<TreeNode> nodes;
    int class_count = 0;  // 0 for regression trees

    bool is_classifier() const { return class_count > 0; }

    const Vector& leaf_for(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        int n = 0;
        while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
            const TreeNode& nd = nodes[static_cast<std::size_t>(n)];
            n = (x(nd.feature) <= nd.threshold) ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(n)].leaf;
    }

    Matrix predict_proba(const Matrix& X) const {
        Matrix out(X.rows(), class_count);
        for (Eigen::Index r = 0; r < X.rows(); ++r) out.row(r) = leaf_for(X.row(r)).transpose();
        return out;
    }

    Vector predict_value(const Matrix& X) const {
        Vector out(X.rows());
        for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = leaf_for(X.row(r))(0);
        return out;
    }
};

namespace tree_detail {

class Builder {
public:
    Builder(const Matrix& X, const TreeConfig& cfg) : X_(X), cfg_(cfg), rng_(cfg.seed) {}

    // classification: labels + optional sample weights
    DecisionTree build_classifier(const std::vector<int>& labels, int K,
                                  const std::vector<double>& weights) {
        labels_ = &labels;
        K_ = K;
        weights_ = weights;
        DecisionTree tree;
        tree.class_count = K;
        std::vector<std::size_t> idx(static_cast<std::size_t>(X_.rows()));
        std::iota(idx.begin(), idx.end(), 0);
        grow(tree, idx, 0);
        return tree;
    }

    // regression: gradients g and hessians h; leaf value = -sum g / (sum h + l2)
    DecisionTree build_regressor(const Vector& grad, const Vector& hess) {
        grad_ = &grad;
        hess_ = &hess;
        DecisionTree tree;
        tree.class_count = 0;
        std::vector<std::size_t> idx(static_cast<std::size_t>(X_.rows()));
        std::iota(idx.begin(), idx.end(), 0);
        grow(tree, idx, 0);
        return tree;
    }

private:
    bool regression() const { return grad_ != nullptr; }

    Vector make_leaf(const std::vector<std::size_t>& idx) const {
        if (regression()) {
            double g = 0, h = 0;
            for (std::size_t i : idx) {
                g += (*grad_)(static_cast<Eigen::Index>(i));
                h += (*hess_)(static_cast<Eigen::Index>(i));
            }
            Vector v(1);
            v(0) = -g / (h + cfg_.l2_leaf + 1e-16);
            return v;
        }
        Vector counts = Vector::Zero(K_);
        double total = 0;
        for (std::size_t i : idx) {
            double w = weights_.empty() ? 1.0 : weights_[i];
            counts((*labels_)[i]) += w;
            total += w;
        }
        if (total > 0) counts /= total;
        return counts;
    }

    double node_score(const std::vector<std::size_t>& idx) const {
        if (regression()) {
            // variance criterion on the pseudo-targets -g/h is equivalent to
            // minimizing squared error of -g with unit weight; we use the
            // gradient-statistics gain directly.
            double g = 0, h = 0;
            for (std::size_t i : idx) {
                g += (*grad_)(static_cast<Eigen::Index>(i));
                h += (*hess_)(static_cast<Eigen::Index>(i));
            }
            return -g * g / (h + cfg_.l2_leaf + 1e-16);
        }
        Vector counts = Vector::Zero(K_);
        double total = 0;
        for (std::size_t i : idx) {
            double w = weights_.empty() ? 1.0 : weights_[i];
            counts((*labels_)[i]) += w;
            total += w;
        }
        return impurity(counts, total, cfg_.criterion) * total;
    }

    bool pure(const std::vector<std::size_t>& idx) const {
        if (regression()) return false;
        int first = (*labels_)[idx[0]];
        for (std::size_t i : idx)
            if ((*labels_)[i] != first) return false;
        return true;
    }

    std::vector<int> candidate_features() {
        int d = static_cast<int>(X_.cols());
        std::vector<int> feats(static_cast<std::size_t>(d));
        std::iota(feats.begin(), feats.end(), 0);
        if (cfg_.max_features > 0 && cfg_.max_features < d) {
            rng_.shuffle(feats);
            feats.resize(static_cast<std::size_t>(cfg_.max_features));
            std::sort(feats.begin(), feats.end());
        }
        return feats;
    }

    Split best_split(const std::vector<std::size_t>& idx) {
        Split best;
        auto feats = candidate_features();
        for (int f : feats) {
            if (cfg_.random_thresholds) {
                double lo = std::numeric_limits<double>::infinity();
                double hi = -lo;
                for (std::size_t i : idx) {
                    lo = std::min(lo, X_(static_cast<Eigen::Index>(i), f));
                    hi = std::max(hi, X_(static_cast<Eigen::Index>(i), f));
                }
                if (hi <= lo) continue;
                double thr = lo + rng_.next_double() * (hi - lo);
                consider(best, idx, f, thr);
            } else {
                std::vector<double> vals;
                vals.reserve(idx.size());
                for (std::size_t i : idx) vals.push_back(X_(static_cast<Eigen::Index>(i), f));
                std::sort(vals.begin(), vals.end());
                vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
                for (std::size_t v = 0; v + 1 < vals.size(); ++v)
                    consider(best, idx, f, 0.5 * (vals[v] + vals[v + 1]));
            }
        }
        return best;
    }

    void consider(Split& best, const std::vector<std::size_t>& idx, int f, double thr) {
        std::vector<std::size_t> left, right;
        for (std::size_t i : idx) {
            (X_(static_cast<Eigen::Index>(i), f) <= thr ? left : right).push_back(i);
        }
        if (static_cast<int>(left.size()) < cfg_.min_leaf ||
            static_cast<int>(right.size()) < cfg_.min_leaf)
            return;
        double score = node_score(left) + node_score(right);
        // ties resolve to lowest feature index, then lowest threshold,
        // which plain strict-less comparison preserves in scan order
        if (score < best.score - 1e-12) {
            best = {f, thr, score};
        }
    }

    int grow(DecisionTree& tree, const std::vector<std::size_t>& idx, int depth) {
        int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        bool leaf = depth >= cfg_.max_depth ||
                    static_cast<int>(idx.size()) < 2 * cfg_.min_leaf || pure(idx);
        tree_detail::Split split;
        if (!leaf) {
            split = best_split(idx);
            leaf = !split.found();
        }
        if (leaf) {
            tree.nodes[static_cast<std::size_t>(id)].leaf = make_leaf(idx);
            return id;
        }

        std::vector<std::size_t> li, ri;
        for (std::size_t i : idx)
            (X_(static_cast<Eigen::Index>(i), split.feature) <= split.threshold ? li : ri)
                .push_back(i);
        int l = grow(tree, li, depth + 1);
        int r = grow(tree, ri, depth + 1);
        TreeNode& nd = tree.nodes[static_cast<std::size_t>(id)];
        nd.feature = split.feature;
        nd.threshold = split.threshold;
        nd.left = l;
        nd.right = r;
        return id;
    }

    const Matrix& X_;
    TreeConfig cfg_;
    Rng rng_;
    const std::vector<int>* labels_ = nullptr;
    int K_ = 0;
    std::vector<double> weights_;
    const Vector* grad_ = nullptr;
    const Vector* hess_ = nullptr;
};

}  // namespace tree_detail

inline DecisionTree build_classification_tree(const Matrix& X, const std::vector<int>& labels,
                                              int K, const TreeConfig& cfg,
                                              const std::vector<double>& weights = {}) {
    if (X.rows() < 2 * cfg.min_leaf) throw TooFewRows("tree needs >= 2*min_leaf rows");
    bool any_varying = false;
    for (Eigen::Index c = 0; c < X.cols() && !any_varying; ++c)
        if (X.col(c).maxCoeff() > X.col(c).minCoeff()) any_varying = true;
    bool mixed_labels =
        std::adjacent_find(labels.begin(), labels.end(), std::not_equal_to<>()) != labels.end();
    if (!any_varying && mixed_labels)
        throw DegenerateData("all features constant with mixed labels");
    tree_detail::Builder b(X, cfg);
    return b.build_classifier(labels, K, weights);
}

inline DecisionTree build_regression_tree(const Matrix& X, const Vector& grad, const Vector& hess,
                                          const TreeConfig& cfg) {
    tree_detail::Builder b(X, cfg);
    return b.build_regressor(grad, hess);
}

// JSON persistence (nested node records, bit-exact via shortest round-trip
// double formatting).
inline nlohmann::json tree_to_json(const DecisionTree& t) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : t.nodes) {
        nlohmann::json n;
        n["feature"] = nd.feature;
        n["threshold"] = nd.threshold;
        n["left"] = nd.left;
        n["right"] = nd.right;
        if (nd.feature < 0) n["leaf"] = vector_to_json(nd.leaf);
        nodes.push_back(std::move(n));
    }
    return {{"class_count", t.class_count}, {"nodes", nodes}};
}

inline DecisionTree tree_from_json(const nlohmann::json& j) {
    DecisionTree t;
    t.class_count = j.at("class_count").get<int>();
    for (const auto& n : j.at("nodes")) {
        TreeNode nd;
        nd.feature = n.at("feature").get<int>();
        nd.threshold = n.at("threshold").get<double>();
        nd.left = n.at("left").get<int>();
        nd.right = n.at("right").get<int>();
        if (nd.feature < 0) nd.leaf = vector_from_json(n.at("leaf"));
        t.nodes.push_back(std::move(nd));
    }
    return t;
}

}  // namespace cropml
