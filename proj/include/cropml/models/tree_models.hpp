#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cropml/models/tree.hpp"

namespace cropml {

// --- single decision tree --------------------------------------------------

class TreeModel : public Model {
public:
    DecisionTree tree;
    nlohmann::json hyper;

    std::string family() const override { return "decision_tree"; }
    int class_count() const override { return tree.class_count; }
    Matrix predict_proba(const Matrix& X) const override { return tree.predict_proba(X); }

    nlohmann::json to_json() const override {
        return {{"family", family()}, {"hyperparams", hyper}, {"tree", tree_to_json(tree)}};
    }
};

inline ModelPtr fit_tree(const Dataset& train, const nlohmann::json& params) {
    train.validate();
    TreeConfig cfg;
    cfg.max_depth = detail::iparam(params, "max_depth", 32);
    cfg.min_leaf = detail::iparam(params, "min_leaf", 1);
    cfg.criterion = detail::sparam(params, "criterion", "gini");
    cfg.seed = static_cast<std::uint64_t>(detail::iparam(params, "seed", 0));
    auto m = std::make_shared<TreeModel>();
    m->tree = build_classification_tree(train.features, train.labels, train.class_count(), cfg);
    m->hyper = {{"max_depth", cfg.max_depth},
                {"min_leaf", cfg.min_leaf},
                {"criterion", cfg.criterion},
                {"seed", cfg.seed}};
    return m;
}

inline ModelPtr tree_model_from_json(const nlohmann::json& j) {
    auto m = std::make_shared<TreeModel>();
    m->tree = tree_from_json(j.at("tree"));
    m->hyper = j.at("hyperparams");
    return m;
}

// --- random forest / extra trees -------------------------------------------

class ForestModel : public Model {
public:
    std::vector<DecisionTree> trees;
    std::string mode = "random_forest";  // or extra_trees
    nlohmann::json hyper;
    int K = 0;

    std::string family() const override { return mode; }
    int class_count() const override { return K; }

    Matrix predict_proba(const Matrix& X) const override {
        Matrix out = Matrix::Zero(X.rows(), K);
        for (const auto& t : trees) out += t.predict_proba(X);
        return out / static_cast<double>(trees.size());
    }

    nlohmann::json to_json() const override {
        nlohmann::json ts = nlohmann::json::array();
        for (const auto& t : trees) ts.push_back(tree_to_json(t));
        return {{"family", mode}, {"hyperparams", hyper}, {"class_count", K}, {"trees", ts}};
    }
};

// mode "random_forest": bootstrap + best split over max_features random
// features; mode "extra_trees": full sample + uniformly random thresholds.
inline ModelPtr fit_forest(const Dataset& train, const nlohmann::json& params,
                           const std::string& mode) {
    train.validate();
    int n_trees = detail::iparam(params, "n_trees", 100);
    if (n_trees < 1) throw InvalidSpec("forest: n_trees >= 1");
    int d = train.dim();
    int default_mf = std::max(1, static_cast<int>(std::round(std::sqrt(static_cast<double>(d)))));
    TreeConfig cfg;
    cfg.max_depth = detail::iparam(params, "max_depth", 32);
    cfg.min_leaf = detail::iparam(params, "min_leaf", 1);
    cfg.criterion = detail::sparam(params, "criterion", "gini");
    cfg.max_features = detail::iparam(params, "max_features", default_mf);
    cfg.random_thresholds = (mode == "extra_trees");
    bool bootstrap = params.contains("bootstrap") ? params.at("bootstrap").get<bool>()
                                                  : (mode == "random_forest");
    auto seed = static_cast<std::uint64_t>(detail::iparam(params, "seed", 0));

    auto m = std::make_shared<ForestModel>();
    m->mode = mode;
    m->K = train.class_count();
    m->hyper = {{"n_trees", n_trees},        {"max_depth", cfg.max_depth},
                {"min_leaf", cfg.min_leaf},  {"criterion", cfg.criterion},
                {"max_features", cfg.max_features}, {"bootstrap", bootstrap},
                {"seed", seed}};

    auto n = train.size();
    for (int t = 0; t < n_trees; ++t) {
        TreeConfig tcfg = cfg;
        tcfg.seed = derive_seed(seed, 0xf0e0 + static_cast<std::uint64_t>(t));
        if (bootstrap) {
            Rng rng(derive_seed(seed, 0xb007 + static_cast<std::uint64_t>(t)));
            Matrix Xb(static_cast<Eigen::Index>(n), train.features.cols());
            std::vector<int> yb(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t j = rng.next_index(n);
                Xb.row(static_cast<Eigen::Index>(i)) =
                    train.features.row(static_cast<Eigen::Index>(j));
                yb[i] = train.labels[j];
            }
            m->trees.push_back(build_classification_tree(Xb, yb, m->K, tcfg));
        } else {
            m->trees.push_back(
                build_classification_tree(train.features, train.labels, m->K, tcfg));
        }
    }
    return m;
}

inline ModelPtr forest_from_json(const nlohmann::json& j) {
    auto m = std::make_shared<ForestModel>();
    m->mode = j.at("family").get<std::string>();
    m->K = j.at("class_count").get<int>();
    m->hyper = j.at("hyperparams");
    for (const auto& t : j.at("trees")) m->trees.push_back(tree_from_json(t));
    return m;
}

// --- gradient boosting ------------------------------------------------------

// K parallel stages of regression trees fit to the softmax cross-entropy
// gradient, with shrinkage, L2 leaf penalty and optional row subsampling.
class GradientBoostingModel : public Model {
public:
    Vector base_score;                          // log class priors
    std::vector<std::vector<DecisionTree>> rounds;  // rounds x K trees
    double learning_rate = 0.1;
    nlohmann::json hyper;

    std::string family() const override { return "gradient_boosting"; }
    int class_count() const override { return static_cast<int>(base_score.size()); }

    Matrix raw_scores(const Matrix& X) const {
        int K = class_count();
        Matrix scores = base_score.transpose().replicate(X.rows(), 1);
        for (const auto& round : rounds)
            for (int k = 0; k < K; ++k) scores.col(k) += learning_rate * round[static_cast<std::size_t>(k)].predict_value(X);
        return scores;
    }

    Matrix predict_proba(const Matrix& X) const override { return softmax_rows(raw_scores(X)); }

    nlohmann::json to_json() const override {
        nlohmann::json rs = nlohmann::json::array();
        for (const auto& round : rounds) {
            nlohmann::json ks = nlohmann::json::array();
            for (const auto& t : round) ks.push_back(tree_to_json(t));
            rs.push_back(std::move(ks));
        }
        return {{"family", family()},
                {"hyperparams", hyper},
                {"base_score", vector_to_json(base_score)},
                {"learning_rate", learning_rate},
                {"rounds", rs}};
    }
};

inline ModelPtr fit_gradient_boosting(const Dataset& train, const nlohmann::json& params) {
    train.validate();
    int K = train.class_count();
    int n_rounds = detail::iparam(params, "n_rounds", 100);
    double lr = detail::param(params, "learning_rate", 0.1);
    int max_depth = detail::iparam(params, "max_depth", 3);
    double l2_leaf = detail::param(params, "l2_leaf", 1.0);
    double subsample = detail::param(params, "subsample", 1.0);
    auto seed = static_cast<std::uint64_t>(detail::iparam(params, "seed", 0));

    auto m = std::make_shared<GradientBoostingModel>();
    m->learning_rate = lr;
    m->hyper = {{"n_rounds", n_rounds}, {"learning_rate", lr},   {"max_depth", max_depth},
                {"l2_leaf", l2_leaf},   {"subsample", subsample}, {"seed", seed}};

    auto n = static_cast<Eigen::Index>(train.size());
    m->base_score = Vector::Zero(K);
    auto counts = train.class_counts();
    for (int k = 0; k < K; ++k)
        m->base_score(k) = std::log(std::max(
            static_cast<double>(counts[static_cast<std::size_t>(k)]) / static_cast<double>(n),
            1e-12));

    Matrix scores = m->base_score.transpose().replicate(n, 1);
    TreeConfig tcfg;
    tcfg.max_depth = max_depth;
    tcfg.min_leaf = 1;
    tcfg.l2_leaf = l2_leaf;

    for (int round = 0; round < n_rounds; ++round) {
        Matrix P = softmax_rows(scores);
        check_finite(P, "boosting probabilities");

        std::vector<std::size_t> rows(static_cast<std::size_t>(n));
        std::iota(rows.begin(), rows.end(), 0);
        if (subsample < 1.0) {
            Rng rng(derive_seed(seed, 0x5ab5 + static_cast<std::uint64_t>(round)));
            rng.shuffle(rows);
            rows.resize(std::max<std::size_t>(
                1, static_cast<std::size_t>(subsample * static_cast<double>(n))));
            std::sort(rows.begin(), rows.end());
        }
        Matrix Xs(static_cast<Eigen::Index>(rows.size()), train.features.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            Xs.row(static_cast<Eigen::Index>(i)) =
                train.features.row(static_cast<Eigen::Index>(rows[i]));

        std::vector<DecisionTree> stage;
        for (int k = 0; k < K; ++k) {
            Vector grad(static_cast<Eigen::Index>(rows.size()));
            Vector hess(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                auto r = static_cast<Eigen::Index>(rows[i]);
                double p = P(r, k);
                double y = (train.labels[rows[i]] == k) ? 1.0 : 0.0;
                grad(static_cast<Eigen::Index>(i)) = p - y;
                hess(static_cast<Eigen::Index>(i)) = std::max(p * (1.0 - p), 1e-16);
            }
            TreeConfig cfgk = tcfg;
            cfgk.seed = derive_seed(seed, 0x6b00 + static_cast<std::uint64_t>(round) * 64 +
                                              static_cast<std::uint64_t>(k));
            stage.push_back(build_regression_tree(Xs, grad, hess, cfgk));
            scores.col(k) += lr * stage.back().predict_value(train.features);
        }
        m->rounds.push_back(std::move(stage));
    }
    return m;
}

inline ModelPtr gbm_from_json(const nlohmann::json& j) {
    auto m = std::make_shared<GradientBoostingModel>();
    m->base_score = vector_from_json(j.at("base_score"));
    m->learning_rate = j.at("learning_rate").get<double>();
    m->hyper = j.at("hyperparams");
    for (const auto& round : j.at("rounds")) {
        std::vector<DecisionTree> ks;
        for (const auto& t : round) ks.push_back(tree_from_json(t));
        m->rounds.push_back(std::move(ks));
    }
    return m;
}

// --- AdaBoost (SAMME) -------------------------------------------------------

class AdaBoostModel : public Model {
public:
    std::vector<DecisionTree> stumps;
    std::vector<double> alphas;
    int K = 0;
    nlohmann::json hyper;

    std::string family() const override { return "adaboost"; }
    int class_count() const override { return K; }

    Matrix predict_proba(const Matrix& X) const override {
        Matrix votes = Matrix::Zero(X.rows(), K);
        double total = 0;
        for (std::size_t s = 0; s < stumps.size(); ++s) {
            Matrix P = stumps[s].predict_proba(X);
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                Eigen::Index arg = 0;
                P.row(i).maxCoeff(&arg);
                votes(i, arg) += alphas[s];
            }
            total += alphas[s];
        }
        if (total <= 0) return Matrix::Constant(X.rows(), K, 1.0 / K);
        return votes / total;
    }

    nlohmann::json to_json() const override {
        nlohmann::json ts = nlohmann::json::array();
        for (const auto& t : stumps) ts.push_back(tree_to_json(t));
        return {{"family", family()},
                {"hyperparams", hyper},
                {"class_count", K},
                {"alphas", alphas},
                {"trees", ts}};
    }
};

// SAMME: alpha = ln((1-err)/err) + ln(K-1). A round with err >= 1-1/K is
// retried once on a weight-resampled bootstrap; a second failure stops
// training.
inline ModelPtr fit_adaboost(const Dataset& train, const nlohmann::json& params) {
    train.validate();
    int K = train.class_count();
    int n_rounds = detail::iparam(params, "n_rounds", 50);
    int stump_depth = detail::iparam(params, "stump_depth", 1);
    auto seed = static_cast<std::uint64_t>(detail::iparam(params, "seed", 0));
    if (n_rounds < 1) throw InvalidSpec("adaboost: n_rounds >= 1");

    auto m = std::make_shared<AdaBoostModel>();
    m->K = K;
    m->hyper = {{"n_rounds", n_rounds}, {"stump_depth", stump_depth}, {"seed", seed}};

    auto n = train.size();
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    TreeConfig cfg;
    cfg.max_depth = stump_depth;
    cfg.criterion = "gini";

    double chance_err = 1.0 - 1.0 / static_cast<double>(K);
    for (int round = 0; round < n_rounds; ++round) {
        DecisionTree stump =
            build_classification_tree(train.features, train.labels, K, cfg, w);
        auto pred = [&](const DecisionTree& t) {
            Matrix P = t.predict_proba(train.features);
            std::vector<int> p(n);
            for (std::size_t i = 0; i < n; ++i) {
                Eigen::Index arg = 0;
                P.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
                p[i] = static_cast<int>(arg);
            }
            return p;
        };
        auto yp = pred(stump);
        double err = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (yp[i] != train.labels[i]) err += w[i];

        if (err >= chance_err) {
            // one weighted-bootstrap retry
            Rng rng(derive_seed(seed, 0xada0 + static_cast<std::uint64_t>(round)));
            std::vector<double> cum(n);
            double acc = 0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += w[i];
                cum[i] = acc;
            }
            Matrix Xb(static_cast<Eigen::Index>(n), train.features.cols());
            std::vector<int> yb(n);
            for (std::size_t i = 0; i < n; ++i) {
                double u = rng.next_double() * acc;
                auto it = std::lower_bound(cum.begin(), cum.end(), u);
                auto j = static_cast<std::size_t>(it - cum.begin());
                Xb.row(static_cast<Eigen::Index>(i)) =
                    train.features.row(static_cast<Eigen::Index>(j));
                yb[i] = train.labels[j];
            }
            stump = build_classification_tree(Xb, yb, K, cfg);
            yp = pred(stump);
            err = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (yp[i] != train.labels[i]) err += w[i];
            if (err >= chance_err) {
                if (m->stumps.empty()) throw WeakLearnerFailure("adaboost: first learner at chance");
                break;
            }
        }

        double alpha;
        if (err < 1e-10) {
            alpha = std::log(1e10) + std::log(static_cast<double>(K - 1));
            m->stumps.push_back(std::move(stump));
            m->alphas.push_back(alpha);
            break;  // perfect learner dominates
        }
        alpha = std::log((1.0 - err) / err) + std::log(static_cast<double>(K - 1));
        m->stumps.push_back(std::move(stump));
        m->alphas.push_back(alpha);

        double wsum = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (yp[i] != train.labels[i]) w[i] *= std::exp(alpha);
            wsum += w[i];
        }
        for (auto& wi : w) wi /= wsum;
    }
    return m;
}

inline ModelPtr adaboost_from_json(const nlohmann::json& j) {
    auto m = std::make_shared<AdaBoostModel>();
    m->K = j.at("class_count").get<int>();
    m->hyper = j.at("hyperparams");
    m->alphas = j.at("alphas").get<std::vector<double>>();
    for (const auto& t : j.at("trees")) m->stumps.push_back(tree_from_json(t));
    return m;
}

namespace detail {
inline const ModelRegistrar tree_reg("decision_tree", fit_tree, tree_model_from_json);
inline const ModelRegistrar rf_reg(
    "random_forest",
    [](const Dataset& d, const nlohmann::json& p) { return fit_forest(d, p, "random_forest"); },
    forest_from_json);
inline const ModelRegistrar et_reg(
    "extra_trees",
    [](const Dataset& d, const nlohmann::json& p) { return fit_forest(d, p, "extra_trees"); },
    forest_from_json);
inline const ModelRegistrar gbm_reg("gradient_boosting", fit_gradient_boosting, gbm_from_json);
inline const ModelRegistrar ada_reg("adaboost", fit_adaboost, adaboost_from_json);
}  // namespace detail

}  // namespace cropml
