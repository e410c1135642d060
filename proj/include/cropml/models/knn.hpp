#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "cropml/model.hpp"

namespace cropml {

inline double knn_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                           const Eigen::Ref<const Eigen::RowVectorXd>& b,
                           const std::string& metric) {
    if (metric == "manhattan") return (a - b).cwiseAbs().sum();
    return (a - b).norm();
}

// Vote of the k nearest stored points; distance ties break to the lowest
// training index.
inline Vector knn_predict_proba_row(const Matrix& train_X, const std::vector<int>& train_y, int K,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& query, int k,
                                    const std::string& metric) {
    auto n = static_cast<std::size_t>(train_X.rows());
    if (k <= 0 || static_cast<std::size_t>(k) > n) throw KTooLarge("knn: k > n_train");

    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i)
        dist[i] = {knn_distance(train_X.row(static_cast<Eigen::Index>(i)), query, metric), i};
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

    Vector probs = Vector::Zero(K);
    for (int i = 0; i < k; ++i) probs(train_y[dist[static_cast<std::size_t>(i)].second]) += 1.0;
    return probs / static_cast<double>(k);
}

class KnnModel : public Model {
public:
    Matrix train_X;
    std::vector<int> train_y;
    int K = 0;
    int k = 5;
    std::string metric = "euclidean";

    std::string family() const override { return "knn"; }
    int class_count() const override { return K; }

    Matrix predict_proba(const Matrix& X) const override {
        if (X.cols() != train_X.cols()) throw DimensionMismatch("knn: feature width");
        Matrix out(X.rows(), K);
        for (Eigen::Index r = 0; r < X.rows(); ++r)
            out.row(r) = knn_predict_proba_row(train_X, train_y, K, X.row(r), k, metric).transpose();
        return out;
    }

    nlohmann::json to_json() const override {
        return {{"family", family()},
                {"hyperparams", {{"k", k}, {"metric", metric}}},
                {"train_X", matrix_to_json(train_X)},
                {"train_y", train_y},
                {"class_count", K}};
    }
};

inline ModelPtr fit_knn(const Dataset& train, const nlohmann::json& params) {
    train.validate();
    auto m = std::make_shared<KnnModel>();
    m->train_X = train.features;
    m->train_y = train.labels;
    m->K = train.class_count();
    m->k = detail::iparam(params, "k", 5);
    m->metric = detail::sparam(params, "metric", "euclidean");
    if (m->k > static_cast<int>(train.size())) throw KTooLarge("knn: k > n_train");
    if (m->metric != "euclidean" && m->metric != "manhattan")
        throw UnsupportedMethod("knn metric: " + m->metric);
    return m;
}

inline ModelPtr knn_from_json(const nlohmann::json& j) {
    auto m = std::make_shared<KnnModel>();
    m->train_X = matrix_from_json(j.at("train_X"));
    m->train_y = j.at("train_y").get<std::vector<int>>();
    m->K = j.at("class_count").get<int>();
    m->k = j.at("hyperparams").at("k").get<int>();
    m->metric = j.at("hyperparams").at("metric").get<std::string>();
    return m;
}

namespace detail {
inline const ModelRegistrar knn_reg("knn", fit_knn, knn_from_json);
}

}  // namespace cropml
