#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cropml/model.hpp"

namespace cropml {

// Gaussian naive Bayes with a variance floor so constant features cannot
// produce infinite densities.
class NaiveBayesModel : public Model {
public:
    static constexpr double kVarFloor = 1e-9;

    Matrix mean;   // K x d
    Matrix var;    // K x d (floored)
    Vector prior;  // K
    int K = 0;

    std::string family() const override { return "naive_bayes"; }
    int class_count() const override { return K; }

    Matrix predict_proba(const Matrix& X) const override {
        if (X.cols() != mean.cols()) throw DimensionMismatch("naive_bayes: feature width");
        Matrix logp(X.rows(), K);
        for (int k = 0; k < K; ++k) {
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                double lp = std::log(prior(k));
                for (Eigen::Index f = 0; f < X.cols(); ++f) {
                    double diff = X(i, f) - mean(k, f);
                    lp += -0.5 * std::log(6.283185307179586 * var(k, f)) -
                          0.5 * diff * diff / var(k, f);
                }
                logp(i, k) = lp;
            }
        }
        return softmax_rows(logp);  // log-sum-exp normalization
    }

    nlohmann::json to_json() const override {
        return {{"family", family()},
                {"hyperparams", nlohmann::json::object()},
                {"mean", matrix_to_json(mean)},
                {"var", matrix_to_json(var)},
                {"prior", vector_to_json(prior)},
                {"class_count", K}};
    }
};

inline ModelPtr fit_naive_bayes(const Dataset& train, const nlohmann::json& = {}) {
    train.validate();
    auto m = std::make_shared<NaiveBayesModel>();
    m->K = train.class_count();
    auto d = train.features.cols();
    m->mean = Matrix::Zero(m->K, d);
    m->var = Matrix::Zero(m->K, d);
    m->prior = Vector::Zero(m->K);

    auto counts = train.class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k)
        if (counts[k] < 2) throw ClassTooSmall("naive_bayes: class " + std::to_string(k));

    for (std::size_t i = 0; i < train.size(); ++i) {
        int y = train.labels[i];
        m->mean.row(y) += train.features.row(static_cast<Eigen::Index>(i));
        m->prior(y) += 1.0;
    }
    for (int k = 0; k < m->K; ++k) m->mean.row(k) /= m->prior(k);
    for (std::size_t i = 0; i < train.size(); ++i) {
        int y = train.labels[i];
        Eigen::RowVectorXd diff =
            train.features.row(static_cast<Eigen::Index>(i)) - m->mean.row(y);
        m->var.row(y) += diff.cwiseProduct(diff);
    }
    for (int k = 0; k < m->K; ++k)
        m->var.row(k) = (m->var.row(k) / m->prior(k)).cwiseMax(NaiveBayesModel::kVarFloor);
    m->prior /= static_cast<double>(train.size());
    return m;
}

inline ModelPtr naive_bayes_from_json(const nlohmann::json& j) {
    auto m = std::make_shared<NaiveBayesModel>();
    m->mean = matrix_from_json(j.at("mean"));
    m->var = matrix_from_json(j.at("var"));
    m->prior = vector_from_json(j.at("prior"));
    m->K = j.at("class_count").get<int>();
    return m;
}

namespace detail {
inline const ModelRegistrar nb_reg("naive_bayes", fit_naive_bayes, naive_bayes_from_json);
}

}  // namespace cropml
