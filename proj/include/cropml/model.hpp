#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cropml/common.hpp"
#include "cropml/dataset.hpp"

namespace cropml {

// Uniform interface over every fitted classifier: rows of class
// probabilities (nonnegative, summing to 1 within 1e-9).
class Model {
public:
    virtual ~Model() = default;
    virtual std::string family() const = 0;
    virtual int class_count() const = 0;
    virtual Matrix predict_proba(const Matrix& X) const = 0;
    virtual nlohmann::json to_json() const = 0;

    std::vector<int> predict(const Matrix& X) const {
        Matrix P = predict_proba(X);
        std::vector<int> out(static_cast<std::size_t>(P.rows()));
        for (Eigen::Index i = 0; i < P.rows(); ++i) {
            Eigen::Index arg = 0;
            P.row(i).maxCoeff(&arg);
            out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
        }
        return out;
    }

    double accuracy(const Dataset& data) const {
        auto pred = predict(data.features);
        std::size_t ok = 0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            if (pred[i] == data.labels[i]) ++ok;
        return static_cast<double>(ok) / static_cast<double>(pred.size());
    }
};

using ModelPtr = std::shared_ptr<const Model>;

namespace detail {

inline std::map<std::string, std::function<ModelPtr(const nlohmann::json&)>>& model_loaders() {
    static std::map<std::string, std::function<ModelPtr(const nlohmann::json&)>> reg;
    return reg;
}

inline std::map<std::string,
                std::function<ModelPtr(const Dataset&, const nlohmann::json&)>>&
model_fitters() {
    static std::map<std::string, std::function<ModelPtr(const Dataset&, const nlohmann::json&)>>
        reg;
    return reg;
}

struct ModelRegistrar {
    ModelRegistrar(const std::string& family,
                   std::function<ModelPtr(const Dataset&, const nlohmann::json&)> fit,
                   std::function<ModelPtr(const nlohmann::json&)> load) {
        model_fitters()[family] = std::move(fit);
        model_loaders()[family] = std::move(load);
    }
};

inline double param(const nlohmann::json& p, const std::string& key, double fallback) {
    if (p.contains(key)) return p.at(key).get<double>();
    return fallback;
}

inline int iparam(const nlohmann::json& p, const std::string& key, int fallback) {
    if (p.contains(key)) return p.at(key).get<int>();
    return fallback;
}

inline std::string sparam(const nlohmann::json& p, const std::string& key,
                          const std::string& fallback) {
    if (p.contains(key)) return p.at(key).get<std::string>();
    return fallback;
}

}  // namespace detail

// Fit by family name; `params` holds family-specific hyperparameters.
inline ModelPtr fit_model(const std::string& family, const Dataset& train,
                          const nlohmann::json& params = nlohmann::json::object()) {
    auto it = detail::model_fitters().find(family);
    if (it == detail::model_fitters().end())
        throw UnsupportedMethod("unknown model family: " + family);
    return it->second(train, params);
}

inline ModelPtr model_from_json(const nlohmann::json& j) {
    std::string family = j.at("family").get<std::string>();
    auto it = detail::model_loaders().find(family);
    if (it == detail::model_loaders().end())
        throw UnsupportedMethod("unknown model family: " + family);
    return it->second(j);
}

inline const std::vector<std::string>& classical_families() {
    static const std::vector<std::string> fams = {
        "logistic",      "knn",         "svm",           "decision_tree", "random_forest",
        "extra_trees",   "gradient_boosting", "naive_bayes", "adaboost"};
    return fams;
}

// JSON <-> Eigen helpers used by every persistable model.
inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    auto nr = static_cast<Eigen::Index>(j.size());
    if (nr == 0) return Matrix(0, 0);
    auto nc = static_cast<Eigen::Index>(j.at(0).size());
    Matrix m(nr, nc);
    for (Eigen::Index r = 0; r < nr; ++r)
        for (Eigen::Index c = 0; c < nc; ++c)
            m(r, c) = j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
    return m;
}

inline nlohmann::json vector_to_json(const Vector& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline Vector vector_from_json(const nlohmann::json& j) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
    return v;
}

// Row-wise softmax with max-shift; shared by several families.
inline Matrix softmax_rows(const Matrix& scores) {
    Matrix out(scores.rows(), scores.cols());
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        double mx = scores.row(r).maxCoeff();
        Eigen::RowVectorXd e = (scores.row(r).array() - mx).exp();
        out.row(r) = e / e.sum();
    }
    return out;
}

}  // namespace cropml
