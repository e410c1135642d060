#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cropml/model.hpp"

namespace cropml {

// --- multinomial logistic regression --------------------------------------

// L2-regularized cross-entropy loss and gradient for weights W (K x d) and
// intercepts b (K). Exposed as a free function so the gradient can be
// finite-difference checked independently of the optimizer.
inline double logistic_loss_grad(const Matrix& W, const Vector& b, const Matrix& X,
                                 const std::vector<int>& y, double l2, Matrix* gW,
                                 Vector* gb) {
    auto n = static_cast<double>(X.rows());
    Matrix scores = X * W.transpose();
    scores.rowwise() += b.transpose();
    Matrix P = softmax_rows(scores);

    double loss = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        loss -= std::log(std::max(P(i, y[static_cast<std::size_t>(i)]), 1e-300));
    loss /= n;
    loss += 0.5 * l2 * W.squaredNorm();

    if (gW) {
        Matrix D = P;  // P - onehot(y)
        for (Eigen::Index i = 0; i < X.rows(); ++i) D(i, y[static_cast<std::size_t>(i)]) -= 1.0;
        *gW = (D.transpose() * X) / n + l2 * W;
        if (gb) *gb = D.colwise().sum().transpose() / n;
    }
    return loss;
}

class LogisticModel : public Model {
public:
    Matrix W;  // K x d
    Vector b;  // K
    nlohmann::json hyper;

    std::string family() const override { return "logistic"; }
    int class_count() const override { return static_cast<int>(W.rows()); }

    Matrix predict_proba(const Matrix& X) const override {
        if (X.cols() != W.cols()) throw DimensionMismatch("logistic: feature width");
        Matrix scores = X * W.transpose();
        scores.rowwise() += b.transpose();
        return softmax_rows(scores);
    }

    nlohmann::json to_json() const override {
        return {{"family", family()},
                {"hyperparams", hyper},
                {"W", matrix_to_json(W)},
                {"b", vector_to_json(b)}};
    }
};

// Full-batch gradient descent with step halving on loss increase; stops when
// the gradient norm drops below tol or max_iter is hit.
inline ModelPtr fit_logistic(const Dataset& train, const nlohmann::json& params) {
    train.validate();
    int K = train.class_count();
    if (K < 2) throw InvalidSpec("logistic needs K >= 2");
    double l2 = detail::param(params, "l2", 0.01);
    double lr = detail::param(params, "lr", 1.0);
    int max_iter = detail::iparam(params, "max_iter", 500);
    double tol = detail::param(params, "tol", 1e-6);

    auto model = std::make_shared<LogisticModel>();
    model->W = Matrix::Zero(K, train.features.cols());
    model->b = Vector::Zero(K);
    model->hyper = {{"l2", l2}, {"lr", lr}, {"max_iter", max_iter}, {"tol", tol}};

    Matrix gW;
    Vector gb;
    double loss = logistic_loss_grad(model->W, model->b, train.features, train.labels, l2, &gW, &gb);
    for (int it = 0; it < max_iter; ++it) {
        double gnorm = std::sqrt(gW.squaredNorm() + gb.squaredNorm());
        if (!std::isfinite(loss)) throw NonFinite("logistic loss diverged");
        if (gnorm < tol) break;

        Matrix Wn;
        Vector bn;
        double new_loss;
        while (true) {
            Wn = model->W - lr * gW;
            bn = model->b - lr * gb;
            new_loss = logistic_loss_grad(Wn, bn, train.features, train.labels, l2, nullptr, nullptr);
            if (new_loss <= loss || lr < 1e-12) break;
            lr *= 0.5;
        }
        model->W = std::move(Wn);
        model->b = std::move(bn);
        lr *= 1.1;
        loss = logistic_loss_grad(model->W, model->b, train.features, train.labels, l2, &gW, &gb);
    }
    return model;
}

inline ModelPtr logistic_from_json(const nlohmann::json& j) {
    auto m = std::make_shared<LogisticModel>();
    m->W = matrix_from_json(j.at("W"));
    m->b = vector_from_json(j.at("b"));
    m->hyper = j.at("hyperparams");
    return m;
}

// --- linear one-vs-all SVM -------------------------------------------------

class SvmModel : public Model {
public:
    Matrix W;  // K x d
    Vector b;
    nlohmann::json hyper;

    std::string family() const override { return "svm"; }
    int class_count() const override { return static_cast<int>(W.rows()); }

    Matrix margins(const Matrix& X) const {
        if (X.cols() != W.cols()) throw DimensionMismatch("svm: feature width");
        Matrix m = X * W.transpose();
        m.rowwise() += b.transpose();
        return m;
    }

    // probabilities = softmax over per-class margins (no Platt scaling)
    Matrix predict_proba(const Matrix& X) const override { return softmax_rows(margins(X)); }

    nlohmann::json to_json() const override {
        return {{"family", family()},
                {"hyperparams", hyper},
                {"W", matrix_to_json(W)},
                {"b", vector_to_json(b)}};
    }
};

// One-vs-all hinge loss + L2, full-batch sub-gradient descent with 1/t step
// decay. lambda = 1/(C n).
inline ModelPtr fit_svm_linear(const Dataset& train, const nlohmann::json& params) {
    train.validate();
    int K = train.class_count();
    if (K < 2) throw InvalidSpec("svm needs K >= 2");
    double C = detail::param(params, "C", 1.0);
    int max_iter = detail::iparam(params, "max_iter", 300);
    double lr0 = detail::param(params, "lr", 0.5);

    auto n = static_cast<double>(train.features.rows());
    double lambda = 1.0 / (C * n);

    auto model = std::make_shared<SvmModel>();
    model->W = Matrix::Zero(K, train.features.cols());
    model->b = Vector::Zero(K);
    model->hyper = {{"C", C}, {"max_iter", max_iter}, {"lr", lr0}};

    for (int it = 1; it <= max_iter; ++it) {
        Matrix m = model->margins(train.features);
        Matrix gW = lambda * model->W * n;  // d(0.5*lambda*n*||W||^2)
        Vector gb = Vector::Zero(K);
        for (Eigen::Index i = 0; i < train.features.rows(); ++i) {
            for (int k = 0; k < K; ++k) {
                double t = (train.labels[static_cast<std::size_t>(i)] == k) ? 1.0 : -1.0;
                if (t * m(i, k) < 1.0) {
                    gW.row(k) -= t * train.features.row(i);
                    gb(k) -= t;
                }
            }
        }
        double step = lr0 / (1.0 + 0.1 * static_cast<double>(it));
        model->W -= (step / n) * gW;
        model->b -= (step / n) * gb;
        check_finite(model->W, "svm weights");
    }
    return model;
}

inline ModelPtr svm_from_json(const nlohmann::json& j) {
    auto m = std::make_shared<SvmModel>();
    m->W = matrix_from_json(j.at("W"));
    m->b = vector_from_json(j.at("b"));
    m->hyper = j.at("hyperparams");
    return m;
}

namespace detail {
inline const ModelRegistrar logistic_reg("logistic", fit_logistic, logistic_from_json);
inline const ModelRegistrar svm_reg("svm", fit_svm_linear, svm_from_json);
}  // namespace detail

}  // namespace cropml
