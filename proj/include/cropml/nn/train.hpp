#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "cropml/nn/network.hpp"

namespace cropml::nn {

struct EpochStats {
    double train_loss = 0, train_acc = 0, val_loss = 0, val_acc = 0;
};

struct TrainingCurve {
    std::vector<EpochStats> epochs;

    std::string to_csv() const {
        std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
        char buf[160];
        for (std::size_t e = 0; e < epochs.size(); ++e) {
            std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g\n", e + 1,
                          epochs[e].train_loss, epochs[e].train_acc, epochs[e].val_loss,
                          epochs[e].val_acc);
            out += buf;
        }
        return out;
    }
};

struct OptimizerConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 32;
    int epochs = 150;
    int patience = 20;
};

inline void to_json(nlohmann::json& j, const OptimizerConfig& c) {
    j = {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},   {"beta2", c.beta2},
         {"epsilon", c.epsilon},             {"batch_size", c.batch_size},
         {"epochs", c.epochs},               {"patience", c.patience}};
}

inline void from_json(const nlohmann::json& j, OptimizerConfig& c) {
    c = OptimizerConfig{};
    if (j.contains("learning_rate")) j.at("learning_rate").get_to(c.learning_rate);
    if (j.contains("beta1")) j.at("beta1").get_to(c.beta1);
    if (j.contains("beta2")) j.at("beta2").get_to(c.beta2);
    if (j.contains("epsilon")) j.at("epsilon").get_to(c.epsilon);
    if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
    if (j.contains("epochs")) j.at("epochs").get_to(c.epochs);
    if (j.contains("patience")) j.at("patience").get_to(c.patience);
}

// Adaptive-moment optimizer state, one moment pair per named tensor.
class AdamState {
public:
    AdamState(const ParamStore& params, const OptimizerConfig& cfg) : cfg_(cfg) {
        for (const auto& [name, m] : params) {
            m1_[name] = Matrix::Zero(m.rows(), m.cols());
            m2_[name] = Matrix::Zero(m.rows(), m.cols());
        }
    }

    void step(ParamStore& params, const ParamStore& grads) {
        ++t_;
        double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (auto& [name, p] : params) {
            const Matrix& g = grads.at(name);
            Matrix& m1 = m1_[name];
            Matrix& m2 = m2_[name];
            m1 = cfg_.beta1 * m1 + (1.0 - cfg_.beta1) * g;
            m2 = cfg_.beta2 * m2 + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
            Matrix mhat = m1 / bc1;
            Matrix vhat = m2 / bc2;
            p -= cfg_.learning_rate *
                 mhat.cwiseQuotient((vhat.cwiseSqrt().array() + cfg_.epsilon).matrix());
        }
    }

private:
    OptimizerConfig cfg_;
    std::map<std::string, Matrix> m1_, m2_;
    int t_ = 0;
};

inline double dataset_loss(const Network& net, const Dataset& data) {
    Matrix P = net.forward(data.features);
    double loss = 0;
    for (Eigen::Index i = 0; i < P.rows(); ++i)
        loss -= std::log(std::max(P(i, data.labels[static_cast<std::size_t>(i)]), 1e-300));
    return loss / static_cast<double>(P.rows());
}

inline double dataset_accuracy(const Network& net, const Dataset& data) {
    Matrix P = net.forward(data.features);
    std::size_t ok = 0;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        Eigen::Index arg = 0;
        P.row(i).maxCoeff(&arg);
        if (static_cast<int>(arg) == data.labels[static_cast<std::size_t>(i)]) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(P.rows());
}

// Mini-batch training with seeded epoch shuffling and early stopping on
// validation loss. Returns the best-epoch parameters (by val loss).
inline TrainingCurve train(Network& net, const Dataset& train_data, const Dataset& val_data,
                           const OptimizerConfig& cfg) {
    train_data.validate();
    val_data.validate();
    if (train_data.dim() != net.spec.input_dim || val_data.dim() != net.spec.input_dim)
        throw DimensionMismatch("train: dataset width vs network input");

    AdamState opt(net.params, cfg);
    TrainingCurve curve;
    Rng dropout_rng(derive_seed(net.spec.seed, 0xd809));

    double best_val = std::numeric_limits<double>::infinity();
    ParamStore best_params = net.params;
    int stale = 0;

    std::vector<std::size_t> order(train_data.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(net.spec.seed, 0x3f00 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        auto n = order.size();
        auto bs = static_cast<std::size_t>(cfg.batch_size);
        for (std::size_t start = 0; start < n; start += bs) {
            std::size_t m = std::min(bs, n - start);
            Matrix X(static_cast<Eigen::Index>(m), train_data.features.cols());
            std::vector<int> y(m);
            for (std::size_t i = 0; i < m; ++i) {
                X.row(static_cast<Eigen::Index>(i)) =
                    train_data.features.row(static_cast<Eigen::Index>(order[start + i]));
                y[i] = train_data.labels[order[start + i]];
            }
            ParamStore grads;
            net.loss_and_grads(X, y, /*train=*/true, &dropout_rng, grads);
            opt.step(net.params, grads);
        }

        EpochStats st;
        st.train_loss = dataset_loss(net, train_data);
        st.train_acc = dataset_accuracy(net, train_data);
        st.val_loss = dataset_loss(net, val_data);
        st.val_acc = dataset_accuracy(net, val_data);
        curve.epochs.push_back(st);

        if (st.val_loss < best_val - 1e-12) {
            best_val = st.val_loss;
            best_params = net.params;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    net.params = std::move(best_params);
    return curve;
}

}  // namespace cropml::nn
