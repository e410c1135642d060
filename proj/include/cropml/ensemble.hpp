#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "cropml/models/linear.hpp"
#include "cropml/nn/train.hpp"
#include "cropml/tuning.hpp"

namespace cropml {

struct BaseModelRecord {
    std::string model_id;
    double validation_accuracy = 0;
    double mean_confidence = 0;  // mean max-probability on validation rows
    double weight = 0;
};

// w_i = acc_i * conf_i, normalized; uniform when every product is zero.
inline std::vector<double> compute_base_weights(
    const std::vector<std::pair<double, double>>& acc_conf) {
    if (acc_conf.empty()) throw EmptyInput("compute_base_weights");
    std::vector<double> w;
    double total = 0;
    for (const auto& [acc, conf] : acc_conf) {
        if (acc < 0 || acc > 1 || conf < 0 || conf > 1)
            throw ValueOutOfRange("accuracy/confidence must be in [0,1]");
        w.push_back(acc * conf);
        total += acc * conf;
    }
    if (total <= 0) {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
        return w;
    }
    for (auto& x : w) x /= total;
    return w;
}

inline Vector fuse_probabilities(const std::vector<Vector>& rows, const std::vector<double>& weights) {
    if (rows.size() != weights.size() || rows.empty())
        throw DimensionMismatch("fuse_probabilities: rows vs weights");
    Vector out = Vector::Zero(rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != out.size()) throw DimensionMismatch("fuse: row widths differ");
        out += weights[i] * rows[i];
    }
    return out;
}

struct EnsembleConfig {
    int folds = 5;
    std::string fusion_mode = "meta_learner";  // or weighted_average
    double meta_l2 = 1e-3;
    nn::OptimizerConfig base_optimizer;
};

// The Final Ensemble: the four neural base learners, accuracy-and-confidence
// weights from out-of-fold validation, and a softmax-regression meta-learner
// trained on the weighted stacked probability rows.
class Ensemble : public Model {
public:
    std::vector<nn::Network> bases;
    std::vector<BaseModelRecord> records;
    ModelPtr meta;  // softmax regression over stacked features
    std::string fusion_mode = "meta_learner";
    nlohmann::json provenance;  // fold membership per row
    nn::TrainingCurve meta_curve;

    std::string family() const override { return "final_ensemble"; }
    int class_count() const override { return bases.at(0).spec.class_count; }

    Matrix stacked_features(const Matrix& X) const {
        int K = class_count();
        Matrix S(X.rows(), static_cast<Eigen::Index>(bases.size()) * K);
        for (std::size_t b = 0; b < bases.size(); ++b) {
            Matrix P = bases[b].forward(X);
            S.middleCols(static_cast<Eigen::Index>(b) * K, K) = P * records[b].weight;
        }
        return S;
    }

    Matrix predict_proba(const Matrix& X) const override {
        if (bases.empty()) throw NotTrained("ensemble has no base models");
        if (fusion_mode == "weighted_average") {
            int K = class_count();
            Matrix out = Matrix::Zero(X.rows(), K);
            for (std::size_t b = 0; b < bases.size(); ++b)
                out += records[b].weight * bases[b].forward(X);
            return out;
        }
        if (!meta) throw NotTrained("meta-learner missing");
        return meta->predict_proba(stacked_features(X));
    }

    nlohmann::json to_json() const override {
        nlohmann::json basesj = nlohmann::json::array();
        nlohmann::json recsj = nlohmann::json::array();
        for (std::size_t b = 0; b < bases.size(); ++b) {
            basesj.push_back(bases[b].to_json());
            recsj.push_back({{"model_id", records[b].model_id},
                             {"validation_accuracy", records[b].validation_accuracy},
                             {"mean_confidence", records[b].mean_confidence},
                             {"weight", records[b].weight}});
        }
        return {{"family", family()},
                {"fusion_mode", fusion_mode},
                {"bases", basesj},
                {"records", recsj},
                {"meta", meta ? meta->to_json() : nlohmann::json()},
                {"provenance", provenance}};
    }

    static std::shared_ptr<Ensemble> from_json(const nlohmann::json& j) {
        auto e = std::make_shared<Ensemble>();
        e->fusion_mode = j.at("fusion_mode").get<std::string>();
        for (const auto& b : j.at("bases")) e->bases.push_back(nn::Network::from_json(b));
        for (const auto& r : j.at("records")) {
            BaseModelRecord rec;
            rec.model_id = r.at("model_id").get<std::string>();
            rec.validation_accuracy = r.at("validation_accuracy").get<double>();
            rec.mean_confidence = r.at("mean_confidence").get<double>();
            rec.weight = r.at("weight").get<double>();
            e->records.push_back(std::move(rec));
        }
        if (!j.at("meta").is_null()) e->meta = logistic_from_json(j.at("meta"));
        if (j.contains("provenance")) e->provenance = j.at("provenance");
        return e;
    }
};

// Out-of-fold stacking: each base architecture is retrained k times on k-1
// folds and predicts the held fold; the meta-learner only ever sees
// predictions from models that did not train on that row.
inline std::shared_ptr<Ensemble> train_meta_learner(const std::vector<nn::ArchitectureSpec>& specs,
                                                    const Dataset& train,
                                                    const EnsembleConfig& cfg,
                                                    std::vector<nn::TrainingCurve>* base_curves = nullptr) {
    if (cfg.folds < 2) throw FoldTooSmall("ensemble folds >= 2");
    train.validate();
    int K = train.class_count();
    auto n = train.size();
    auto B = specs.size();

    auto folds = stratified_kfold(train.labels, cfg.folds, specs[0].seed);

    auto ens = std::make_shared<Ensemble>();
    ens->fusion_mode = cfg.fusion_mode;

    // out-of-fold probability blocks, per base
    std::vector<Matrix> oof(B, Matrix::Zero(static_cast<Eigen::Index>(n), K));
    std::vector<double> sum_acc(B, 0), sum_conf(B, 0);

    nlohmann::json fold_membership = nlohmann::json::array();
    for (std::size_t f = 0; f < folds.size(); ++f) fold_membership.push_back(folds[f]);
    ens->provenance["folds"] = fold_membership;

    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> tr;
        for (std::size_t g = 0; g < folds.size(); ++g)
            if (g != f) tr.insert(tr.end(), folds[g].begin(), folds[g].end());
        std::sort(tr.begin(), tr.end());
        Dataset dtr = train.subset(tr);
        Dataset dva = train.subset(folds[f]);

        for (std::size_t b = 0; b < B; ++b) {
            nn::ArchitectureSpec fs = specs[b];
            fs.seed = derive_seed(specs[b].seed, 0xf01d00 + f);
            nn::Network net = nn::Network::build(fs);
            nn::train(net, dtr, dva, cfg.base_optimizer);

            Matrix P = net.forward(dva.features);
            std::size_t correct = 0;
            double conf = 0;
            for (Eigen::Index i = 0; i < P.rows(); ++i) {
                Eigen::Index arg = 0;
                double mx = P.row(i).maxCoeff(&arg);
                conf += mx;
                if (static_cast<int>(arg) == dva.labels[static_cast<std::size_t>(i)]) ++correct;
                oof[b].row(static_cast<Eigen::Index>(folds[f][static_cast<std::size_t>(i)])) =
                    P.row(i);
            }
            sum_acc[b] += static_cast<double>(correct) / static_cast<double>(P.rows());
            sum_conf[b] += conf / static_cast<double>(P.rows());
        }
    }

    // base weights from fold-averaged accuracy and confidence
    std::vector<std::pair<double, double>> acc_conf;
    for (std::size_t b = 0; b < B; ++b)
        acc_conf.emplace_back(sum_acc[b] / static_cast<double>(cfg.folds),
                              sum_conf[b] / static_cast<double>(cfg.folds));
    auto weights = compute_base_weights(acc_conf);
    for (std::size_t b = 0; b < B; ++b) {
        BaseModelRecord rec;
        rec.model_id = specs[b].variant;
        rec.validation_accuracy = acc_conf[b].first;
        rec.mean_confidence = acc_conf[b].second;
        rec.weight = weights[b];
        ens->records.push_back(std::move(rec));
    }

    // meta-learner on weighted stacked out-of-fold features
    Dataset stacked;
    stacked.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(B) * K);
    for (std::size_t b = 0; b < B; ++b)
        stacked.features.middleCols(static_cast<Eigen::Index>(b) * K, K) = oof[b] * weights[b];
    stacked.labels = train.labels;
    stacked.class_names = train.class_names;
    for (std::size_t b = 0; b < B; ++b)
        for (int k = 0; k < K; ++k)
            stacked.feature_names.push_back(specs[b].variant + "_p" + std::to_string(k));

    ens->meta = fit_logistic(stacked, {{"l2", cfg.meta_l2}, {"max_iter", 500}});

    // meta training curve: loss/accuracy of the meta-learner on its own
    // training features, re-fit incrementally (cheap; diagnostic only)
    {
        nn::TrainingCurve mc;
        for (int it : {25, 50, 100, 200, 500}) {
            auto m = fit_logistic(stacked, {{"l2", cfg.meta_l2}, {"max_iter", it}});
            nn::EpochStats st;
            Matrix P = m->predict_proba(stacked.features);
            double loss = 0;
            std::size_t ok = 0;
            for (Eigen::Index i = 0; i < P.rows(); ++i) {
                loss -= std::log(std::max(P(i, stacked.labels[static_cast<std::size_t>(i)]), 1e-300));
                Eigen::Index arg = 0;
                P.row(i).maxCoeff(&arg);
                if (static_cast<int>(arg) == stacked.labels[static_cast<std::size_t>(i)]) ++ok;
            }
            st.train_loss = st.val_loss = loss / static_cast<double>(P.rows());
            st.train_acc = st.val_acc = static_cast<double>(ok) / static_cast<double>(P.rows());
            mc.epochs.push_back(st);
        }
        ens->meta_curve = std::move(mc);
    }

    // final base learners retrained on the full training set (validation =
    // training here; early stop effectively off)
    for (std::size_t b = 0; b < B; ++b) {
        nn::Network net = nn::Network::build(specs[b]);
        nn::TrainingCurve c = nn::train(net, train, train, cfg.base_optimizer);
        if (base_curves) base_curves->push_back(std::move(c));
        ens->bases.push_back(std::move(net));
    }
    return ens;
}

}  // namespace cropml
