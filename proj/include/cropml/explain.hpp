#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "cropml/dataset.hpp"
#include "cropml/metrics.hpp"
#include "cropml/model.hpp"

namespace cropml {

struct FeatureImportance {
    std::string name;
    double mean_importance = 0;
    double std_importance = 0;
    int rank = 0;
};

struct AttributionReport {
    std::vector<FeatureImportance> features;  // in original feature order
    std::string method;
    int repeats = 1;
    double baseline_score = 0;
    std::uint64_t seed = 0;

    void assign_ranks() {
        std::vector<std::size_t> order(features.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return features[a].mean_importance > features[b].mean_importance;
        });
        for (std::size_t r = 0; r < order.size(); ++r)
            features[order[r]].rank = static_cast<int>(r + 1);
    }

    std::string to_csv(bool top15_only = false) const {
        std::vector<const FeatureImportance*> rows;
        for (const auto& f : features) rows.push_back(&f);
        std::stable_sort(rows.begin(), rows.end(),
                         [](const auto* a, const auto* b) { return a->rank < b->rank; });
        if (top15_only && rows.size() > 15) rows.resize(15);
        std::string out = "feature,mean_importance,std_importance,rank\n";
        char buf[256];
        for (const auto* f : rows) {
            std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%d\n", f->name.c_str(),
                          f->mean_importance, f->std_importance, f->rank);
            out += buf;
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json fj = nlohmann::json::array();
        for (const auto& f : features)
            fj.push_back({{"name", f.name},
                          {"mean_importance", f.mean_importance},
                          {"std_importance", f.std_importance},
                          {"rank", f.rank}});
        return {{"method", method},
                {"repeats", repeats},
                {"baseline_score", baseline_score},
                {"seed", seed},
                {"features", fj}};
    }
};

// importance_j = baseline accuracy - mean accuracy over R seeded in-place
// shuffles of column j.
inline AttributionReport permutation_importance(const Model& model, const Dataset& eval,
                                                int repeats = 10, std::uint64_t seed = 0) {
    eval.validate();
    AttributionReport rep;
    rep.method = "permutation";
    rep.repeats = repeats;
    rep.seed = seed;
    rep.baseline_score = model.accuracy(eval);

    auto n = eval.size();
    for (int j = 0; j < eval.dim(); ++j) {
        std::vector<double> drops;
        for (int r = 0; r < repeats; ++r) {
            Rng rng(derive_seed(seed, 0x9e20 + static_cast<std::uint64_t>(j) * 1000 +
                                          static_cast<std::uint64_t>(r)));
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
            Matrix X = eval.features;
            for (std::size_t i = 0; i < n; ++i)
                X(static_cast<Eigen::Index>(i), j) =
                    eval.features(static_cast<Eigen::Index>(perm[i]), j);
            auto pred = model.predict(X);
            std::size_t ok = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (pred[i] == eval.labels[i]) ++ok;
            drops.push_back(rep.baseline_score -
                            static_cast<double>(ok) / static_cast<double>(n));
        }
        double mean = std::accumulate(drops.begin(), drops.end(), 0.0) /
                      static_cast<double>(drops.size());
        double ss = 0;
        for (double d : drops) ss += (d - mean) * (d - mean);
        FeatureImportance fi;
        fi.name = eval.feature_names[static_cast<std::size_t>(j)];
        fi.mean_importance = mean;
        fi.std_importance = std::sqrt(ss / static_cast<double>(drops.size()));
        rep.features.push_back(std::move(fi));
    }
    rep.assign_ranks();
    return rep;
}

// importance_j = baseline accuracy - accuracy with column j replaced
// wholesale by the fill value. Deterministic.
inline AttributionReport occlusion_importance(const Model& model, const Dataset& eval,
                                              const std::string& fill = "zero",
                                              const Vector* train_mean = nullptr) {
    eval.validate();
    AttributionReport rep;
    rep.method = "occlusion";
    rep.repeats = 1;
    rep.baseline_score = model.accuracy(eval);

    for (int j = 0; j < eval.dim(); ++j) {
        double v = 0.0;
        if (fill == "train-mean") {
            if (!train_mean) throw InvalidSpec("occlusion: train-mean fill needs means");
            v = (*train_mean)(j);
        } else if (fill != "zero") {
            throw UnsupportedMethod("occlusion fill: " + fill);
        }
        Matrix X = eval.features;
        X.col(j).setConstant(v);
        auto pred = model.predict(X);
        std::size_t ok = 0;
        for (std::size_t i = 0; i < eval.size(); ++i)
            if (pred[i] == eval.labels[i]) ++ok;
        FeatureImportance fi;
        fi.name = eval.feature_names[static_cast<std::size_t>(j)];
        fi.mean_importance =
            rep.baseline_score - static_cast<double>(ok) / static_cast<double>(eval.size());
        fi.std_importance = 0;
        rep.features.push_back(std::move(fi));
    }
    rep.assign_ranks();
    return rep;
}

// --- Shapley sampling --------------------------------------------------------

struct ShapleyExplanation {
    std::size_t instance_index = 0;
    std::vector<double> phi;  // per feature
    double base_value = 0;    // v(empty) = mean class-c output over background
    int explained_class = 0;

    double explained_total() const {
        return base_value + std::accumulate(phi.begin(), phi.end(), 0.0);
    }

    nlohmann::json to_json(const std::vector<std::string>& names) const {
        nlohmann::json fj = nlohmann::json::array();
        for (std::size_t j = 0; j < phi.size(); ++j)
            fj.push_back({{"name", names[j]}, {"phi", phi[j]}});
        return {{"instance", instance_index},
                {"class", explained_class},
                {"base_value", base_value},
                {"phi", fj},
                {"efficiency_total", explained_total()}};
    }
};

namespace detail {

// v(S): mean class-c probability with features in S taken from the instance
// and the rest from background rows (paired sampling across the whole
// background).
inline double coalition_value(const Model& model, const Eigen::RowVectorXd& instance,
                              const Matrix& background, const std::vector<bool>& in_coalition,
                              int cls) {
    Matrix X = background;
    for (Eigen::Index j = 0; j < X.cols(); ++j)
        if (in_coalition[static_cast<std::size_t>(j)]) X.col(j).setConstant(instance(j));
    Matrix P = model.predict_proba(X);
    return P.col(cls).mean();
}

}  // namespace detail

// Monte-Carlo permutation-sampling Shapley values with background
// marginalization: phi_j averages v(pre ∪ {j}) - v(pre) over M random
// feature orderings.
inline ShapleyExplanation shapley_sampling(const Model& model, const Eigen::RowVectorXd& instance,
                                           const Matrix& background, int permutations, int cls,
                                           std::uint64_t seed, std::size_t instance_index = 0) {
    if (permutations < 1) throw InvalidSpec("shapley: M >= 1");
    if (background.rows() == 0) throw EmptyInput("shapley: background");
    auto d = static_cast<std::size_t>(instance.size());

    ShapleyExplanation ex;
    ex.instance_index = instance_index;
    ex.explained_class = cls;
    ex.phi.assign(d, 0.0);
    std::vector<bool> none(d, false);
    ex.base_value = detail::coalition_value(model, instance, background, none, cls);

    Rng rng(derive_seed(seed, 0x54a9));
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);

    for (int m = 0; m < permutations; ++m) {
        rng.shuffle(order);
        std::vector<bool> coalition(d, false);
        double prev = ex.base_value;
        for (std::size_t step = 0; step < d; ++step) {
            coalition[order[step]] = true;
            double cur = detail::coalition_value(model, instance, background, coalition, cls);
            ex.phi[order[step]] += cur - prev;
            prev = cur;
        }
    }
    for (auto& p : ex.phi) p /= static_cast<double>(permutations);
    return ex;
}

// Exact Shapley by full coalition enumeration; usable up to d <= 12 and the
// oracle for the sampling estimator.
inline ShapleyExplanation shapley_exact(const Model& model, const Eigen::RowVectorXd& instance,
                                        const Matrix& background, int cls,
                                        std::size_t instance_index = 0) {
    auto d = static_cast<std::size_t>(instance.size());
    if (d > 12) throw InvalidSpec("shapley_exact: d <= 12");

    // precompute v(S) for every subset
    std::size_t total = std::size_t{1} << d;
    std::vector<double> v(total);
    for (std::size_t mask = 0; mask < total; ++mask) {
        std::vector<bool> coalition(d, false);
        for (std::size_t j = 0; j < d; ++j) coalition[j] = (mask >> j) & 1;
        v[mask] = detail::coalition_value(model, instance, background, coalition, cls);
    }

    std::vector<double> fact(d + 1, 1.0);
    for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);

    ShapleyExplanation ex;
    ex.instance_index = instance_index;
    ex.explained_class = cls;
    ex.base_value = v[0];
    ex.phi.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t mask = 0; mask < total; ++mask) {
            if ((mask >> j) & 1) continue;
            auto s = static_cast<std::size_t>(__builtin_popcountll(mask));
            double wgt = fact[s] * fact[d - s - 1] / fact[d];
            ex.phi[j] += wgt * (v[mask | (std::size_t{1} << j)] - v[mask]);
        }
    }
    return ex;
}

// --- reliability ---------------------------------------------------------------

struct ReliabilityBin {
    double low = 0, high = 0;
    std::size_t count = 0;
    double accuracy = 0;
};

struct ReliabilityReport {
    std::vector<double> confidence;  // per sample, max probability
    std::vector<double> entropy;     // per sample, natural log
    double mean_confidence = 0;
    double mean_entropy = 0;
    std::vector<ReliabilityBin> bins;

    std::string bins_csv() const {
        std::string out = "bin_low,bin_high,count,accuracy\n";
        char buf[128];
        for (const auto& b : bins) {
            std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%zu,%.6f\n", b.low, b.high, b.count,
                          b.accuracy);
            out += buf;
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json bj = nlohmann::json::array();
        for (const auto& b : bins)
            bj.push_back({{"low", b.low}, {"high", b.high}, {"count", b.count},
                          {"accuracy", b.accuracy}});
        return {{"mean_confidence", mean_confidence},
                {"mean_entropy", mean_entropy},
                {"bins", bj}};
    }
};

inline double row_entropy(const Eigen::RowVectorXd& p) {
    double h = 0;
    for (Eigen::Index k = 0; k < p.size(); ++k)
        if (p(k) > 0) h -= p(k) * std::log(p(k));
    return h;
}

inline ReliabilityReport reliability_report(const Matrix& probabilities,
                                            const std::vector<int>& truth, int bin_count = 10) {
    if (static_cast<std::size_t>(probabilities.rows()) != truth.size() || truth.empty())
        throw LengthMismatch("reliability_report");

    ReliabilityReport rep;
    auto n = truth.size();
    std::vector<bool> correct(n);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Index arg = 0;
        double conf = probabilities.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
        rep.confidence.push_back(conf);
        rep.entropy.push_back(row_entropy(probabilities.row(static_cast<Eigen::Index>(i))));
        correct[i] = (static_cast<int>(arg) == truth[i]);
        rep.mean_confidence += conf;
        rep.mean_entropy += rep.entropy.back();
    }
    rep.mean_confidence /= static_cast<double>(n);
    rep.mean_entropy /= static_cast<double>(n);

    rep.bins.resize(static_cast<std::size_t>(bin_count));
    std::vector<std::size_t> hits(static_cast<std::size_t>(bin_count), 0);
    for (int b = 0; b < bin_count; ++b) {
        rep.bins[static_cast<std::size_t>(b)].low = static_cast<double>(b) / bin_count;
        rep.bins[static_cast<std::size_t>(b)].high = static_cast<double>(b + 1) / bin_count;
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto b = static_cast<std::size_t>(
            std::min<int>(bin_count - 1, static_cast<int>(rep.confidence[i] * bin_count)));
        rep.bins[b].count++;
        if (correct[i]) hits[b]++;
    }
    for (std::size_t b = 0; b < rep.bins.size(); ++b)
        if (rep.bins[b].count > 0)
            rep.bins[b].accuracy =
                static_cast<double>(hits[b]) / static_cast<double>(rep.bins[b].count);
    return rep;
}

struct ConfidenceCorrectness {
    double mean_correct = 0;
    double mean_incorrect = 0;
    bool incorrect_group_empty = false;
    bool correct_group_empty = false;
    std::vector<ReliabilityBin> bins;
};

inline ConfidenceCorrectness confidence_correctness(const Matrix& probabilities,
                                                    const std::vector<int>& truth,
                                                    int bin_count = 10) {
    ReliabilityReport rel = reliability_report(probabilities, truth, bin_count);
    ConfidenceCorrectness cc;
    cc.bins = rel.bins;
    double sum_c = 0, sum_i = 0;
    std::size_t n_c = 0, n_i = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        Eigen::Index arg = 0;
        probabilities.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
        if (static_cast<int>(arg) == truth[i]) {
            sum_c += rel.confidence[i];
            ++n_c;
        } else {
            sum_i += rel.confidence[i];
            ++n_i;
        }
    }
    cc.correct_group_empty = (n_c == 0);
    cc.incorrect_group_empty = (n_i == 0);
    if (n_c) cc.mean_correct = sum_c / static_cast<double>(n_c);
    if (n_i) cc.mean_incorrect = sum_i / static_cast<double>(n_i);
    return cc;
}

}  // namespace cropml
