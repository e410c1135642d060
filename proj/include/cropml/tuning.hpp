#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "cropml/dataset.hpp"
#include "cropml/metrics.hpp"
#include "cropml/model.hpp"

namespace cropml {

// Stratified k-fold partition: per-class counts across folds differ by at
// most one. Deterministic for a fixed seed.
inline std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<int>& labels,
                                                              int k, std::uint64_t seed) {
    if (k < 2) throw FoldTooSmall("k must be >= 2");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (const auto& [cls, idx] : by_class)
        if (static_cast<int>(idx.size()) < k)
            throw ClassSmallerThanK("class " + std::to_string(cls) + " has fewer than k samples");

    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    for (auto& [cls, idx] : by_class) {
        Rng rng(derive_seed(seed, 0xf01d + static_cast<std::uint64_t>(cls)));
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i)
            folds[i % static_cast<std::size_t>(k)].push_back(idx[i]);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

struct GridSpec {
    std::string family;
    // parameter name -> candidate values, insertion order preserved
    std::vector<std::pair<std::string, std::vector<nlohmann::json>>> candidates;
    std::size_t budget = 10000;

    std::size_t cell_count() const {
        std::size_t n = 1;
        for (const auto& [name, vals] : candidates) n *= vals.size();
        return n;
    }
};

struct CvCell {
    nlohmann::json hyperparams;
    std::vector<double> fold_scores;
    double mean = 0, std = 0;
};

struct CvResult {
    std::string family;
    std::string metric;
    std::vector<CvCell> cells;
    std::size_t selected = 0;

    const nlohmann::json& best_params() const { return cells[selected].hyperparams; }

    nlohmann::json to_json() const {
        nlohmann::json cj = nlohmann::json::array();
        for (const auto& c : cells)
            cj.push_back({{"hyperparams", c.hyperparams},
                          {"fold_scores", c.fold_scores},
                          {"mean", c.mean},
                          {"std", c.std}});
        return {{"family", family}, {"metric", metric}, {"cells", cj}, {"selected", selected}};
    }
};

namespace detail {

inline std::vector<nlohmann::json> expand_grid(const GridSpec& grid) {
    std::vector<nlohmann::json> cells = {nlohmann::json::object()};
    for (const auto& [name, vals] : grid.candidates) {
        std::vector<nlohmann::json> next;
        for (const auto& cell : cells)
            for (const auto& v : vals) {
                nlohmann::json c = cell;
                c[name] = v;
                next.push_back(std::move(c));
            }
        cells = std::move(next);
    }
    return cells;
}

inline double score_by_metric(const MetricsReport& rep, const std::string& metric) {
    if (metric == "accuracy") return rep.accuracy;
    if (metric == "weighted_f1") return rep.weighted_f1;
    if (metric == "macro_f1") return rep.macro_f1;
    throw UnsupportedMethod("selection metric: " + metric);
}

}  // namespace detail

// Exhaustive grid search: every cell evaluated on the identical fold
// partition. Ties resolve to the cell with fewer parameters, then first in
// grid order.
inline CvResult grid_search(const GridSpec& grid, const Dataset& train, int k,
                            const std::string& metric = "weighted_f1",
                            std::uint64_t seed = 0) {
    if (grid.cell_count() == 0) throw InvalidSpec("empty grid");
    if (grid.cell_count() > grid.budget) throw BudgetExceeded("grid has too many cells");

    auto folds = stratified_kfold(train.labels, k, seed);
    auto cells = detail::expand_grid(grid);

    CvResult res;
    res.family = grid.family;
    res.metric = metric;

    for (const auto& params : cells) {
        CvCell cell;
        cell.hyperparams = params;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            std::vector<std::size_t> train_idx;
            for (std::size_t g = 0; g < folds.size(); ++g)
                if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
            std::sort(train_idx.begin(), train_idx.end());

            Dataset dtr = train.subset(train_idx);
            Dataset dva = train.subset(folds[f]);
            ModelPtr m = fit_model(grid.family, dtr, params);
            auto rep = compute_metrics(dva.labels, m->predict(dva.features), train.class_count());
            cell.fold_scores.push_back(detail::score_by_metric(rep, metric));
        }
        double sum = std::accumulate(cell.fold_scores.begin(), cell.fold_scores.end(), 0.0);
        cell.mean = sum / static_cast<double>(cell.fold_scores.size());
        double ss = 0;
        for (double s : cell.fold_scores) ss += (s - cell.mean) * (s - cell.mean);
        cell.std = std::sqrt(ss / static_cast<double>(cell.fold_scores.size()));
        res.cells.push_back(std::move(cell));
    }

    res.selected = 0;
    for (std::size_t i = 1; i < res.cells.size(); ++i) {
        const auto& a = res.cells[i];
        const auto& b = res.cells[res.selected];
        if (a.mean > b.mean + 1e-12 ||
            (std::abs(a.mean - b.mean) <= 1e-12 && a.hyperparams.size() < b.hyperparams.size()))
            res.selected = i;
    }
    return res;
}

// Default grids per family (tuning contract for the CLI).
inline GridSpec default_grid(const std::string& family, int d) {
    GridSpec g;
    g.family = family;
    auto J = [](auto v) { return nlohmann::json(v); };
    if (family == "knn") {
        g.candidates = {{"k", {J(3), J(5), J(7), J(11)}},
                        {"metric", {J("euclidean"), J("manhattan")}}};
    } else if (family == "random_forest" || family == "extra_trees") {
        int sq = std::max(1, static_cast<int>(std::round(std::sqrt(static_cast<double>(d)))));
        int third = std::max(1, d / 3);
        g.candidates = {{"n_trees", {J(100), J(300)}}, {"max_features", {J(sq), J(third)}}};
    } else if (family == "gradient_boosting") {
        g.candidates = {{"n_rounds", {J(100), J(300)}},
                        {"learning_rate", {J(0.05), J(0.1)}},
                        {"max_depth", {J(3), J(5)}}};
    } else if (family == "logistic") {
        g.candidates = {{"l2", {J(0.01), J(0.1), J(1.0)}}};
    } else if (family == "svm") {
        g.candidates = {{"C", {J(0.1), J(1.0), J(10.0)}}};
    } else if (family == "decision_tree") {
        g.candidates = {{"max_depth", {J(8), J(16), J(32)}},
                        {"criterion", {J("gini"), J("entropy")}}};
    } else {
        // naive_bayes, adaboost: single default cell
        g.candidates = {};
    }
    return g;
}

struct RankedEntry {
    std::string model_name;
    MetricsReport report;
};

// Evaluate a set of fitted models on the test partition, ranked by accuracy
// descending (Table-shaped report).
inline std::vector<RankedEntry> evaluate_all(
    const std::vector<std::pair<std::string, ModelPtr>>& models, const Dataset& test) {
    std::vector<RankedEntry> out;
    for (const auto& [name, m] : models) {
        RankedEntry e;
        e.model_name = name;
        e.report = compute_metrics(test.labels, m->predict(test.features), test.class_count());
        out.push_back(std::move(e));
    }
    std::stable_sort(out.begin(), out.end(), [](const RankedEntry& a, const RankedEntry& b) {
        return a.report.accuracy > b.report.accuracy;
    });
    return out;
}

inline std::string ranked_table_csv(const std::vector<RankedEntry>& table) {
    std::string out = "Model,Accuracy,Precision,Recall,F1-Score\n";
    char buf[256];
    for (const auto& e : table) {
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%.4f\n", e.model_name.c_str(),
                      e.report.accuracy, e.report.weighted_precision, e.report.weighted_recall,
                      e.report.weighted_f1);
        out += buf;
    }
    return out;
}

}  // namespace cropml
