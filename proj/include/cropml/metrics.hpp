#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cropml/common.hpp"

namespace cropml {

struct MetricsReport {
    double accuracy = 0.0;
    std::vector<double> precision, recall, f1;  // per class
    std::vector<std::size_t> support;
    double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    std::vector<std::vector<std::size_t>> confusion_counts;  // true row x pred col
    std::vector<std::vector<double>> confusion_row_pct;
    std::vector<int> zero_division_classes;  // classes hit by the 0-convention
};

inline std::vector<std::vector<double>> confusion_percentages(
    const std::vector<std::vector<std::size_t>>& counts) {
    std::vector<std::vector<double>> pct(counts.size());
    for (std::size_t r = 0; r < counts.size(); ++r) {
        std::size_t total = 0;
        for (std::size_t v : counts[r]) total += v;
        pct[r].resize(counts[r].size(), 0.0);
        if (total == 0) continue;  // all-zero row stays all-zero (flag path)
        for (std::size_t c = 0; c < counts[r].size(); ++c)
            pct[r][c] = 100.0 * static_cast<double>(counts[r][c]) / static_cast<double>(total);
    }
    return pct;
}

// Per-class precision/recall/F1 with the 0-convention on empty denominators;
// weighted averages use class support, so weighted recall equals accuracy.
inline MetricsReport compute_metrics(const std::vector<int>& truth,
                                     const std::vector<int>& predicted, int K) {
    if (truth.size() != predicted.size() || truth.empty())
        throw LengthMismatch("compute_metrics: label vectors differ or empty");

    MetricsReport rep;
    auto Ku = static_cast<std::size_t>(K);
    rep.confusion_counts.assign(Ku, std::vector<std::size_t>(Ku, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        rep.confusion_counts[static_cast<std::size_t>(truth[i])]
                            [static_cast<std::size_t>(predicted[i])]++;
        if (truth[i] == predicted[i]) ++correct;
    }
    rep.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    rep.confusion_row_pct = confusion_percentages(rep.confusion_counts);

    rep.precision.resize(Ku);
    rep.recall.resize(Ku);
    rep.f1.resize(Ku);
    rep.support.resize(Ku);
    for (std::size_t k = 0; k < Ku; ++k) {
        std::size_t tp = rep.confusion_counts[k][k];
        std::size_t pred_k = 0, true_k = 0;
        for (std::size_t j = 0; j < Ku; ++j) {
            pred_k += rep.confusion_counts[j][k];
            true_k += rep.confusion_counts[k][j];
        }
        rep.support[k] = true_k;
        bool zero_div = (pred_k == 0) || (true_k == 0);
        rep.precision[k] = pred_k ? static_cast<double>(tp) / static_cast<double>(pred_k) : 0.0;
        rep.recall[k] = true_k ? static_cast<double>(tp) / static_cast<double>(true_k) : 0.0;
        double pr = rep.precision[k] + rep.recall[k];
        rep.f1[k] = pr > 0 ? 2.0 * rep.precision[k] * rep.recall[k] / pr : 0.0;
        if (zero_div) rep.zero_division_classes.push_back(static_cast<int>(k));
    }

    double n = static_cast<double>(truth.size());
    for (std::size_t k = 0; k < Ku; ++k) {
        double w = static_cast<double>(rep.support[k]) / n;
        rep.weighted_precision += w * rep.precision[k];
        rep.weighted_recall += w * rep.recall[k];
        rep.weighted_f1 += w * rep.f1[k];
        rep.macro_precision += rep.precision[k] / static_cast<double>(K);
        rep.macro_recall += rep.recall[k] / static_cast<double>(K);
        rep.macro_f1 += rep.f1[k] / static_cast<double>(K);
    }
    return rep;
}

inline nlohmann::json metrics_to_json(const MetricsReport& r,
                                      const std::vector<std::string>& class_names) {
    nlohmann::json j;
    j["accuracy"] = r.accuracy;
    j["weighted"] = {{"precision", r.weighted_precision},
                     {"recall", r.weighted_recall},
                     {"f1", r.weighted_f1}};
    j["macro"] = {{"precision", r.macro_precision},
                  {"recall", r.macro_recall},
                  {"f1", r.macro_f1}};
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t k = 0; k < r.precision.size(); ++k) {
        per.push_back({{"class", class_names.empty() ? std::to_string(k) : class_names[k]},
                       {"precision", r.precision[k]},
                       {"recall", r.recall[k]},
                       {"f1", r.f1[k]},
                       {"support", r.support[k]}});
    }
    j["per_class"] = per;
    j["confusion_counts"] = r.confusion_counts;
    j["confusion_row_pct"] = r.confusion_row_pct;
    return j;
}

}  // namespace cropml
