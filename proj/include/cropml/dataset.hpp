#pragma once

#include <string>
#include <vector>

#include "cropml/common.hpp"

namespace cropml {

// Standardized feature matrix plus integer labels. Invariants: all entries
// finite, labels in [0, class_count).
struct Dataset {
    Matrix features;                        // n x d
    std::vector<int> labels;                // n
    std::vector<std::string> feature_names; // d
    std::vector<std::string> class_names;   // K

    std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
    int dim() const { return static_cast<int>(features.cols()); }
    int class_count() const { return static_cast<int>(class_names.size()); }

    Dataset subset(const std::vector<std::size_t>& idx) const {
        Dataset out;
        out.feature_names = feature_names;
        out.class_names = class_names;
        out.features.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
        out.labels.reserve(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.features.row(static_cast<Eigen::Index>(i)) =
                features.row(static_cast<Eigen::Index>(idx[i]));
            out.labels.push_back(labels[idx[i]]);
        }
        return out;
    }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(static_cast<std::size_t>(class_count()), 0);
        for (int y : labels) counts[static_cast<std::size_t>(y)]++;
        return counts;
    }

    void validate() const {
        if (features.rows() == 0 || features.cols() == 0)
            throw EmptyInput("Dataset: empty feature matrix");
        if (static_cast<std::size_t>(features.rows()) != labels.size())
            throw DimensionMismatch("Dataset: labels/features row mismatch");
        check_finite(features, "Dataset features");
        int K = class_count();
        for (int y : labels)
            if (y < 0 || y >= K) throw ValueOutOfRange("Dataset: label out of range");
    }
};

}  // namespace cropml
