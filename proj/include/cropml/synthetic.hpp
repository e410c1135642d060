#pragma once

#include <string>
#include <vector>

#include "cropml/dataset.hpp"

namespace cropml {

// Seeded Gaussian-blob generator used by the hermetic acceptance run and
// the statistical tests. Class centers are drawn on a sphere of radius
// `separation`; samples get unit-variance isotropic noise.
inline Dataset make_blobs(std::size_t n, int d, int classes, double separation,
                          std::uint64_t seed, int informative = -1) {
    if (informative < 0 || informative > d) informative = d;
    Dataset data;
    data.features.resize(static_cast<Eigen::Index>(n), d);
    data.labels.reserve(n);
    for (int k = 0; k < classes; ++k) data.class_names.push_back("class_" + std::to_string(k));
    for (int j = 0; j < d; ++j) data.feature_names.push_back("f" + std::to_string(j));

    Rng center_rng(derive_seed(seed, 0xb10b));
    Matrix centers = Matrix::Zero(classes, d);
    for (int k = 0; k < classes; ++k) {
        double norm2 = 0;
        for (int j = 0; j < informative; ++j) {
            centers(k, j) = center_rng.next_gaussian();
            norm2 += centers(k, j) * centers(k, j);
        }
        if (norm2 > 0) centers.row(k).head(informative) *= separation / std::sqrt(norm2);
    }

    Rng rng(derive_seed(seed, 0xda7a));
    for (std::size_t i = 0; i < n; ++i) {
        int k = static_cast<int>(i % static_cast<std::size_t>(classes));
        for (int j = 0; j < d; ++j)
            data.features(static_cast<Eigen::Index>(i), j) = centers(k, j) + rng.next_gaussian();
        data.labels.push_back(k);
    }
    return data;
}

}  // namespace cropml
