#pragma once

#include <string>
#include <vector>

#include "cropml/csv.hpp"
#include "cropml/dataset.hpp"
#include "cropml/io_util.hpp"
#include "cropml/labels.hpp"
#include "cropml/model.hpp"
#include "cropml/preprocess.hpp"

namespace cropml {

// Dataset persistence: one CSV per partition (features in %.17g, final
// column the class name) plus a shared meta JSON. %.17g keeps reruns
// byte-identical and the round-trip exact.

inline std::string dataset_to_csv(const Dataset& d) {
    std::string out;
    for (const auto& n : d.feature_names) out += n + ",";
    out += "label\n";
    char buf[64];
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (int j = 0; j < d.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g,",
                          d.features(static_cast<Eigen::Index>(i), j));
            out += buf;
        }
        out += d.class_names[static_cast<std::size_t>(d.labels[i])] + "\n";
    }
    return out;
}

inline Dataset dataset_from_csv(const fs::path& path, const std::vector<std::string>& class_names) {
    RawTable t = parse_csv(path.string());
    if (t.header.empty() || t.header.back() != "label")
        throw MissingData("dataset csv missing label column: " + path.string());
    Dataset d;
    d.class_names = class_names;
    auto dcols = t.column_count() - 1;
    for (std::size_t c = 0; c < dcols; ++c) d.feature_names.push_back(t.header[c]);
    d.features.resize(static_cast<Eigen::Index>(t.row_count()), static_cast<Eigen::Index>(dcols));
    LabelCodec codec;
    codec.categories = class_names;
    for (std::size_t i = 0; i < class_names.size(); ++i)
        codec.code_of[class_names[i]] = static_cast<int>(i);
    for (std::size_t r = 0; r < t.row_count(); ++r) {
        for (std::size_t c = 0; c < dcols; ++c) {
            if (!t.rows[r][c].is_number()) throw MissingData("non-numeric dataset cell");
            d.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                t.rows[r][c].number;
        }
        const Cell& lc = t.rows[r].back();
        d.labels.push_back(codec.encode(lc.is_text() ? lc.text : std::to_string(lc.number)));
    }
    d.validate();
    return d;
}

inline nlohmann::json scaler_to_json(const Scaler& s) {
    return {{"mean", vector_to_json(s.mean)},
            {"std", vector_to_json(s.std)},
            {"constant", s.constant},
            {"fitted_on", s.fitted_on}};
}

inline Scaler scaler_from_json(const nlohmann::json& j) {
    Scaler s;
    s.mean = vector_from_json(j.at("mean"));
    s.std = vector_from_json(j.at("std"));
    s.constant = j.at("constant").get<std::vector<bool>>();
    s.fitted_on = j.at("fitted_on").get<std::size_t>();
    return s;
}

}  // namespace cropml
