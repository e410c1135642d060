#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cropml/common.hpp"
#include "cropml/csv.hpp"
#include "cropml/dataset.hpp"
#include "cropml/labels.hpp"

namespace cropml {

using json = nlohmann::json;

// --- IQR outlier bounds (Tukey fences) ----------------------------------

struct IqrBounds {
    std::vector<int> columns;  // feature indices the bounds apply to
    std::vector<double> q1, q3, lower, upper;
    double multiplier = 1.5;
};

// Quantile by linear interpolation between closest order statistics.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    double h = p * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline IqrBounds fit_iqr(const Matrix& features, const std::vector<int>& columns,
                         double multiplier = 1.5) {
    if (features.rows() < 4) throw TooFewRows("fit_iqr needs >= 4 rows");
    IqrBounds b;
    b.columns = columns;
    b.multiplier = multiplier;
    for (int c : columns) {
        std::vector<double> col(static_cast<std::size_t>(features.rows()));
        for (Eigen::Index r = 0; r < features.rows(); ++r)
            col[static_cast<std::size_t>(r)] = features(r, c);
        std::sort(col.begin(), col.end());
        double q1 = quantile_sorted(col, 0.25);
        double q3 = quantile_sorted(col, 0.75);
        double iqr = q3 - q1;
        b.q1.push_back(q1);
        b.q3.push_back(q3);
        b.lower.push_back(q1 - multiplier * iqr);
        b.upper.push_back(q3 + multiplier * iqr);
    }
    return b;
}

inline std::vector<std::size_t> apply_iqr(const Matrix& features, const IqrBounds& b) {
    for (int c : b.columns)
        if (c < 0 || c >= features.cols()) throw DimensionMismatch("apply_iqr: column out of range");
    std::vector<std::size_t> retained;
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
        bool keep = true;
        for (std::size_t i = 0; i < b.columns.size(); ++i) {
            double v = features(r, b.columns[i]);
            if (v < b.lower[i] || v > b.upper[i]) {
                keep = false;
                break;
            }
        }
        if (keep) retained.push_back(static_cast<std::size_t>(r));
    }
    return retained;
}

// --- z-score scaler (population std; constant columns map to 0) ----------

struct Scaler {
    Vector mean;
    Vector std;
    std::vector<bool> constant;
    std::size_t fitted_on = 0;

    static constexpr double kConstantEps = 1e-12;
};

inline Scaler fit_scaler(const Matrix& features) {
    if (features.rows() < 2) throw TooFewRows("fit_scaler needs >= 2 rows");
    Scaler s;
    auto n = static_cast<double>(features.rows());
    s.mean = features.colwise().mean();
    Matrix centered = features.rowwise() - s.mean.transpose();
    s.std = (centered.array().square().colwise().sum() / n).sqrt();
    s.fitted_on = static_cast<std::size_t>(features.rows());
    s.constant.resize(static_cast<std::size_t>(features.cols()));
    for (Eigen::Index c = 0; c < features.cols(); ++c)
        s.constant[static_cast<std::size_t>(c)] = s.std(c) < Scaler::kConstantEps;
    return s;
}

inline Matrix apply_scaler(const Matrix& features, const Scaler& s) {
    if (features.cols() != s.mean.size())
        throw DimensionMismatch("apply_scaler: feature width mismatch");
    Matrix out = features.rowwise() - s.mean.transpose();
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        if (s.constant[static_cast<std::size_t>(c)])
            out.col(c).setZero();
        else
            out.col(c) /= s.std(c);
    }
    return out;
}

// --- SMOTE ----------------------------------------------------------------

struct SmoteConfig {
    int k_neighbors = 5;
    std::uint64_t seed = 0;
    // target is always match-majority
};

// Oversample every minority class up to the majority count. Synthetic point
// = x + u (x_nn - x), u in [0,1), x_nn one of x's k nearest same-class
// neighbors (Euclidean, ties to lowest row index). Originals keep their
// order and come first.
inline Dataset smote_oversample(const Dataset& train, const SmoteConfig& cfg) {
    train.validate();
    auto counts = train.class_counts();
    std::size_t majority = *std::max_element(counts.begin(), counts.end());

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < train.size(); ++i) by_class[train.labels[i]].push_back(i);

    for (const auto& [cls, idx] : by_class) {
        if (idx.size() < majority && static_cast<int>(idx.size()) <= cfg.k_neighbors)
            throw ClassSmallerThanK("class " + std::to_string(cls) + " has " +
                                    std::to_string(idx.size()) + " samples, k=" +
                                    std::to_string(cfg.k_neighbors));
    }

    std::vector<Vector> synth_rows;
    std::vector<int> synth_labels;

    for (const auto& [cls, idx] : by_class) {
        std::size_t need = majority - idx.size();
        if (need == 0) continue;

        // k nearest same-class neighbors per member
        std::size_t m = idx.size();
        std::vector<std::vector<std::size_t>> nn(m);
        for (std::size_t i = 0; i < m; ++i) {
            std::vector<std::pair<double, std::size_t>> dist;
            dist.reserve(m - 1);
            for (std::size_t j = 0; j < m; ++j) {
                if (j == i) continue;
                double d2 = (train.features.row(static_cast<Eigen::Index>(idx[i])) -
                             train.features.row(static_cast<Eigen::Index>(idx[j])))
                                .squaredNorm();
                dist.emplace_back(d2, j);
            }
            std::sort(dist.begin(), dist.end());
            for (int k = 0; k < cfg.k_neighbors; ++k) nn[i].push_back(dist[static_cast<std::size_t>(k)].second);
        }

        Rng rng(derive_seed(cfg.seed, 0x510feu + static_cast<std::uint64_t>(cls)));
        for (std::size_t s = 0; s < need; ++s) {
            std::size_t i = rng.next_index(m);
            std::size_t j = nn[i][rng.next_index(nn[i].size())];
            double u = rng.next_double();
            Vector x = train.features.row(static_cast<Eigen::Index>(idx[i]));
            Vector xn = train.features.row(static_cast<Eigen::Index>(idx[j]));
            synth_rows.push_back(x + u * (xn - x));
            synth_labels.push_back(cls);
        }
    }

    Dataset out;
    out.feature_names = train.feature_names;
    out.class_names = train.class_names;
    auto n_out = train.size() + synth_rows.size();
    out.features.resize(static_cast<Eigen::Index>(n_out), train.features.cols());
    out.features.topRows(train.features.rows()) = train.features;
    out.labels = train.labels;
    for (std::size_t i = 0; i < synth_rows.size(); ++i) {
        out.features.row(train.features.rows() + static_cast<Eigen::Index>(i)) =
            synth_rows[i].transpose();
        out.labels.push_back(synth_labels[i]);
    }
    return out;
}

// --- full pipeline --------------------------------------------------------

struct PipelineConfig {
    std::string label_column = "crop";
    std::vector<std::string> categorical_columns;  // encoded to integer codes
    std::string soil_color_column;                 // optional; normalized first
    std::map<std::string, std::string> soil_color_synonyms;
    std::vector<std::string> iqr_columns;          // empty = all numeric features
    double iqr_multiplier = 1.5;
    int min_samples_per_class = 30;
    double test_fraction = 0.2;
    int smote_k = 5;
    std::uint64_t seed = 42;
    bool apply_smote = true;
    bool apply_iqr_filter = true;
};

inline void to_json(json& j, const PipelineConfig& c) {
    j = json{{"label_column", c.label_column},
             {"categorical_columns", c.categorical_columns},
             {"soil_color_column", c.soil_color_column},
             {"soil_color_synonyms", c.soil_color_synonyms},
             {"iqr_columns", c.iqr_columns},
             {"iqr_multiplier", c.iqr_multiplier},
             {"min_samples_per_class", c.min_samples_per_class},
             {"test_fraction", c.test_fraction},
             {"smote_k", c.smote_k},
             {"seed", c.seed},
             {"apply_smote", c.apply_smote},
             {"apply_iqr_filter", c.apply_iqr_filter}};
}

inline void from_json(const json& j, PipelineConfig& c) {
    c = PipelineConfig{};
    if (j.contains("label_column")) j.at("label_column").get_to(c.label_column);
    if (j.contains("categorical_columns")) j.at("categorical_columns").get_to(c.categorical_columns);
    if (j.contains("soil_color_column")) j.at("soil_color_column").get_to(c.soil_color_column);
    if (j.contains("soil_color_synonyms")) j.at("soil_color_synonyms").get_to(c.soil_color_synonyms);
    if (j.contains("iqr_columns")) j.at("iqr_columns").get_to(c.iqr_columns);
    if (j.contains("iqr_multiplier")) j.at("iqr_multiplier").get_to(c.iqr_multiplier);
    if (j.contains("min_samples_per_class")) j.at("min_samples_per_class").get_to(c.min_samples_per_class);
    if (j.contains("test_fraction")) j.at("test_fraction").get_to(c.test_fraction);
    if (j.contains("smote_k")) j.at("smote_k").get_to(c.smote_k);
    if (j.contains("seed")) j.at("seed").get_to(c.seed);
    if (j.contains("apply_smote")) j.at("apply_smote").get_to(c.apply_smote);
    if (j.contains("apply_iqr_filter")) j.at("apply_iqr_filter").get_to(c.apply_iqr_filter);
}

struct PipelineResult {
    Dataset train;
    Dataset test;
    Scaler scaler;
    LabelCodec codec;
    json provenance;  // per-stage row counts and removals
};

// Stage order is fixed: encode -> rare-class filter -> IQR on all retained
// rows -> stratified split -> scaler fit on train only -> SMOTE on train
// only. The test partition is never resampled and never touches the scaler
// fit.
inline PipelineResult run_pipeline(const RawTable& raw_in, const PipelineConfig& cfg) {
    RawTable raw = raw_in;
    json prov;
    prov["parsed_rows"] = raw.row_count();

    if (!cfg.soil_color_column.empty())
        raw = normalize_soil_color(std::move(raw), cfg.soil_color_column, cfg.soil_color_synonyms);

    std::size_t label_col = raw.column_index(cfg.label_column);

    std::vector<std::size_t> cat_cols;
    for (const auto& name : cfg.categorical_columns) {
        std::size_t c = raw.column_index(name);
        if (c != label_col) cat_cols.push_back(c);
    }
    auto is_categorical = [&](std::size_t c) {
        return std::find(cat_cols.begin(), cat_cols.end(), c) != cat_cols.end();
    };

    // Drop rows with any missing cell, and rows whose numeric columns hold
    // text (unparseable entries).
    std::vector<std::size_t> complete;
    for (std::size_t r = 0; r < raw.row_count(); ++r) {
        bool ok = true;
        for (std::size_t c = 0; c < raw.column_count() && ok; ++c) {
            const Cell& cell = raw.rows[r][c];
            if (cell.is_missing()) ok = false;
            if (c != label_col && !is_categorical(c) && !cell.is_number()) ok = false;
        }
        if (ok) complete.push_back(r);
    }
    prov["rows_dropped_missing"] = raw.row_count() - complete.size();
    if (complete.empty()) throw EmptyInput("run_pipeline: no complete rows");

    // Encode labels over complete rows.
    std::vector<std::string> label_values;
    for (std::size_t r : complete) {
        const Cell& cell = raw.rows[r][label_col];
        label_values.push_back(cell.is_text() ? cell.text
                                              : std::to_string(cell.number));
    }
    auto [codec, codes_local] = encode_labels(label_values);
    // full-length label vector indexed by raw row
    std::vector<int> labels(raw.row_count(), -1);
    for (std::size_t i = 0; i < complete.size(); ++i) labels[complete[i]] = codes_local[i];

    // Encode categorical feature columns (lexicographic codecs of their own).
    std::map<std::size_t, LabelCodec> cat_codecs;
    for (std::size_t c : cat_cols) {
        std::vector<std::string> vals;
        for (std::size_t r : complete) {
            const Cell& cell = raw.rows[r][c];
            vals.push_back(cell.is_text() ? cell.text : std::to_string(cell.number));
        }
        auto [cc, _] = encode_labels(vals);
        cat_codecs[c] = std::move(cc);
    }

    // Rare-class filter.
    std::vector<RemovedClass> removed;
    ClassFilterPolicy policy{cfg.min_samples_per_class};
    std::vector<std::size_t> retained = filter_rare_classes(labels, complete, policy, &removed);
    json removed_json = json::array();
    for (const auto& rc : removed)
        removed_json.push_back({{"class", codec.decode(rc.code)}, {"count", rc.count}});
    prov["rare_classes_removed"] = removed_json;
    prov["rows_after_rare_filter"] = retained.size();

    // Re-encode labels over surviving classes so codes stay dense in [0,K).
    std::vector<std::string> kept_values;
    for (std::size_t r : retained) kept_values.push_back(codec.decode(labels[r]));
    auto [codec2, codes2] = encode_labels(kept_values);
    std::vector<int> labels2(raw.row_count(), -1);
    for (std::size_t i = 0; i < retained.size(); ++i) labels2[retained[i]] = codes2[i];

    // Materialize the feature matrix for retained rows.
    std::vector<std::string> feature_names;
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < raw.column_count(); ++c) {
        if (c == label_col) continue;
        feature_cols.push_back(c);
        feature_names.push_back(raw.header[c]);
    }
    Matrix X(static_cast<Eigen::Index>(retained.size()),
             static_cast<Eigen::Index>(feature_cols.size()));
    for (std::size_t i = 0; i < retained.size(); ++i) {
        for (std::size_t fc = 0; fc < feature_cols.size(); ++fc) {
            std::size_t c = feature_cols[fc];
            const Cell& cell = raw.rows[retained[i]][c];
            double v;
            if (is_categorical(c)) {
                const std::string key =
                    cell.is_text() ? cell.text : std::to_string(cell.number);
                v = static_cast<double>(cat_codecs.at(c).encode(key));
            } else {
                v = cell.number;
            }
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(fc)) = v;
        }
    }

    // IQR outlier removal on numeric (non-categorical) features, or on the
    // configured subset.
    std::vector<std::size_t> after_iqr(retained.size());
    std::iota(after_iqr.begin(), after_iqr.end(), 0);
    if (cfg.apply_iqr_filter) {
        std::vector<int> iqr_cols;
        if (cfg.iqr_columns.empty()) {
            for (std::size_t fc = 0; fc < feature_cols.size(); ++fc)
                if (!is_categorical(feature_cols[fc])) iqr_cols.push_back(static_cast<int>(fc));
        } else {
            for (const auto& name : cfg.iqr_columns) {
                auto it = std::find(feature_names.begin(), feature_names.end(), name);
                if (it == feature_names.end()) throw MissingColumn(name);
                iqr_cols.push_back(static_cast<int>(it - feature_names.begin()));
            }
        }
        IqrBounds bounds = fit_iqr(X, iqr_cols, cfg.iqr_multiplier);
        after_iqr = apply_iqr(X, bounds);
    }
    prov["rows_after_iqr"] = after_iqr.size();

    // Collapse to the post-IQR matrix and label vector.
    Matrix X2(static_cast<Eigen::Index>(after_iqr.size()), X.cols());
    std::vector<int> y2;
    for (std::size_t i = 0; i < after_iqr.size(); ++i) {
        X2.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(after_iqr[i]));
        y2.push_back(labels2[retained[after_iqr[i]]]);
    }

    // A class may dip below 2 samples after IQR; drop it rather than fail.
    {
        std::vector<std::size_t> rows(y2.size());
        std::iota(rows.begin(), rows.end(), 0);
        std::vector<std::size_t> ok = filter_rare_classes(y2, rows, ClassFilterPolicy{2});
        if (ok.size() != rows.size()) {
            Matrix X3(static_cast<Eigen::Index>(ok.size()), X2.cols());
            std::vector<int> y3;
            for (std::size_t i = 0; i < ok.size(); ++i) {
                X3.row(static_cast<Eigen::Index>(i)) = X2.row(static_cast<Eigen::Index>(ok[i]));
                y3.push_back(y2[ok[i]]);
            }
            std::vector<std::string> vals;
            for (int y : y3) vals.push_back(codec2.decode(y));
            auto [codec3, codes3] = encode_labels(vals);
            codec2 = std::move(codec3);
            y2 = std::move(codes3);
            X2 = std::move(X3);
        }
    }

    // Stratified split.
    std::vector<std::size_t> all_rows(y2.size());
    std::iota(all_rows.begin(), all_rows.end(), 0);
    SplitIndices split = stratified_split(y2, all_rows, cfg.test_fraction, cfg.seed);
    prov["train_rows"] = split.train.size();
    prov["test_rows"] = split.test.size();

    Dataset train_raw, test_raw;
    train_raw.feature_names = test_raw.feature_names = feature_names;
    train_raw.class_names = test_raw.class_names = codec2.categories;
    auto take = [&](const std::vector<std::size_t>& idx, Dataset& out) {
        out.features.resize(static_cast<Eigen::Index>(idx.size()), X2.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.features.row(static_cast<Eigen::Index>(i)) =
                X2.row(static_cast<Eigen::Index>(idx[i]));
            out.labels.push_back(y2[idx[i]]);
        }
    };
    take(split.train, train_raw);
    take(split.test, test_raw);

    // Scaler on train only.
    Scaler scaler = fit_scaler(train_raw.features);
    train_raw.features = apply_scaler(train_raw.features, scaler);
    test_raw.features = apply_scaler(test_raw.features, scaler);

    // SMOTE on train only.
    Dataset train_final = train_raw;
    if (cfg.apply_smote) {
        auto counts = train_raw.class_counts();
        bool balanced = std::adjacent_find(counts.begin(), counts.end(),
                                           std::not_equal_to<>()) == counts.end();
        if (!balanced)
            train_final = smote_oversample(train_raw, SmoteConfig{cfg.smote_k, cfg.seed});
    }
    prov["train_rows_after_smote"] = train_final.size();
    {
        json cc = json::object();
        auto counts = train_final.class_counts();
        for (std::size_t k = 0; k < counts.size(); ++k)
            cc[codec2.categories[k]] = counts[k];
        prov["train_class_counts"] = cc;
    }
    prov["retained_samples"] = X2.rows();

    PipelineResult res;
    res.train = std::move(train_final);
    res.test = std::move(test_raw);
    res.scaler = std::move(scaler);
    res.codec = std::move(codec2);
    res.provenance = std::move(prov);
    res.train.validate();
    res.test.validate();
    return res;
}

}  // namespace cropml
