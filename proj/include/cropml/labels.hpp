#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cropml/common.hpp"

namespace cropml {

// Category order is lexicographic so encodings do not depend on row order.
struct LabelCodec {
    std::vector<std::string> categories;
    std::map<std::string, int> code_of;

    int encode(const std::string& v) const {
        auto it = code_of.find(v);
        if (it == code_of.end()) throw ValueOutOfRange("unknown category: " + v);
        return it->second;
    }
    const std::string& decode(int code) const {
        if (code < 0 || code >= static_cast<int>(categories.size()))
            throw ValueOutOfRange("code out of range");
        return categories[static_cast<std::size_t>(code)];
    }
    int class_count() const { return static_cast<int>(categories.size()); }
};

inline std::pair<LabelCodec, std::vector<int>> encode_labels(const std::vector<std::string>& values) {
    if (values.empty()) throw EmptyInput("encode_labels: no values");
    LabelCodec codec;
    std::set<std::string> distinct(values.begin(), values.end());
    codec.categories.assign(distinct.begin(), distinct.end());
    for (std::size_t i = 0; i < codec.categories.size(); ++i)
        codec.code_of[codec.categories[i]] = static_cast<int>(i);
    std::vector<int> codes;
    codes.reserve(values.size());
    for (const auto& v : values) codes.push_back(codec.code_of.at(v));
    return {std::move(codec), std::move(codes)};
}

struct ClassFilterPolicy {
    int min_samples_per_class = 30;
};

struct RemovedClass {
    int code;
    std::size_t count;
};

// Returns indices (subset of `rows`) whose class has at least the minimum
// sample count. `removed`, when given, receives one entry per dropped class.
inline std::vector<std::size_t> filter_rare_classes(const std::vector<int>& labels,
                                                    const std::vector<std::size_t>& rows,
                                                    const ClassFilterPolicy& policy,
                                                    std::vector<RemovedClass>* removed = nullptr) {
    if (labels.empty()) throw EmptyInput("filter_rare_classes: no labels");
    std::map<int, std::size_t> counts;
    for (std::size_t r : rows) counts[labels[r]]++;

    std::set<int> keep;
    for (const auto& [cls, n] : counts) {
        if (static_cast<int>(n) >= policy.min_samples_per_class) {
            keep.insert(cls);
        } else if (removed) {
            removed->push_back({cls, n});
        }
    }
    if (keep.empty()) throw AllClassesFiltered("no class meets min_samples_per_class");

    std::vector<std::size_t> retained;
    for (std::size_t r : rows)
        if (keep.count(labels[r])) retained.push_back(r);
    return retained;
}

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

// Stratified train/test split over `rows`. Per-class test counts are
// round(n_c * fraction), clamped so neither side loses a whole class.
inline SplitIndices stratified_split(const std::vector<int>& labels,
                                     const std::vector<std::size_t>& rows,
                                     double test_fraction, std::uint64_t seed) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0)
        throw ValueOutOfRange("test_fraction must be in (0,1)");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t r : rows) by_class[labels[r]].push_back(r);
    for (const auto& [cls, idx] : by_class)
        if (idx.size() < 2) throw ClassTooSmall("class " + std::to_string(cls) + " has < 2 samples");

    SplitIndices split;
    split.seed = seed;
    for (auto& [cls, idx] : by_class) {
        Rng rng(derive_seed(seed, 0x517u + static_cast<std::uint64_t>(cls)));
        rng.shuffle(idx);
        auto n_test = static_cast<std::size_t>(
            std::llround(static_cast<double>(idx.size()) * test_fraction));
        n_test = std::min(std::max<std::size_t>(n_test, 1), idx.size() - 1);
        split.test.insert(split.test.end(), idx.begin(), idx.begin() + n_test);
        split.train.insert(split.train.end(), idx.begin() + n_test, idx.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

}  // namespace cropml
