#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "cropml/models.hpp"
#include "cropml/synthetic.hpp"
#include "cropml/tuning.hpp"

using namespace cropml;

TEST_CASE("stratified_kfold: per-class balance within one sample") {
    // 7 of each class into 3 folds: class counts per fold are 2 or 3
    std::vector<int> labels;
    for (int i = 0; i < 7; ++i) labels.push_back(0);
    for (int i = 0; i < 7; ++i) labels.push_back(1);

    auto folds = stratified_kfold(labels, 3, 99);
    REQUIRE(folds.size() == 3);

    std::set<std::size_t> seen;
    for (const auto& f : folds) {
        int c0 = 0, c1 = 0;
        for (std::size_t i : f) {
            CHECK(seen.count(i) == 0);
            seen.insert(i);
            (labels[i] == 0 ? c0 : c1)++;
        }
        CHECK((c0 == 2 || c0 == 3));
        CHECK((c1 == 2 || c1 == 3));
        CHECK(std::is_sorted(f.begin(), f.end()));
    }
    CHECK(seen.size() == labels.size());
}

TEST_CASE("stratified_kfold: determinism, seed sensitivity, and guards") {
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) labels.push_back(i % 4);

    auto a = stratified_kfold(labels, 5, 7);
    auto b = stratified_kfold(labels, 5, 7);
    CHECK(a == b);
    auto c = stratified_kfold(labels, 5, 8);
    CHECK(a != c);

    CHECK_THROWS_AS(stratified_kfold(labels, 1, 7), FoldTooSmall);
    std::vector<int> tiny = {0, 0, 0, 1, 1};  // class 1 has 2 < k=3
    CHECK_THROWS_AS(stratified_kfold(tiny, 3, 7), ClassSmallerThanK);
}

TEST_CASE("stratified_kfold: arbitrary class sizes split evenly") {
    Rng rng(321);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> labels;
        int k = 2 + static_cast<int>(rng.next_index(4));
        std::map<int, int> per_class;
        for (int cls = 0; cls < 3; ++cls) {
            int n = k + static_cast<int>(rng.next_index(30));
            per_class[cls] = n;
            for (int i = 0; i < n; ++i) labels.push_back(cls);
        }
        auto folds = stratified_kfold(labels, k, rng.next_u64());
        for (const auto& f : folds) {
            std::map<int, int> cnt;
            for (std::size_t i : f) cnt[labels[i]]++;
            for (auto& [cls, n] : per_class) {
                int lo = n / k, hi = lo + (n % k ? 1 : 0);
                CHECK(cnt[cls] >= lo);
                CHECK(cnt[cls] <= hi);
            }
        }
    }
}

TEST_CASE("compute_metrics: worked example with hand-computed values") {
    // truth A A B B, predicted A B B B
    std::vector<int> y_true = {0, 0, 1, 1};
    std::vector<int> y_pred = {0, 1, 1, 1};
    auto rep = compute_metrics(y_true, y_pred, 2);

    CHECK(rep.accuracy == Catch::Approx(0.75));
    CHECK(rep.precision[0] == Catch::Approx(1.0));
    CHECK(rep.recall[0] == Catch::Approx(0.5));
    CHECK(rep.f1[0] == Catch::Approx(2.0 / 3.0));
    CHECK(rep.precision[1] == Catch::Approx(2.0 / 3.0));
    CHECK(rep.recall[1] == Catch::Approx(1.0));
    CHECK(rep.f1[1] == Catch::Approx(0.8));
    CHECK(rep.support[0] == 2);
    CHECK(rep.support[1] == 2);

    // weighted aggregates
    CHECK(rep.weighted_precision == Catch::Approx(0.5 * 1.0 + 0.5 * 2.0 / 3.0));
    CHECK(rep.weighted_recall == Catch::Approx(rep.accuracy));
    CHECK(rep.weighted_f1 == Catch::Approx(0.5 * 2.0 / 3.0 + 0.5 * 0.8));
    CHECK(rep.macro_f1 == Catch::Approx((2.0 / 3.0 + 0.8) / 2.0));

    // confusion: rows true, cols predicted
    CHECK(rep.confusion_counts[0][0] == 1);
    CHECK(rep.confusion_counts[0][1] == 1);
    CHECK(rep.confusion_counts[1][0] == 0);
    CHECK(rep.confusion_counts[1][1] == 2);
    CHECK(rep.confusion_row_pct[0][0] == Catch::Approx(50.0));
    CHECK(rep.confusion_row_pct[1][1] == Catch::Approx(100.0));
}

TEST_CASE("compute_metrics: zero convention and identities") {
    // class 2 never predicted: precision falls back to 0 and is flagged
    std::vector<int> y_true = {0, 1, 2, 2};
    std::vector<int> y_pred = {0, 1, 1, 0};
    auto rep = compute_metrics(y_true, y_pred, 3);
    CHECK(rep.precision[2] == 0.0);
    CHECK(rep.recall[2] == 0.0);
    CHECK(rep.f1[2] == 0.0);
    CHECK(std::find(rep.zero_division_classes.begin(), rep.zero_division_classes.end(), 2) !=
          rep.zero_division_classes.end());

    // weighted recall equals accuracy on random labelings
    Rng rng(55);
    for (int t = 0; t < 50; ++t) {
        std::vector<int> yt(40), yp(40);
        for (int i = 0; i < 40; ++i) {
            yt[static_cast<std::size_t>(i)] = static_cast<int>(rng.next_index(4));
            yp[static_cast<std::size_t>(i)] = static_cast<int>(rng.next_index(4));
        }
        auto r = compute_metrics(yt, yp, 4);
        CHECK(r.weighted_recall == Catch::Approx(r.accuracy).margin(1e-12));
        CHECK(r.macro_f1 >= 0.0);
        CHECK(r.macro_f1 <= 1.0);
    }

    // metrics are invariant to sample order
    std::vector<int> yt = {0, 0, 1, 1, 2, 2, 0, 1};
    std::vector<int> yp = {0, 1, 1, 2, 2, 0, 0, 1};
    auto base = compute_metrics(yt, yp, 3);
    std::vector<std::size_t> perm = {7, 2, 5, 0, 4, 1, 6, 3};
    std::vector<int> yt2, yp2;
    for (std::size_t i : perm) {
        yt2.push_back(yt[i]);
        yp2.push_back(yp[i]);
    }
    auto shuf = compute_metrics(yt2, yp2, 3);
    CHECK(base.accuracy == shuf.accuracy);
    CHECK(base.weighted_f1 == shuf.weighted_f1);
    CHECK(base.confusion_counts == shuf.confusion_counts);
}

TEST_CASE("confusion_percentages: rows normalize to 100, empty row stays zero") {
    auto pct = confusion_percentages({{3, 1}, {0, 0}});
    CHECK(pct[0][0] == Catch::Approx(75.0));
    CHECK(pct[0][1] == Catch::Approx(25.0));
    CHECK(pct[1][0] == 0.0);
    CHECK(pct[1][1] == 0.0);
}

TEST_CASE("grid_search: expansion, selection, and tie-breaks") {
    Dataset data = make_blobs(90, 4, 3, 4.0, 61);

    SECTION("singleton grid evaluates one cell") {
        GridSpec g;
        g.family = "naive_bayes";
        auto res = grid_search(g, data, 3, "accuracy", 5);
        REQUIRE(res.cells.size() == 1);
        CHECK(res.selected == 0);
        CHECK(res.cells[0].fold_scores.size() == 3);
        CHECK(res.best_params().empty());
    }

    SECTION("cartesian product size and shared folds") {
        GridSpec g;
        g.family = "knn";
        g.candidates = {{"k", {1, 3, 5}}, {"metric", {"euclidean", "manhattan"}}};
        auto res = grid_search(g, data, 3, "accuracy", 5);
        CHECK(res.cells.size() == 6);
        for (const auto& c : res.cells) CHECK(c.fold_scores.size() == 3);
        // best cell attains the maximum mean
        for (const auto& c : res.cells) CHECK(res.cells[res.selected].mean >= c.mean - 1e-12);
    }

    SECTION("deterministic repeat") {
        GridSpec g;
        g.family = "decision_tree";
        g.candidates = {{"max_depth", {2, 4}}};
        auto r1 = grid_search(g, data, 3, "weighted_f1", 9);
        auto r2 = grid_search(g, data, 3, "weighted_f1", 9);
        CHECK(r1.to_json() == r2.to_json());
    }

    SECTION("budget guard and unknown metric") {
        GridSpec g;
        g.family = "knn";
        g.candidates = {{"k", {1, 3}}};
        g.budget = 1;
        CHECK_THROWS_AS(grid_search(g, data, 3, "accuracy", 5), BudgetExceeded);
        g.budget = 10;
        CHECK_THROWS_AS(grid_search(g, data, 3, "mse", 5), UnsupportedMethod);
    }
}

TEST_CASE("grid_search: a cell known to dominate is selected") {
    // k=1 on well-separated blobs beats a k as large as the training fold,
    // which collapses toward the prior
    Dataset data = make_blobs(60, 3, 2, 6.0, 17);
    GridSpec g;
    g.family = "knn";
    g.candidates = {{"k", {1, 39}}};
    auto res = grid_search(g, data, 3, "accuracy", 11);
    CHECK(res.best_params().at("k").get<int>() == 1);
}

TEST_CASE("default_grid covers every classical family") {
    for (const auto& fam : classical_families()) {
        auto g = default_grid(fam, 10);
        CHECK(g.family == fam);
        CHECK(g.cell_count() >= 1);
        CHECK(g.cell_count() <= g.budget);
    }
    CHECK(default_grid("knn", 10).cell_count() == 8);
    CHECK(default_grid("gradient_boosting", 10).cell_count() == 8);
    CHECK(default_grid("naive_bayes", 10).cell_count() == 1);
}

TEST_CASE("evaluate_all ranks by accuracy and formats the table") {
    Dataset tr = make_blobs(120, 4, 3, 4.0, 33);
    Dataset te = make_blobs(60, 4, 3, 4.0, 34);

    std::vector<std::pair<std::string, ModelPtr>> models = {
        {"KNN", fit_model("knn", tr, {{"k", 3}})},
        {"Naive Bayes", fit_model("naive_bayes", tr, {})},
        {"Decision Tree", fit_model("decision_tree", tr, {})},
    };
    auto table = evaluate_all(models, te);
    REQUIRE(table.size() == 3);
    for (std::size_t i = 1; i < table.size(); ++i)
        CHECK(table[i - 1].report.accuracy >= table[i].report.accuracy);

    auto csv = ranked_table_csv(table);
    CHECK(csv.rfind("Model,Accuracy,Precision,Recall,F1-Score\n", 0) == 0);
    CHECK(csv.find("Naive Bayes") != std::string::npos);
    // 4 header fields imply 4 commas per data line
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
