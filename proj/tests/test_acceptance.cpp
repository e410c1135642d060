// Acceptance suite: one gated criterion per test case, each printing a
// single PASS / FAIL / SKIP line. Tolerances are pinned in the code below.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <sys/wait.h>
#include <unistd.h>

#include "cropml/cropml.hpp"
#include "cropml/dataset_io.hpp"
#include "cropml/synthetic.hpp"

namespace fs = std::filesystem;
using namespace cropml;

namespace {

void report(int num, const std::string& what, bool ok) {
    std::cout << "[criterion " << (num < 10 ? "0" : "") << num << "] "
              << (ok ? "PASS" : "FAIL") << " - " << what << "\n";
    CHECK(ok);
}

void report_skip(int num, const std::string& what, const std::string& why) {
    std::cout << "[criterion " << (num < 10 ? "0" : "") << num << "] SKIP - " << what << " ("
              << why << ")\n";
    SUCCEED();
}

// shared results of the synthetic desk-scale run (criterion 2), reused by
// criterion 11
struct SyntheticRun {
    bool done = false;
    Matrix test_probs;
    std::vector<int> test_labels;
};
SyntheticRun g_synth;

// scaled-down network shapes for the timed synthetic run; the criterion
// gates accuracy and runtime, not hyperparameters
nn::ArchitectureSpec synth_spec(const std::string& variant, int d, int K) {
    nn::ArchitectureSpec s;
    s.variant = variant;
    s.input_dim = d;
    s.class_count = K;
    s.seed = 42;
    s.deep_widths = {64, 32};
    s.residual_width = 48;
    s.residual_blocks = 2;
    s.attention_embed = 8;
    s.attention_head_hidden = 32;
    s.pyramid_widths = {64, 32};
    return s;
}

double model_accuracy(const Matrix& P, const std::vector<int>& y) {
    std::size_t ok = 0;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        Eigen::Index arg = 0;
        P.row(i).maxCoeff(&arg);
        if (static_cast<int>(arg) == y[static_cast<std::size_t>(i)]) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(P.rows());
}

// probe that provably ignores its last feature (criterion 8)
class FirstFeatureProbe : public Model {
public:
    std::string family() const override { return "probe"; }
    int class_count() const override { return 2; }
    Matrix predict_proba(const Matrix& X) const override {
        Matrix P(X.rows(), 2);
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            double s = 1.0 / (1.0 + std::exp(-3.0 * X(i, 0)));
            P(i, 0) = s;
            P(i, 1) = 1.0 - s;
        }
        return P;
    }
    nlohmann::json to_json() const override { return {{"family", "probe"}}; }
};

}  // namespace

TEST_CASE("criterion 1: full-scale reproduction on the public dataset") {
    const char* csv = std::getenv("CROPML_ATA_CSV");
    if (!csv || !*csv) {
        report_skip(1, "public-dataset reproduction",
                    "set CROPML_ATA_CSV to the downloaded CSV to enable");
        return;
    }
    auto t0 = std::chrono::steady_clock::now();

    RawTable raw = parse_csv(csv);
    PipelineConfig pcfg;  // defaults: crop label, IQR 1.5, min 30, SMOTE, seed 42
    const char* cfg_env = std::getenv("CROPML_ATA_CONFIG");
    if (cfg_env && *cfg_env) pcfg = nlohmann::json::parse(read_file(cfg_env)).get<PipelineConfig>();
    PipelineResult res = run_pipeline(raw, pcfg);

    std::size_t retained = res.train.size() + res.test.size();
    // retained-rows target 2963 +/- 10%
    bool rows_ok = retained >= 2667 && retained <= 3259;

    int d = res.train.dim(), K = res.train.class_count();
    std::vector<nn::ArchitectureSpec> specs;
    for (const std::string v : {"deep", "residual", "self_attention", "feature_pyramid"})
        specs.push_back(synth_spec(v, d, K));
    EnsembleConfig ec;
    ec.base_optimizer.epochs = 40;
    ec.base_optimizer.patience = 10;
    auto ens = train_meta_learner(specs, res.train, ec);

    auto rep = compute_metrics(res.test.labels, ens->predict(res.test.features), K);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(1,
           "retained rows in [2667, 3259] and ensemble weighted F1 >= 0.95 within 900 s "
           "(rows=" + std::to_string(retained) + ", f1=" + std::to_string(rep.weighted_f1) +
               ", t=" + std::to_string(secs) + "s)",
           rows_ok && rep.weighted_f1 >= 0.95 && secs <= 900.0);
}

TEST_CASE("criterion 2: synthetic desk-scale ensemble run") {
    auto t0 = std::chrono::steady_clock::now();

    Dataset blobs = make_blobs(3000, 29, 8, 4.0, 4242);
    std::vector<std::size_t> all(blobs.size());
    std::iota(all.begin(), all.end(), 0);
    auto split = stratified_split(blobs.labels, all, 0.2, 42);
    Dataset train = blobs.subset(split.train);
    Dataset test = blobs.subset(split.test);

    std::vector<nn::ArchitectureSpec> specs;
    for (const std::string v : {"deep", "residual", "self_attention", "feature_pyramid"})
        specs.push_back(synth_spec(v, 29, 8));
    EnsembleConfig ec;  // 5 folds
    ec.base_optimizer.epochs = 20;
    ec.base_optimizer.patience = 5;
    auto ens = train_meta_learner(specs, train, ec);

    Matrix P = ens->predict_proba(test.features);
    double ens_acc = model_accuracy(P, test.labels);
    double best_base = 0;
    for (const auto& base : ens->bases)
        best_base = std::max(best_base, model_accuracy(base.forward(test.features), test.labels));

    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(2,
           "ensemble accuracy >= 0.95 and >= best base - 0.005 within 300 s (acc=" +
               std::to_string(ens_acc) + ", best base=" + std::to_string(best_base) +
               ", t=" + std::to_string(secs) + "s)",
           ens_acc >= 0.95 && ens_acc >= best_base - 0.005 && secs <= 300.0);

    g_synth.done = true;
    g_synth.test_probs = P;
    g_synth.test_labels = test.labels;
}

TEST_CASE("criterion 3: probability normalization for every family") {
    Dataset train = make_blobs(160, 5, 3, 3.0, 808);
    Rng rng(4096);
    Matrix X(1000, 5);
    for (Eigen::Index r = 0; r < X.rows(); ++r)
        for (Eigen::Index c = 0; c < X.cols(); ++c) X(r, c) = 4.0 * rng.next_gaussian();

    bool ok = true;
    auto check_probs = [&](const Matrix& P) {
        for (Eigen::Index r = 0; r < P.rows(); ++r) {
            if (P.row(r).minCoeff() < 0.0) ok = false;
            if (std::abs(P.row(r).sum() - 1.0) > 1e-9) ok = false;
        }
    };
    for (const auto& fam : classical_families())
        check_probs(fit_model(fam, train, {{"seed", 1}})->predict_proba(X));
    for (const std::string v : {"deep", "residual", "self_attention", "feature_pyramid"}) {
        auto spec = synth_spec(v, 5, 3);
        spec.deep_widths = {8};
        spec.pyramid_widths = {8, 6};
        nn::Network net = nn::Network::build(spec);
        nn::OptimizerConfig oc;
        oc.epochs = 2;
        nn::train(net, train, train, oc);
        check_probs(net.forward(X));
    }
    {
        std::vector<nn::ArchitectureSpec> specs = {synth_spec("deep", 5, 3)};
        specs[0].deep_widths = {8};
        EnsembleConfig ec;
        ec.folds = 2;
        ec.base_optimizer.epochs = 2;
        check_probs(train_meta_learner(specs, train, ec)->predict_proba(X));
    }
    report(3, "all families: 1000 rows nonnegative, sums within 1e-9", ok);
}

TEST_CASE("criterion 4: finite-difference gradient checks, four architectures") {
    bool ok = true;
    double worst = 0;
    const double h = 1e-5;
    for (const std::string v : {"deep", "residual", "self_attention", "feature_pyramid"}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto spec = synth_spec(v, 6, 3);
            spec.deep_widths = {10, 8};
            spec.residual_width = 8;
            spec.attention_embed = 4;
            spec.attention_head_hidden = 6;
            spec.pyramid_widths = {10, 8};
            spec.seed = seed;
            auto net = nn::Network::build(spec);
            Rng rng(seed * 17);
            Matrix X(4, 6);
            for (Eigen::Index r = 0; r < 4; ++r)
                for (Eigen::Index c = 0; c < 6; ++c) X(r, c) = rng.next_gaussian();
            std::vector<int> y = {0, 1, 2, static_cast<int>(seed % 3)};

            nn::ParamStore grads;
            net.loss_and_grads(X, y, false, nullptr, grads);
            auto loss_at = [&] {
                nn::Tape t;
                std::map<std::string, nn::Tape::NodeId> leaves;
                auto l = t.softmax_cross_entropy(net.forward_graph(t, X, false, nullptr, leaves), y);
                return t.value(l)(0, 0);
            };
            for (auto& [name, p] : net.params)
                for (Eigen::Index r = 0; r < p.rows(); ++r)
                    for (Eigen::Index c = 0; c < p.cols(); ++c) {
                        double orig = p(r, c);
                        p(r, c) = orig + h;
                        double lp = loss_at();
                        p(r, c) = orig - h;
                        double lm = loss_at();
                        p(r, c) = orig;
                        double fd = (lp - lm) / (2 * h);
                        double an = grads.at(name)(r, c);
                        // below ~1e-6 the central difference is cancellation noise
                        if (std::abs(fd) < 1e-6 && std::abs(an) < 1e-6) continue;
                        double rel =
                            std::abs(fd - an) / std::max(std::abs(fd), std::abs(an));
                        worst = std::max(worst, rel);
                        if (rel >= 1e-4) ok = false;
                    }
        }
    }
    report(4, "max relative gradient error < 1e-4 (worst=" + std::to_string(worst) + ")", ok);
}

TEST_CASE("criterion 5: SMOTE exact balance and segment membership") {
    Dataset data = make_blobs(135, 4, 3, 3.0, 99);
    // imbalance: keep 45 of class 0, 30 of class 1, 15 of class 2
    std::vector<std::size_t> keep;
    std::vector<int> budget = {45, 30, 15};
    for (std::size_t i = 0; i < data.size(); ++i)
        if (budget[static_cast<std::size_t>(data.labels[i])]-- > 0) keep.push_back(i);
    Dataset imb = data.subset(keep);

    Dataset bal = smote_oversample(imb, SmoteConfig{5, 7});
    auto counts = bal.class_counts();
    bool balanced = true;
    for (std::size_t c : counts)
        if (c != 45) balanced = false;

    // each synthetic row must sit on a segment between two same-class
    // originals within 1e-9
    bool on_segment = true;
    for (Eigen::Index i = static_cast<Eigen::Index>(imb.size());
         i < static_cast<Eigen::Index>(bal.size()); ++i) {
        Vector p = bal.features.row(i).transpose();
        int cls = bal.labels[static_cast<std::size_t>(i)];
        double best = 1e300;
        for (std::size_t a = 0; a < imb.size(); ++a) {
            if (imb.labels[a] != cls) continue;
            Vector xa = imb.features.row(static_cast<Eigen::Index>(a)).transpose();
            for (std::size_t b = a + 1; b < imb.size(); ++b) {
                if (imb.labels[b] != cls) continue;
                Vector xb = imb.features.row(static_cast<Eigen::Index>(b)).transpose();
                Vector ab = xb - xa;
                double denom = ab.squaredNorm();
                double t = denom > 0 ? std::clamp((p - xa).dot(ab) / denom, 0.0, 1.0) : 0.0;
                best = std::min(best, (p - (xa + t * ab)).norm());
            }
        }
        if (best >= 1e-9) on_segment = false;
    }
    report(5, "class counts match majority exactly; segment residual < 1e-9",
           balanced && on_segment);
}

TEST_CASE("criterion 6: scaler exactness on training columns") {
    Rng rng(515);
    Matrix X(200, 6);
    for (Eigen::Index r = 0; r < X.rows(); ++r)
        for (Eigen::Index c = 0; c < X.cols(); ++c)
            X(r, c) = 10.0 * rng.next_gaussian() + static_cast<double>(c);
    X.col(5).setConstant(3.25);  // constant column excluded from the std gate

    Scaler s = fit_scaler(X);
    Matrix Z = apply_scaler(X, s);
    bool ok = true;
    for (Eigen::Index c = 0; c < Z.cols(); ++c) {
        double mean = Z.col(c).mean();
        if (std::abs(mean) >= 1e-9) ok = false;
        if (s.constant[static_cast<std::size_t>(c)]) continue;
        double sd = std::sqrt((Z.col(c).array() - mean).square().sum() /
                              static_cast<double>(Z.rows()));
        if (std::abs(sd - 1.0) >= 1e-9) ok = false;
    }
    report(6, "|mean| < 1e-9 and |std-1| < 1e-9 on non-constant columns", ok);
}

TEST_CASE("criterion 7: sampling Shapley matches exact enumeration") {
    Dataset data = make_blobs(150, 3, 2, 3.0, 321);
    auto model = fit_model("logistic", data, {});
    Matrix bg = data.features.topRows(25);
    Eigen::RowVectorXd x = data.features.row(60);

    auto exact = shapley_exact(*model, x, bg, 1);
    auto mc = shapley_sampling(*model, x, bg, 2000, 1, 9);

    double mean_delta = 0;
    for (std::size_t j = 0; j < 3; ++j) mean_delta += std::abs(mc.phi[j] - exact.phi[j]);
    mean_delta /= 3.0;

    double fx = model->predict_proba(x)(0, 1);
    bool efficiency = std::abs(exact.explained_total() - fx) < 1e-12;
    report(7,
           "mean |dphi| < 0.01 at M=2000 (got " + std::to_string(mean_delta) +
               "); enumeration efficiency exact",
           mean_delta < 0.01 && efficiency);
}

TEST_CASE("criterion 8: null and noise feature attribution") {
    // probe ignores feature 1 by construction
    FirstFeatureProbe probe;
    Dataset d;
    d.features = Matrix::Random(80, 2);
    d.feature_names = {"used", "nulled"};
    d.class_names = {"a", "b"};
    for (int i = 0; i < 80; ++i) d.labels.push_back(d.features(i, 0) > 0 ? 0 : 1);

    auto perm = permutation_importance(probe, d, 10, 3);
    auto occ = occlusion_importance(probe, d, "zero");
    bool null_zero = perm.features[1].mean_importance == 0.0 &&
                     perm.features[1].std_importance == 0.0 &&
                     occ.features[1].mean_importance == 0.0;

    // pure-noise feature ranks last in >= 95% of 20 seeds; importance is
    // scored on held-out rows so overfitting to the noise column cannot
    // inflate its rank
    int last = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Dataset blobs = make_blobs(480, 3, 3, 4.0, 7000 + seed, /*informative=*/2);
        std::vector<std::size_t> tr_idx, ev_idx;
        for (std::size_t i = 0; i < blobs.size(); ++i) (i % 2 ? ev_idx : tr_idx).push_back(i);
        auto model = fit_model("random_forest", blobs.subset(tr_idx),
                               {{"n_trees", 30}, {"seed", seed}});
        auto rep = permutation_importance(*model, blobs.subset(ev_idx), 10, seed);
        if (rep.features[2].rank == 3) ++last;
    }
    report(8,
           "null feature importance exactly 0; noise ranked last in " + std::to_string(last) +
               "/20 seeds (need >= 19)",
           null_zero && last >= 19);
}

TEST_CASE("criterion 9: metrics identities") {
    Rng rng(2222);
    bool ok = true;
    for (int t = 0; t < 100; ++t) {
        int K = 2 + static_cast<int>(rng.next_index(6));
        std::vector<int> yt(120), yp(120);
        for (int i = 0; i < 120; ++i) {
            yt[static_cast<std::size_t>(i)] = static_cast<int>(rng.next_index(
                static_cast<std::size_t>(K)));
            yp[static_cast<std::size_t>(i)] = static_cast<int>(rng.next_index(
                static_cast<std::size_t>(K)));
        }
        auto rep = compute_metrics(yt, yp, K);
        if (std::abs(rep.weighted_recall - rep.accuracy) > 1e-12) ok = false;
        for (std::size_t r = 0; r < rep.confusion_row_pct.size(); ++r) {
            double sum = 0, count = 0;
            for (std::size_t c = 0; c < rep.confusion_row_pct[r].size(); ++c) {
                sum += rep.confusion_row_pct[r][c];
                count += static_cast<double>(rep.confusion_counts[r][c]);
            }
            if (count > 0 && std::abs(sum - 100.0) > 0.1) ok = false;
        }
    }
    report(9, "weighted recall == accuracy; confusion rows sum to 100 +/- 0.1", ok);
}

TEST_CASE("criterion 10: byte-identical report bundles across full CLI runs") {
#ifndef CROPML_CLI_PATH
    report_skip(10, "CLI determinism", "binary path not provided at build time");
#else
    fs::path root = fs::temp_directory_path() /
                    ("cropml_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);

    // small raw CSV + config so two full runs stay fast
    Dataset blobs = make_blobs(120, 4, 3, 5.0, 777);
    std::string csv = "a,b,c,d,crop\n";
    const char* crops[] = {"rice", "wheat", "maize"};
    char buf[256];
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        auto r = static_cast<Eigen::Index>(i);
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%s\n", blobs.features(r, 0),
                      blobs.features(r, 1), blobs.features(r, 2), blobs.features(r, 3),
                      crops[blobs.labels[i]]);
        csv += buf;
    }
    write_file_atomic(root / "raw.csv", csv);
    write_file_atomic(root / "config.json", R"({
      "seed": 42,
      "pipeline": {"min_samples_per_class": 10, "test_fraction": 0.25, "smote_k": 3},
      "optimizer": {"epochs": 4, "patience": 4, "batch_size": 16},
      "ensemble_folds": 2,
      "networks": {
        "deep": {"deep_widths": [12, 8]},
        "residual": {"residual_width": 8, "residual_blocks": 1},
        "self_attention": {"attention_embed": 4, "attention_head_hidden": 8},
        "feature_pyramid": {"pyramid_widths": [12, 8]}
      }
    })");

    auto run_all = [&](const std::string& tag) -> std::string {
        fs::path run = root / tag;
        std::string cli = CROPML_CLI_PATH;
        auto sh = [&](const std::string& args) {
            std::string cmd = cli + " " + args + " > /dev/null 2>&1";
            return WEXITSTATUS(std::system(cmd.c_str()));
        };
        fs::path prep = run / "prep";
        if (sh("prepare --input " + (root / "raw.csv").string() + " --config " +
               (root / "config.json").string() + " --out-dir " + prep.string()) != 0)
            return "prepare failed";
        if (sh("train --data-dir " + prep.string() + " --models logistic,nn_deep,ensemble" +
               " --config " + (root / "config.json").string() + " --out-dir " +
               (run / "models").string()) != 0)
            return "train failed";
        if (sh("evaluate --data-dir " + prep.string() + " --models-dir " +
               (run / "models").string() + " --out-dir " + (run / "eval").string()) != 0)
            return "evaluate failed";
        if (sh("explain --model " + (run / "models" / "final_ensemble.json").string() +
               " --method occlusion --data-dir " + prep.string() + " --out-dir " +
               (run / "explain").string()) != 0)
            return "explain failed";
        if (sh("report --run-dir " + run.string()) != 0) return "report failed";
        return read_file(run / "run_manifest.json");
    };

    std::string m1 = run_all("run1");
    std::string m2 = run_all("run2");
    bool ok = m1 == m2 && m1.find("bundle_digest") != std::string::npos;
    report(10, "two identical-config runs emit byte-identical manifests", ok);
    fs::remove_all(root);
#endif
}

TEST_CASE("criterion 11: confidence separates correct from incorrect") {
    REQUIRE(g_synth.done);  // produced by criterion 2
    auto cc = confidence_correctness(g_synth.test_probs, g_synth.test_labels);
    auto rel = reliability_report(g_synth.test_probs, g_synth.test_labels);
    bool ok = !cc.correct_group_empty &&
              (cc.incorrect_group_empty || cc.mean_correct > cc.mean_incorrect);
    report(11,
           "mean confidence correct " + std::to_string(cc.mean_correct) + " > incorrect " +
               std::to_string(cc.mean_incorrect) + " (mean entropy " +
               std::to_string(rel.mean_entropy) + ")",
           ok);
}
