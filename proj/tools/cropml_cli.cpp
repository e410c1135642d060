// Batch CLI over the toolkit: prepare -> train -> evaluate -> explain ->
// report. Every command is deterministic for a fixed config and writes its
// outputs atomically; exit codes are 0 success, 1 internal error, 2
// usage/config error.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cropml/cropml.hpp"
#include "cropml/dataset_io.hpp"

namespace {

using namespace cropml;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

json load_config(const std::string& path) {
    if (path.empty()) {
        const char* env = std::getenv("CROPML_CONFIG");
        if (env && *env) return json::parse(read_file(env));
        return json::object();
    }
    return json::parse(read_file(path));
}

std::vector<std::string> neural_variants() {
    return {"deep", "residual", "self_attention", "feature_pyramid"};
}

nn::ArchitectureSpec make_spec(const std::string& variant, int d, int K, const json& cfg) {
    nn::ArchitectureSpec s;
    s.variant = variant;
    s.input_dim = d;
    s.class_count = K;
    s.dropout_rate = variant == "deep" ? 0.3 : 0.0;
    s.seed = cfg.value("seed", 42);
    if (cfg.contains("networks") && cfg["networks"].contains(variant)) {
        const json& nc = cfg["networks"][variant];
        if (nc.contains("dropout_rate")) s.dropout_rate = nc["dropout_rate"].get<double>();
        if (nc.contains("seed")) s.seed = nc["seed"].get<std::uint64_t>();
        if (nc.contains("deep_widths")) nc["deep_widths"].get_to(s.deep_widths);
        if (nc.contains("pyramid_widths")) nc["pyramid_widths"].get_to(s.pyramid_widths);
        if (nc.contains("residual_width")) nc["residual_width"].get_to(s.residual_width);
        if (nc.contains("residual_blocks")) nc["residual_blocks"].get_to(s.residual_blocks);
        if (nc.contains("attention_embed")) nc["attention_embed"].get_to(s.attention_embed);
        if (nc.contains("attention_head_hidden"))
            nc["attention_head_hidden"].get_to(s.attention_head_hidden);
    }
    return s;
}

struct LoadedData {
    Dataset train, test;
    LabelCodec codec;
};

LoadedData load_prepared(const fs::path& data_dir) {
    fs::path meta_path = data_dir / "dataset_meta.json";
    if (!fs::exists(meta_path)) throw MissingData("no prepared data in " + data_dir.string());
    json meta = json::parse(read_file(meta_path));
    LoadedData d;
    auto class_names = meta.at("class_names").get<std::vector<std::string>>();
    d.train = dataset_from_csv(data_dir / "train.csv", class_names);
    d.test = dataset_from_csv(data_dir / "test.csv", class_names);
    d.codec.categories = class_names;
    for (std::size_t i = 0; i < class_names.size(); ++i)
        d.codec.code_of[class_names[i]] = static_cast<int>(i);
    return d;
}

ModelPtr load_model_file(const fs::path& path) {
    if (!fs::exists(path)) throw MissingModel(path.string());
    json j = json::parse(read_file(path));
    std::string family = j.at("family").get<std::string>();
    if (family == "final_ensemble") return Ensemble::from_json(j);
    if (family.rfind("nn_", 0) == 0)
        return std::make_shared<nn::NetworkModel>(nn::Network::from_json(j));
    return model_from_json(j);
}

std::string confusion_csv(const MetricsReport& rep, const std::vector<std::string>& names,
                          bool pct) {
    std::string out = "true\\pred";
    for (const auto& n : names) out += "," + n;
    out += "\n";
    char buf[64];
    for (std::size_t r = 0; r < names.size(); ++r) {
        out += names[r];
        for (std::size_t c = 0; c < names.size(); ++c) {
            if (pct)
                std::snprintf(buf, sizeof(buf), ",%.4f", rep.confusion_row_pct[r][c]);
            else
                std::snprintf(buf, sizeof(buf), ",%zu", rep.confusion_counts[r][c]);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

// --- prepare -----------------------------------------------------------------

int cmd_prepare(const std::string& input, const std::string& config_path,
                const std::string& out_dir) {
    json cfg = load_config(config_path);
    PipelineConfig pcfg = cfg.value("pipeline", json::object()).get<PipelineConfig>();

    RawTable raw = parse_csv(input);
    PipelineResult res = run_pipeline(raw, pcfg);

    DirLock lock(out_dir);
    fs::path out(out_dir);
    write_file_atomic(out / "train.csv", dataset_to_csv(res.train));
    write_file_atomic(out / "test.csv", dataset_to_csv(res.test));
    write_file_atomic(out / "scaler.json", scaler_to_json(res.scaler).dump(2) + "\n");
    json codec_j = {{"categories", res.codec.categories}};
    write_file_atomic(out / "codec.json", codec_j.dump(2) + "\n");
    json meta = {{"class_names", res.codec.categories},
                 {"feature_names", res.train.feature_names}};
    write_file_atomic(out / "dataset_meta.json", meta.dump(2) + "\n");
    write_file_atomic(out / "provenance.json", res.provenance.dump(2) + "\n");
    std::cout << "prepared " << res.train.size() << " train / " << res.test.size()
              << " test rows, " << res.codec.class_count() << " classes\n";
    return 0;
}

// --- train -------------------------------------------------------------------

int cmd_train(const std::string& data_dir, const std::string& models_arg,
              const std::string& grid_mode, int folds, const std::string& config_path,
              const std::string& out_dir) {
    json cfg = load_config(config_path);
    LoadedData data = load_prepared(data_dir);
    int d = data.train.dim(), K = data.train.class_count();

    std::vector<std::string> requested;
    if (models_arg == "all") {
        requested = classical_families();
        for (const auto& v : neural_variants()) requested.push_back("nn_" + v);
        requested.push_back("ensemble");
    } else {
        std::stringstream ss(models_arg);
        std::string item;
        while (std::getline(ss, item, ',')) requested.push_back(item);
    }

    DirLock lock(out_dir);
    fs::path out(out_dir);
    nn::OptimizerConfig ocfg = cfg.value("optimizer", json::object()).get<nn::OptimizerConfig>();
    auto seed = static_cast<std::uint64_t>(cfg.value("seed", 42));

    std::vector<std::string> failures;
    for (const auto& name : requested) {
        try {
            if (name == "ensemble") {
                std::vector<nn::ArchitectureSpec> specs;
                for (const auto& v : neural_variants()) specs.push_back(make_spec(v, d, K, cfg));
                EnsembleConfig ec;
                ec.folds = cfg.value("ensemble_folds", 5);
                ec.base_optimizer = ocfg;
                std::vector<nn::TrainingCurve> curves;
                auto ens = train_meta_learner(specs, data.train, ec, &curves);
                write_file_atomic(out / "final_ensemble.json", ens->to_json().dump() + "\n");
                json manifest = {{"bases", json::array()},
                                 {"meta_learner", "final_ensemble.json"},
                                 {"fusion_mode", ec.fusion_mode}};
                for (std::size_t b = 0; b < specs.size(); ++b) {
                    manifest["bases"].push_back({{"variant", specs[b].variant},
                                                 {"weight", ens->records[b].weight},
                                                 {"validation_accuracy",
                                                  ens->records[b].validation_accuracy},
                                                 {"mean_confidence",
                                                  ens->records[b].mean_confidence}});
                    write_file_atomic(out / ("curve_nn_" + specs[b].variant + ".csv"),
                                      curves[b].to_csv());
                }
                write_file_atomic(out / "curve_meta_learner.csv", ens->meta_curve.to_csv());
                write_file_atomic(out / "ensemble_manifest.json", manifest.dump(2) + "\n");
                write_file_atomic(out / "ensemble_provenance.json",
                                  ens->provenance.dump() + "\n");
            } else if (name.rfind("nn_", 0) == 0) {
                nn::ArchitectureSpec spec = make_spec(name.substr(3), d, K, cfg);
                nn::Network net = nn::Network::build(spec);
                // hold out a slice of train for the validation curve
                auto folds2 = stratified_kfold(data.train.labels, 5, spec.seed);
                std::vector<std::size_t> tr_idx;
                for (std::size_t g = 1; g < folds2.size(); ++g)
                    tr_idx.insert(tr_idx.end(), folds2[g].begin(), folds2[g].end());
                std::sort(tr_idx.begin(), tr_idx.end());
                nn::TrainingCurve curve =
                    nn::train(net, data.train.subset(tr_idx), data.train.subset(folds2[0]), ocfg);
                json j = net.to_json();
                j["family"] = name;
                write_file_atomic(out / (name + ".json"), j.dump() + "\n");
                write_file_atomic(out / ("curve_" + name + ".csv"), curve.to_csv());
            } else {
                json params = cfg.value("models", json::object()).value(name, json::object());
                CvResult cv;
                if (grid_mode == "default") {
                    GridSpec grid = default_grid(name, d);
                    cv = grid_search(grid, data.train, folds, "weighted_f1", seed);
                    params.update(cv.best_params());
                } else {
                    GridSpec grid;
                    grid.family = name;
                    cv = grid_search(grid, data.train, folds, "weighted_f1", seed);
                }
                if (!params.contains("seed")) params["seed"] = seed;
                ModelPtr m = fit_model(name, data.train, params);
                write_file_atomic(out / (name + ".json"), m->to_json().dump() + "\n");
                write_file_atomic(out / ("cv_" + name + ".json"), cv.to_json().dump(2) + "\n");
            }
            std::cout << "trained " << name << "\n";
        } catch (const std::exception& e) {
            failures.push_back(name + ": " + e.what());
            std::cerr << "FAILED " << name << ": " << e.what() << "\n";
        }
    }
    if (!failures.empty()) {
        std::cerr << failures.size() << " families failed\n";
        return 1;
    }
    return 0;
}

// --- evaluate ------------------------------------------------------------------

int cmd_evaluate(const std::string& data_dir, const std::string& models_dir,
                 const std::string& out_dir) {
    LoadedData data = load_prepared(data_dir);
    fs::path mdir(models_dir);
    if (!fs::exists(mdir)) throw MissingModel(models_dir);

    std::vector<std::pair<std::string, ModelPtr>> models;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(mdir))
        if (e.path().extension() == ".json" && e.path().filename().string().rfind("cv_", 0) != 0 &&
            e.path().filename().string().find("manifest") == std::string::npos &&
            e.path().filename().string().find("provenance") == std::string::npos)
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        try {
            models.emplace_back(f.stem().string(), load_model_file(f));
        } catch (const UnsupportedMethod&) {
            // non-model json, skip
        }
    }
    if (models.empty()) throw MissingModel("no model files in " + models_dir);

    auto table = evaluate_all(models, data.test);

    DirLock lock(out_dir);
    fs::path out(out_dir);
    write_file_atomic(out / "ranked_report.csv", ranked_table_csv(table));
    json full = json::array();
    for (const auto& e : table) {
        full.push_back({{"model", e.model_name},
                        {"metrics", metrics_to_json(e.report, data.test.class_names)}});
        write_file_atomic(out / ("confusion_counts_" + e.model_name + ".csv"),
                          confusion_csv(e.report, data.test.class_names, false));
        write_file_atomic(out / ("confusion_pct_" + e.model_name + ".csv"),
                          confusion_csv(e.report, data.test.class_names, true));
    }
    write_file_atomic(out / "full_report.json", full.dump(2) + "\n");
    std::cout << ranked_table_csv(table);
    return 0;
}

// --- explain -------------------------------------------------------------------

int cmd_explain(const std::string& model_path, const std::string& method,
                const std::string& data_dir, const std::string& out_dir, int instance,
                int repeats, int permutations) {
    if (method != "permutation" && method != "occlusion" && method != "shapley")
        throw UnsupportedMethod(method);
    LoadedData data = load_prepared(data_dir);
    ModelPtr model = load_model_file(model_path);

    DirLock lock(out_dir);
    fs::path out(out_dir);

    if (method == "shapley") {
        // background: up to 100 training rows, fixed seed
        Rng rng(derive_seed(42, 0xba6d));
        std::vector<std::size_t> idx(data.train.size());
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx);
        idx.resize(std::min<std::size_t>(100, idx.size()));
        Matrix background(static_cast<Eigen::Index>(idx.size()), data.train.features.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
            background.row(static_cast<Eigen::Index>(i)) =
                data.train.features.row(static_cast<Eigen::Index>(idx[i]));

        Eigen::RowVectorXd x = data.test.features.row(instance);
        Matrix p = model->predict_proba(x);
        Eigen::Index cls = 0;
        p.row(0).maxCoeff(&cls);
        auto ex = shapley_sampling(*model, x, background, permutations, static_cast<int>(cls), 42,
                                   static_cast<std::size_t>(instance));
        json j = ex.to_json(data.test.feature_names);
        j["model_output"] = p(0, cls);
        write_file_atomic(out / "shapley.json", j.dump(2) + "\n");
        std::string csv = "feature,phi\n";
        char buf[128];
        for (std::size_t f = 0; f < ex.phi.size(); ++f) {
            std::snprintf(buf, sizeof(buf), "%s,%.10g\n", data.test.feature_names[f].c_str(),
                          ex.phi[f]);
            csv += buf;
        }
        std::snprintf(buf, sizeof(buf), "efficiency_total,%.10g\n", ex.explained_total());
        csv += buf;
        write_file_atomic(out / "shapley.csv", csv);
    } else {
        AttributionReport rep =
            method == "permutation"
                ? permutation_importance(*model, data.test, repeats, 42)
                : occlusion_importance(*model, data.test, "zero");
        write_file_atomic(out / ("importance_" + method + ".csv"), rep.to_csv(false));
        write_file_atomic(out / ("importance_" + method + "_top15.csv"), rep.to_csv(true));
        write_file_atomic(out / ("importance_" + method + ".json"), rep.to_json().dump(2) + "\n");
    }

    // reliability on test predictions
    Matrix P = model->predict_proba(data.test.features);
    auto rel = reliability_report(P, data.test.labels, 10);
    auto cc = confidence_correctness(P, data.test.labels, 10);
    json relj = rel.to_json();
    relj["confidence_correctness"] = {{"mean_correct", cc.mean_correct},
                                      {"mean_incorrect", cc.mean_incorrect},
                                      {"incorrect_group_empty", cc.incorrect_group_empty}};
    write_file_atomic(out / "reliability.json", relj.dump(2) + "\n");
    write_file_atomic(out / "reliability_bins.csv", rel.bins_csv());
    std::cout << "explain " << method << " done\n";
    return 0;
}

// --- report --------------------------------------------------------------------

int cmd_report(const std::string& run_dir) {
    fs::path run(run_dir);
    fs::path models = run / "models";
    fs::path evals = run / "eval";
    if (!fs::exists(models)) throw IncompleteRun("missing models/ under " + run_dir);

    for (const auto& v : neural_variants())
        if (!fs::exists(models / ("curve_nn_" + v + ".csv")))
            throw IncompleteRun("missing curve_nn_" + v + ".csv");
    if (!fs::exists(models / "curve_meta_learner.csv"))
        throw IncompleteRun("missing curve_meta_learner.csv");
    if (!fs::exists(models / "final_ensemble.json"))
        throw IncompleteRun("missing final_ensemble.json");

    json manifest;
    manifest["toolkit_version"] = kVersion;
    json outputs = json::array();
    std::vector<fs::path> all;
    for (const auto& dir : {models, evals, run / "explain"}) {
        if (!fs::exists(dir)) continue;
        for (const auto& e : fs::recursive_directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() != ".tmp" &&
                e.path().filename() != ".cropml.lock")
                all.push_back(e.path());
    }
    std::sort(all.begin(), all.end());
    for (const auto& f : all)
        outputs.push_back({{"path", fs::relative(f, run).string()},
                           {"digest", content_digest(read_file(f))}});
    manifest["outputs"] = outputs;
    manifest["bundle_digest"] = content_digest(outputs.dump());
    write_file_atomic(run / "run_manifest.json", manifest.dump(2) + "\n");
    std::cout << "bundle digest " << manifest["bundle_digest"].get<std::string>() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crop classification toolkit"};
    app.require_subcommand(1);

    std::string input, config, out_dir, data_dir, models_arg = "all", grid_mode = "none";
    std::string models_dir, model_path, method = "permutation", run_dir;
    int folds = 5, instance = 0, repeats = 10, permutations = 200;

    auto* prep = app.add_subcommand("prepare", "ingest + preprocess a raw CSV");
    prep->add_option("--input", input)->required();
    prep->add_option("--config", config);
    prep->add_option("--out-dir", out_dir)->required();

    auto* train = app.add_subcommand("train", "fit models on prepared data");
    train->add_option("--data-dir", data_dir)->required();
    train->add_option("--models", models_arg);
    train->add_option("--grid", grid_mode)->check(CLI::IsMember({"none", "default"}));
    train->add_option("--folds", folds);
    train->add_option("--config", config);
    train->add_option("--out-dir", out_dir)->required();

    auto* eval = app.add_subcommand("evaluate", "metrics reports on the test split");
    eval->add_option("--data-dir", data_dir)->required();
    eval->add_option("--models-dir", models_dir)->required();
    eval->add_option("--out-dir", out_dir)->required();

    auto* expl = app.add_subcommand("explain", "attribution + reliability");
    expl->add_option("--model", model_path)->required();
    expl->add_option("--method", method);
    expl->add_option("--data-dir", data_dir)->required();
    expl->add_option("--out-dir", out_dir)->required();
    expl->add_option("--instance", instance);
    expl->add_option("--repeats", repeats);
    expl->add_option("--permutations", permutations);

    auto* rep = app.add_subcommand("report", "consolidated manifest + bundle");
    rep->add_option("--run-dir", run_dir)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (prep->parsed()) return cmd_prepare(input, config, out_dir);
        if (train->parsed())
            return cmd_train(data_dir, models_arg, grid_mode, folds, config, out_dir);
        if (eval->parsed()) return cmd_evaluate(data_dir, models_dir, out_dir);
        if (expl->parsed())
            return cmd_explain(model_path, method, data_dir, out_dir, instance, repeats,
                               permutations);
        if (rep->parsed()) return cmd_report(run_dir);
    } catch (const cropml::MissingColumn& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const cropml::UnsupportedMethod& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const cropml::UnreadableFile& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const cropml::MissingData& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 2;
}
