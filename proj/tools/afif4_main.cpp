// Command-line front end for the AFIF4 pipeline: preprocessing,
// dataset tooling, training, and evaluation.

#include <filesystem>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "afif4/afif4.hpp"

namespace fs = std::filesystem;
using namespace afif4;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string preset;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool preset_set = false;

    Config effective() const {
        Config cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (seed_set) cfg.values["seed"] = std::to_string(seed);
        if (preset_set) cfg.values["preset"] = preset;
        return cfg;
    }
};

DatasetManifest load_manifest_resolved(const std::string& path) {
    DatasetManifest mf = parse_manifest(path);
    resolve_manifest_paths(mf, fs::path(path).parent_path().string());
    return mf;
}

// Uses fold ids already present in the manifest when they cover every
// record; otherwise draws a fresh balanced plan.
FoldPlan fold_plan_for(const DatasetManifest& mf, int k, std::uint64_t seed) {
    bool all_assigned = !mf.records.empty();
    int max_fold = -1;
    for (const SampleRecord& r : mf.records) {
        if (r.fold < 0) all_assigned = false;
        max_fold = std::max(max_fold, r.fold);
    }
    if (all_assigned && max_fold >= 1) {
        FoldPlan plan;
        plan.k = max_fold + 1;
        plan.seed = seed;
        for (const SampleRecord& r : mf.records) plan.fold_of.push_back(r.fold);
        return plan;
    }
    return make_folds(mf, k, seed);
}

std::string image_name(const std::string& stem, int channels, const std::string& suffix) {
    return stem + suffix + (channels == 1 ? ".pgm" : ".ppm");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AFIF4 gender classification pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--config", g.config_path, "key=value configuration file");
    app.add_option("--seed", g.seed, "master seed")->each([&g](const std::string&) {
        g.seed_set = true;
    });
    app.add_option("--preset", g.preset, "network preset (afif4-paper|afif4-wide|afif4-tiny)")
        ->each([&g](const std::string&) { g.preset_set = true; });

    // ---- ssr ----
    auto* ssr_cmd = app.add_subcommand("ssr", "illumination-invariant enhancement of one image");
    std::string ssr_in, ssr_out;
    double ssr_g = 0.0, ssr_eps = kDefaultSsrEps;
    ssr_cmd->add_option("--in", ssr_in, "input image (PGM/PPM)")->required();
    ssr_cmd->add_option("--out", ssr_out, "output image")->required();
    ssr_cmd->add_option("--g", ssr_g, "Gaussian surround contrast (0 = max(w,h)/4)");
    ssr_cmd->add_option("--eps", ssr_eps, "log-domain guard");
    ssr_cmd->callback([&] {
        const ImageBuffer img = load_image(ssr_in);
        const double scale = ssr_g > 0.0 ? ssr_g : default_surround_scale(img);
        save_image(ssr_enhance(img, build_surround(scale), ssr_eps), ssr_out);
        std::cout << "wrote " << ssr_out << " (G=" << scale << ")\n";
    });

    // ---- foggy ----
    auto* foggy_cmd = app.add_subcommand("foggy", "membrane in-fill of the face region");
    std::string foggy_in, foggy_lm, foggy_out, foggy_method = "cg";
    double foggy_tol = 1e-6;
    int foggy_size = 0;
    foggy_cmd->add_option("--in", foggy_in, "input image")->required();
    foggy_cmd->add_option("--landmarks", foggy_lm, "detection record file (one line)")->required();
    foggy_cmd->add_option("--out", foggy_out, "output image")->required();
    foggy_cmd->add_option("--method", foggy_method, "solver: cg|gs|dense");
    foggy_cmd->add_option("--tol", foggy_tol, "residual tolerance");
    foggy_cmd->add_option("--size", foggy_size, "resize output to size x size (0 = native)");
    foggy_cmd->callback([&] {
        const ImageBuffer img = load_image(foggy_in);
        std::ifstream lm_in(foggy_lm);
        if (!lm_in) throw Error("cannot open landmarks file: " + foggy_lm);
        std::string line;
        std::getline(lm_in, line);
        const auto det = parse_detection_record(line);
        if (!det) throw Error(foggy_lm + ": record holds no face");
        MembraneSolveConfig cfg;
        cfg.method = membrane_method_from_name(foggy_method);
        cfg.tolerance = foggy_tol;
        if (foggy_size > 0) {
            save_image(foggy_face(img, *det, cfg, foggy_size), foggy_out);
        } else {
            const FogRegion region = region_from_landmarks(det->landmarks, img.width, img.height);
            save_image(solve_membrane(img, region, cfg), foggy_out);
        }
        std::cout << "wrote " << foggy_out << "\n";
    });

    // ---- augment ----
    auto* aug_cmd = app.add_subcommand("augment", "10x training-set augmentation");
    std::string aug_in, aug_out;
    int aug_shift = 5;
    aug_cmd->add_option("--in", aug_in, "input manifest")->required();
    aug_cmd->add_option("--out", aug_out, "output directory")->required();
    aug_cmd->add_option("--shift", aug_shift, "translation in pixels");
    aug_cmd->callback([&] {
        const DatasetManifest mf = load_manifest_resolved(aug_in);
        fs::create_directories(aug_out);
        DatasetManifest derived;
        derived.name = mf.name + "-aug";
        AugmentConfig cfg;
        cfg.shift = aug_shift;
        for (const SampleRecord& rec : mf.records) {
            const ImageBuffer img = load_image(rec.image_path);
            const auto variants = augment_10x(img, cfg);
            const std::string stem = fs::path(rec.image_path).stem().string();
            for (std::size_t i = 0; i < variants.size(); ++i) {
                const std::string name =
                    image_name(stem, img.channels, "_aug" + std::to_string(i));
                save_image(variants[i], (fs::path(aug_out) / name).string());
                SampleRecord out_rec;  // geometry changes, so landmarks do not carry over
                out_rec.image_path = name;
                out_rec.gender = rec.gender;
                out_rec.subject_id = rec.subject_id;
                derived.records.push_back(std::move(out_rec));
            }
        }
        write_manifest(derived, (fs::path(aug_out) / "manifest.tsv").string());
        std::cout << "wrote " << derived.records.size() << " images to " << aug_out << "\n";
    });

    // ---- degrade ----
    auto* deg_cmd = app.add_subcommand("degrade", "synthetic degradation of a dataset");
    std::string deg_in, deg_out, deg_kind, deg_difficulty = "medium";
    std::uint64_t deg_seed = 1;
    deg_cmd->add_option("--in", deg_in, "input manifest")->required();
    deg_cmd->add_option("--out", deg_out, "output directory")->required();
    deg_cmd
        ->add_option("--kind", deg_kind,
                     "gaussian-noise|gaussian-smooth|posterize|occlude-nose|occlude-mouth")
        ->required();
    deg_cmd->add_option("--difficulty", deg_difficulty, "easy|medium|hard");
    deg_cmd->add_option("--seed", deg_seed, "noise seed");
    deg_cmd->callback([&] {
        const DatasetManifest mf = load_manifest_resolved(deg_in);
        const Config cfg = g.effective();
        fs::create_directories(deg_out);
        DatasetManifest derived;
        derived.name = mf.name + "-" + deg_kind + "-" + deg_difficulty;
        DegradeSpec spec =
            difficulty_params(degrade_kind_from_name(deg_kind), difficulty_from_name(deg_difficulty));
        spec.fill = cfg.get_double("degrade.fill", 0.5);
        for (std::size_t i = 0; i < mf.records.size(); ++i) {
            const SampleRecord& rec = mf.records[i];
            const ImageBuffer img = load_image(rec.image_path);
            spec.seed = deg_seed + i;  // per-record stream
            const ImageBuffer out_img = degrade(img, spec, rec.landmarks);
            const std::string stem = fs::path(rec.image_path).stem().string();
            const std::string name = image_name(stem, img.channels, "_" + deg_kind);
            save_image(out_img, (fs::path(deg_out) / name).string());
            SampleRecord out_rec = rec;  // geometry is unchanged, landmarks stay valid
            out_rec.image_path = name;
            derived.records.push_back(std::move(out_rec));
        }
        write_manifest(derived, (fs::path(deg_out) / "manifest.tsv").string());
        std::cout << "wrote " << derived.records.size() << " images to " << deg_out << "\n";
    });

    // ---- folds ----
    auto* folds_cmd = app.add_subcommand("folds", "balanced k-fold assignment");
    std::string folds_in, folds_out;
    int folds_k = 0;
    folds_cmd->add_option("--manifest", folds_in, "input manifest")->required();
    folds_cmd->add_option("--out", folds_out, "output manifest with fold ids")->required();
    folds_cmd->add_option("--k", folds_k, "fold count (default from config)");
    folds_cmd->callback([&] {
        DatasetManifest mf = parse_manifest(folds_in);
        const Config cfg = g.effective();
        const int k = folds_k > 0 ? folds_k : cfg.get_int("folds.k", 5);
        const FoldPlan plan = make_folds(mf, k, cfg.get_u64("seed", 1));
        for (std::size_t i = 0; i < mf.records.size(); ++i) mf.records[i].fold = plan.fold_of[i];
        write_manifest(mf, folds_out);
        std::cout << "k=" << k << ", discarded " << plan.discarded.size()
                  << " records for balance; wrote " << folds_out << "\n";
    });

    // ---- metrics ----
    auto* metrics_cmd = app.add_subcommand("metrics", "detection metrics from raw counts");
    std::int64_t m_tp = 0, m_fp = 0, m_fn = 0;
    metrics_cmd->add_option("--tp", m_tp, "true positives")->required();
    metrics_cmd->add_option("--fp", m_fp, "false positives")->required();
    metrics_cmd->add_option("--fn", m_fn, "false negatives")->required();
    metrics_cmd->callback([&] {
        const DetectionMetrics m = detection_metrics(DetectionCounts{m_tp, m_fp, m_fn});
        std::cout << std::fixed << std::setprecision(2) << "recall "
                  << m.recall_pct << "%  precision " << m.precision_pct << "%  f-measure "
                  << m.f_measure_pct << "%\n";
    });

    // ---- gradcheck ----
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string grad_net = "tiny";
    double grad_eps = 1e-4;
    grad_cmd->add_option("--net", grad_net, "tiny|fc (fully-connected only)");
    grad_cmd->add_option("--eps", grad_eps, "finite-difference step");
    grad_cmd->callback([&] {
        const Config cfg = g.effective();
        NetworkSpec spec;
        if (grad_net == "tiny") {
            spec = spec_afif4_tiny(1);
        } else if (grad_net == "fc") {
            spec.name = "fc-only";
            spec.input_size = 8;
            spec.input_channels = 1;
            spec.layers = {LayerSpec::fc(16), LayerSpec::relu(), LayerSpec::fc(2),
                           LayerSpec::softmax()};
        } else {
            throw Error("gradcheck: --net must be tiny or fc");
        }
        ImageBuffer input(spec.input_size, spec.input_size, spec.input_channels);
        std::mt19937_64 rng(cfg.get_u64("seed", 1));
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        for (double& v : input.pixels) v = uni(rng);
        const double err = gradient_check(spec, input, kMale, grad_eps);
        std::cout << "max relative gradient error (" << grad_net << "): " << err << "\n";
    });

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train one fold and save the model bundle");
    std::string train_in, train_bundle;
    int train_fold = 0, train_k = 0;
    train_cmd->add_option("--manifest", train_in, "dataset manifest")->required();
    train_cmd->add_option("--fold", train_fold, "held-out test fold id");
    train_cmd->add_option("--k", train_k, "fold count (ignored when the manifest carries folds)");
    train_cmd->add_option("--bundle", train_bundle, "output bundle directory")->required();
    train_cmd->callback([&] {
        const DatasetManifest mf = load_manifest_resolved(train_in);
        const Config cfg = g.effective();
        const PipelineConfig pc = pipeline_config_from(cfg);
        const int k = train_k > 0 ? train_k : cfg.get_int("folds.k", 5);
        const FoldPlan plan = fold_plan_for(mf, k, pc.master_seed + 10);
        const ModelBundle bundle = run_training(mf, plan, train_fold, pc);
        save_bundle(bundle, train_bundle);
        std::cout << "bundle saved to " << train_bundle << "\n";
    });

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a bundle on one fold");
    std::string eval_in, eval_bundle;
    int eval_fold = 0, eval_k = 0;
    eval_cmd->add_option("--manifest", eval_in, "dataset manifest")->required();
    eval_cmd->add_option("--fold", eval_fold, "test fold id");
    eval_cmd->add_option("--k", eval_k, "fold count (ignored when the manifest carries folds)");
    eval_cmd->add_option("--bundle", eval_bundle, "bundle directory")->required();
    eval_cmd->callback([&] {
        const DatasetManifest mf = load_manifest_resolved(eval_in);
        const Config cfg = g.effective();
        const PipelineConfig pc = pipeline_config_from(cfg);
        const int k = eval_k > 0 ? eval_k : cfg.get_int("folds.k", 5);
        const FoldPlan plan = fold_plan_for(mf, k, pc.master_seed + 10);
        const ModelBundle bundle = load_bundle(eval_bundle);
        std::cout << std::fixed << std::setprecision(2)
                  << run_evaluation(bundle, mf, plan, eval_fold) << "\n";
    });

    // ---- crossval ----
    auto* cv_cmd = app.add_subcommand("crossval", "full k-fold cross-validation");
    std::string cv_in, cv_report, cv_json, cv_format = "markdown";
    std::string cv_test;  // optional second manifest for cross-dataset evaluation
    int cv_k = 0;
    cv_cmd->add_option("--manifest", cv_in, "dataset manifest")->required();
    cv_cmd->add_option("--test-manifest", cv_test,
                       "evaluate on this manifest instead of held-out folds");
    cv_cmd->add_option("--k", cv_k, "fold count");
    cv_cmd->add_option("--report", cv_report, "rendered report path");
    cv_cmd->add_option("--json", cv_json, "raw report json path");
    cv_cmd->add_option("--format", cv_format, "csv|markdown");
    cv_cmd->callback([&] {
        const DatasetManifest mf = load_manifest_resolved(cv_in);
        const Config cfg = g.effective();
        const PipelineConfig pc = pipeline_config_from(cfg);
        RunReport report;
        if (cv_test.empty()) {
            const int k = cv_k > 0 ? cv_k : cfg.get_int("folds.k", 5);
            report = run_crossval(mf, k, pc);
        } else {
            const DatasetManifest test_mf = load_manifest_resolved(cv_test);
            report.dataset = mf.name + ">" + test_mf.name;
            report.master_seed = pc.master_seed;
            report.config_echo = pc.echo;
            report.cross_cells.push_back(
                CrossCell{mf.name, test_mf.name, run_cross_dataset(mf, test_mf, pc)});
        }
        if (!cv_report.empty())
            emit_report(report, cv_report, report_format_from_name(cv_format));
        if (!cv_json.empty()) save_report_json(report, cv_json);
        emit_report(report, std::cout, ReportFormat::Markdown);
    });

    // ---- report ----
    auto* rep_cmd = app.add_subcommand("report", "render a saved report json");
    std::string rep_in, rep_out, rep_format = "markdown";
    rep_cmd->add_option("--in", rep_in, "report json")->required();
    rep_cmd->add_option("--out", rep_out, "output path (default stdout)");
    rep_cmd->add_option("--format", rep_format, "csv|markdown");
    rep_cmd->callback([&] {
        const RunReport report = load_report_json(rep_in);
        if (rep_out.empty()) {
            emit_report(report, std::cout, report_format_from_name(rep_format));
        } else {
            emit_report(report, rep_out, report_format_from_name(rep_format));
            std::cout << "wrote " << rep_out << "\n";
        }
    });

    try {
        CLI11_PARSE(app, argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
