#include "nsl/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "nsl/dataset.hpp"
#include "nsl/evaluate.hpp"
#include "nsl/ols.hpp"
#include "nsl/overlay.hpp"
#include "nsl/serialize.hpp"
#include "nsl/train.hpp"

namespace nsl {

namespace {

constexpr const char* kToolVersion = "0.1.0";

namespace fs = std::filesystem;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt10(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::map<std::string, std::string> parse_slide_map(const std::vector<std::string>& entries) {
    std::map<std::string, std::string> map;
    for (const std::string& entry : entries) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == entry.size()) {
            throw OutOfRange("--slide expects <slide_id>=<path>, got '" + entry + "'");
        }
        map[entry.substr(0, eq)] = entry.substr(eq + 1);
    }
    return map;
}

// Flags shared by the subcommands that train models.
struct TrainFlags {
    std::string manifest_path;
    std::string expr_path;
    double lr = 0.001;
    int batch = 128;
    int epochs = 250;
    int top_genes = 250;
    double pseudo_count = 1.0;
    double epsilon = 1e-6;
    std::uint64_t seed = 0;
    double init_range = 0.1;
    int workers = 1;
    bool no_log = false;
    std::string genes_flag;  // explicit comma-separated gene list
    std::vector<std::string> slide_entries;
    int patch_side = 256;

    void add_to(CLI::App& cmd, bool with_expr = true) {
        cmd.add_option("--manifest", manifest_path, "Spot manifest CSV")->required();
        if (with_expr) {
            cmd.add_option("--expr", expr_path, "Expression matrix (spot_id + gene columns)")
                ->required();
        }
        cmd.add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
        cmd.add_option("--batch", batch, "Minibatch size")->check(CLI::PositiveNumber);
        cmd.add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
        cmd.add_option("--top-genes", top_genes, "Keep the top N genes by median expression")
            ->check(CLI::PositiveNumber);
        cmd.add_option("--pseudo-count", pseudo_count, "Pseudo-count for the log transform")
            ->check(CLI::PositiveNumber);
        cmd.add_option("--epsilon", epsilon, "Optical-density floor")
            ->check(CLI::Range(1e-300, 0.9999999));
        cmd.add_option("--seed", seed, "Master RNG seed");
        cmd.add_option("--init-range", init_range, "Half-width of the w,b init range")
            ->check(CLI::PositiveNumber);
        cmd.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
        cmd.add_flag("--no-log", no_log, "Skip the log(value + pseudo-count) target transform");
        cmd.add_option("--genes", genes_flag,
                       "Train these genes (comma separated) instead of the top-N selection");
        cmd.add_option("--slide", slide_entries,
                       "Slide raster mapping <slide_id>=<png path>, for manifests without "
                       "per-spot patch files");
        cmd.add_option("--patch-side", patch_side, "Crop size when extracting from slides")
            ->check(CLI::PositiveNumber);
    }

    TrainConfig to_config() const {
        TrainConfig config;
        config.learning_rate = lr;
        config.batch_size = batch;
        config.epochs = epochs;
        config.eps = epsilon;
        config.seed = seed;
        config.init_range = init_range;
        config.validate();
        return config;
    }

    void echo(std::map<std::string, std::string>& out) const {
        out["lr"] = fmt17(lr);
        out["batch"] = std::to_string(batch);
        out["epochs"] = std::to_string(epochs);
        out["top_genes"] = std::to_string(top_genes);
        out["pseudo_count"] = fmt17(pseudo_count);
        out["epsilon"] = fmt17(epsilon);
        out["seed"] = std::to_string(seed);
        out["init_range"] = fmt17(init_range);
        out["workers"] = std::to_string(workers);
        out["no_log"] = no_log ? "true" : "false";
        if (!genes_flag.empty()) out["genes"] = genes_flag;
        out["patch_side"] = std::to_string(patch_side);
    }
};

struct LoadedData {
    SpotDataset dataset;
    std::vector<std::string> gene_list;
    size_t dropped = 0;
};

LoadedData load_training_data(const TrainFlags& flags) {
    LoadedData data;
    const SpotDataset manifest = load_manifest(flags.manifest_path);
    data.dataset = load_expression(flags.expr_path, manifest, &data.dropped);
    if (data.dropped > 0) {
        std::cerr << "note: dropped " << data.dropped
                  << " manifest spots absent from the expression matrix\n";
    }
    if (!flags.genes_flag.empty()) {
        data.gene_list = split_csv_list(flags.genes_flag);
    } else {
        data.gene_list = select_top_genes(data.dataset, flags.top_genes);
    }
    if (!flags.no_log) {
        // Transform only the genes we will use; unknown names are reported
        // later as per-gene failures.
        std::set<int> indices;
        for (const std::string& gene : data.gene_list) {
            const int g = data.dataset.gene_index(gene);
            if (g >= 0) indices.insert(g);
        }
        for (SpotRecord& spot : data.dataset.spots) {
            for (int g : indices) {
                spot.expression[static_cast<size_t>(g)] =
                    log_transform(spot.expression[static_cast<size_t>(g)], flags.pseudo_count);
            }
        }
    }
    return data;
}

void quantize_to_raster(const Patch& patch, RasterImage& out) {
    out.width = patch.width;
    out.height = patch.height;
    out.pixels.resize(patch.pixels.size());
    for (size_t i = 0; i < patch.pixels.size(); ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            long v = std::lround(255.0 * patch.pixels[i][ch]);
            if (v < 0) v = 0;
            if (v > 255) v = 255;
            out.pixels[i][ch] = static_cast<std::uint8_t>(v);
        }
    }
}

int cmd_synth(const std::string& out_dir, int patients, int spots, int genes, int side,
              double noise, double epsilon, std::uint64_t seed) {
    const auto start = Clock::now();

    SynthConfig config = make_synth_config(genes, patients, spots, side, noise, seed);
    config.eps = epsilon;
    const SpotDataset dataset = synth_generate(config);

    fs::create_directories(fs::path(out_dir) / "patches");

    std::ofstream manifest(fs::path(out_dir) / "manifest.csv", std::ios::binary);
    if (!manifest) throw DecodeError("cannot write manifest in " + out_dir);
    manifest << "patient_id,slide_id,spot_id,x,y,patch_path\n";

    std::ofstream expr(fs::path(out_dir) / "expression.csv", std::ios::binary);
    if (!expr) throw DecodeError("cannot write expression matrix in " + out_dir);
    expr << "spot_id";
    for (const std::string& gene : dataset.gene_names) expr << ',' << gene;
    expr << "\n";

    RasterImage raster;
    for (const SpotRecord& spot : dataset.spots) {
        const std::string rel = "patches/" + spot.spot_id + ".png";
        quantize_to_raster(*spot.patch, raster);
        write_png((fs::path(out_dir) / rel).string(), raster);

        manifest << spot.patient_id << ',' << spot.slide_id << ',' << spot.spot_id << ','
                 << static_cast<long>(spot.x) << ',' << static_cast<long>(spot.y) << ',' << rel
                 << "\n";
        expr << spot.spot_id;
        for (double v : spot.expression) expr << ',' << fmt17(v);
        expr << "\n";
    }
    manifest.close();
    expr.close();

    RunManifest run;
    run.command = "synth";
    run.config = {{"patients", std::to_string(patients)},
                  {"spots", std::to_string(spots)},
                  {"genes", std::to_string(genes)},
                  {"side", std::to_string(side)},
                  {"noise", fmt17(noise)},
                  {"epsilon", fmt17(epsilon)},
                  {"seed", std::to_string(seed)}};
    run.tool_version = kToolVersion;
    run.duration_seconds = seconds_since(start);
    write_run_manifest((fs::path(out_dir) / "run_manifest.json").string(), run);

    std::cout << "wrote " << dataset.spots.size() << " spots, " << dataset.gene_names.size()
              << " genes to " << out_dir << "\n";
    return 0;
}

int cmd_train(const TrainFlags& flags, const std::string& out_path) {
    const auto start = Clock::now();

    const LoadedData data = load_training_data(flags);
    const TrainConfig config = flags.to_config();

    const PatchSource source(parse_slide_map(flags.slide_entries), flags.patch_side);
    const std::vector<ColorHistogram> histograms = build_histograms(data.dataset, source);

    std::vector<size_t> all(data.dataset.spots.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;

    const ModelBundle bundle =
        train_all(data.dataset, histograms, all, data.gene_list, config, flags.workers);
    write_bundle(out_path, bundle);

    RunManifest run;
    run.command = "train";
    flags.echo(run.config);
    run.inputs[flags.manifest_path] = digest_file(flags.manifest_path);
    run.inputs[flags.expr_path] = digest_file(flags.expr_path);
    run.tool_version = kToolVersion;
    run.duration_seconds = seconds_since(start);
    write_run_manifest(out_path + ".run.json", run);

    std::cout << "trained " << bundle.models.size() << " genes";
    if (!bundle.failures.empty()) std::cout << " (" << bundle.failures.size() << " failed)";
    std::cout << " in " << fmt10(run.duration_seconds) << " s\n";
    std::cout << "bundle digest " << digest_file(out_path) << "\n";
    for (const GeneFailure& f : bundle.failures) {
        std::cerr << "failed gene '" << f.gene_name << "': " << f.error << "\n";
    }
    return 0;
}

int cmd_predict(const TrainFlags& flags, const std::string& bundle_path,
                const std::string& out_path) {
    const auto start = Clock::now();

    const ModelBundle bundle = read_bundle(bundle_path);
    const SpotDataset dataset = load_manifest(flags.manifest_path);
    const PatchSource source(parse_slide_map(flags.slide_entries), flags.patch_side);
    const std::vector<ColorHistogram> histograms = build_histograms(dataset, source);

    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw DecodeError("cannot write predictions: " + out_path);
    os << "spot_id";
    for (const TrainedGeneModel& m : bundle.models) os << ',' << m.gene_name;
    os << "\n";
    for (size_t i = 0; i < dataset.spots.size(); ++i) {
        os << dataset.spots[i].spot_id;
        for (const TrainedGeneModel& m : bundle.models) {
            os << ',' << fmt10(forward_histogram(histograms[i], m.params, bundle.config.eps));
        }
        os << "\n";
    }
    os.close();

    RunManifest run;
    run.command = "predict";
    run.inputs[flags.manifest_path] = digest_file(flags.manifest_path);
    run.inputs[bundle_path] = digest_file(bundle_path);
    run.tool_version = kToolVersion;
    run.duration_seconds = seconds_since(start);
    write_run_manifest(out_path + ".run.json", run);

    std::cout << "predicted " << bundle.models.size() << " genes at " << dataset.spots.size()
              << " spots\n";
    return 0;
}

void validate_overlay_genes(const std::vector<std::string>& overlay_genes,
                            const std::vector<std::string>& known_genes) {
    for (const std::string& gene : overlay_genes) {
        if (std::find(known_genes.begin(), known_genes.end(), gene) == known_genes.end()) {
            std::string known;
            for (const std::string& g : known_genes) {
                if (!known.empty()) known += ", ";
                known += g;
            }
            throw OutOfRange("unknown overlay gene '" + gene + "'; known genes: " + known);
        }
    }
}

// Genes must already be validated against the report's gene list.
void write_overlays(const SpotDataset& dataset, const EvalReport& report,
                    const std::vector<std::string>& overlay_genes,
                    const std::string& overlay_dir) {
    std::vector<std::string> slides;
    for (const SpotRecord& spot : dataset.spots) {
        if (std::find(slides.begin(), slides.end(), spot.slide_id) == slides.end()) {
            slides.push_back(spot.slide_id);
        }
    }
    fs::create_directories(overlay_dir);
    for (const std::string& gene : overlay_genes) {
        const size_t g = static_cast<size_t>(
            std::find(report.genes.begin(), report.genes.end(), gene) - report.genes.begin());
        for (const std::string& slide : slides) {
            std::vector<std::pair<double, double>> coords;
            std::vector<double> values;
            for (size_t i = 0; i < dataset.spots.size(); ++i) {
                if (dataset.spots[i].slide_id != slide) continue;
                const double v = report.predictions[i][g];
                if (!std::isfinite(v)) continue;
                coords.push_back({dataset.spots[i].x, dataset.spots[i].y});
                values.push_back(v);
            }
            if (values.empty()) continue;
            const std::string svg = spot_overlay(coords, values);
            const fs::path path = fs::path(overlay_dir) / ("overlay_" + slide + "_" + gene + ".svg");
            std::ofstream os(path, std::ios::binary);
            if (!os) throw DecodeError("cannot write overlay: " + path.string());
            os << svg;
        }
    }
}

int cmd_eval(const TrainFlags& flags, const std::string& out_path,
             const std::string& overlay_genes_flag, std::string overlay_dir, bool allow_skips) {
    const auto start = Clock::now();

    const LoadedData data = load_training_data(flags);
    const TrainConfig config = flags.to_config();

    // Reject unknown overlay genes before spending time on training.
    const std::vector<std::string> overlay_genes = split_csv_list(overlay_genes_flag);
    validate_overlay_genes(overlay_genes, data.gene_list);

    const PatchSource source(parse_slide_map(flags.slide_entries), flags.patch_side);
    const std::vector<ColorHistogram> histograms = build_histograms(data.dataset, source);

    const EvalReport report =
        run_cv(data.dataset, histograms, data.gene_list, config, flags.workers);
    write_report_csv(out_path, report);

    if (!overlay_genes.empty()) {
        if (overlay_dir.empty()) {
            overlay_dir = fs::path(out_path).parent_path().string();
            if (overlay_dir.empty()) overlay_dir = ".";
        }
        write_overlays(data.dataset, report, overlay_genes, overlay_dir);
    }

    RunManifest run;
    run.command = "eval";
    flags.echo(run.config);
    run.inputs[flags.manifest_path] = digest_file(flags.manifest_path);
    run.inputs[flags.expr_path] = digest_file(flags.expr_path);
    run.tool_version = kToolVersion;
    run.duration_seconds = seconds_since(start);
    write_run_manifest(out_path + ".run.json", run);

    std::cout << "evaluated " << report.genes.size() << " genes over " << report.folds.size()
              << " folds in " << fmt10(run.duration_seconds) << " s\n";
    std::cout << "genes with median r > 0.5: " << report.count_r_gt_half << "\n";
    std::cout << "genes with combined p < 1e-5: " << report.count_p_significant << "\n";

    std::vector<std::string> unevaluable;
    for (const GeneSummary& s : report.per_gene) {
        if (!s.evaluable) unevaluable.push_back(s.gene);
    }
    if (!unevaluable.empty()) {
        std::cerr << unevaluable.size() << " gene(s) unevaluable:";
        for (const std::string& g : unevaluable) std::cerr << " " << g;
        std::cerr << "\n";
        if (!allow_skips) throw EmptyDataset("unevaluable genes present (use --allow-skips to tolerate)");
    }
    return 0;
}

int cmd_baseline(const TrainFlags& flags, const std::string& features_path,
                 const std::string& out_path) {
    const auto start = Clock::now();

    const LoadedData data = load_training_data(flags);
    const FeatureTable features = load_feature_table(features_path);

    size_t dropped = 0;
    const EvalReport report =
        run_cv_ols(data.dataset, features, data.gene_list, flags.workers, &dropped);
    if (dropped > 0) {
        std::cerr << "note: dropped " << dropped << " spots without feature rows\n";
    }
    write_report_csv(out_path, report);

    RunManifest run;
    run.command = "baseline";
    flags.echo(run.config);
    run.inputs[flags.manifest_path] = digest_file(flags.manifest_path);
    run.inputs[flags.expr_path] = digest_file(flags.expr_path);
    run.inputs[features_path] = digest_file(features_path);
    run.tool_version = kToolVersion;
    run.duration_seconds = seconds_since(start);
    write_run_manifest(out_path + ".run.json", run);

    std::cout << "baseline evaluated " << report.genes.size() << " genes over "
              << report.folds.size() << " folds\n";
    std::cout << "genes with median r > 0.5: " << report.count_r_gt_half << "\n";
    std::cout << "genes with combined p < 1e-5: " << report.count_p_significant << "\n";
    return 0;
}

int cmd_report(const std::string& report_path, int top) {
    const ParsedReport parsed = read_report_csv(report_path);

    int r_count = 0, p_count = 0;
    for (const ReportRow& row : parsed.rows) {
        if (row.evaluable && row.median_r > 0.5) ++r_count;
        if (row.evaluable && row.combined_p < kSignificanceThreshold) ++p_count;
    }
    if (r_count != parsed.count_r_gt_half || p_count != parsed.count_p_significant) {
        throw MalformedRow("report summary counts disagree with rows in " + report_path);
    }

    std::vector<const ReportRow*> ranked;
    for (const ReportRow& row : parsed.rows) {
        if (row.evaluable) ranked.push_back(&row);
    }
    std::sort(ranked.begin(), ranked.end(), [](const ReportRow* a, const ReportRow* b) {
        if (a->median_r != b->median_r) return a->median_r > b->median_r;
        return a->gene < b->gene;
    });

    std::cout << "gene        median_r    combined_p\n";
    for (size_t i = 0; i < ranked.size() && i < static_cast<size_t>(top); ++i) {
        std::printf("%-12s%-12.4g%-12.4g\n", ranked[i]->gene.c_str(), ranked[i]->median_r,
                    ranked[i]->combined_p);
    }
    std::cout << "genes with median r > 0.5: " << parsed.count_r_gt_half << "\n";
    std::cout << "genes with combined p < 1e-5: " << parsed.count_p_significant << "\n";
    std::cout << "genes reported: " << parsed.rows.size() << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Stain-aware spot-level gene expression prediction"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    std::string synth_out;
    int synth_patients = 6, synth_spots = 200, synth_genes = 3, synth_side = 32;
    double synth_noise = 0.05, synth_epsilon = 0.01;
    std::uint64_t synth_seed = 7;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--patients", synth_patients)->check(CLI::PositiveNumber);
    synth->add_option("--spots", synth_spots, "Spots per patient")->check(CLI::PositiveNumber);
    synth->add_option("--genes", synth_genes)->check(CLI::PositiveNumber);
    synth->add_option("--side", synth_side, "Patch side in pixels")->check(CLI::PositiveNumber);
    synth->add_option("--noise", synth_noise, "Target noise sigma")->check(CLI::NonNegativeNumber);
    synth->add_option("--epsilon", synth_epsilon, "Optical-density floor")
        ->check(CLI::Range(1e-300, 0.9999999));
    synth->add_option("--seed", synth_seed);

    // train
    auto* train = app.add_subcommand("train", "Train per-gene models");
    TrainFlags train_flags;
    std::string train_out;
    train_flags.add_to(*train);
    train->add_option("--out", train_out, "Model bundle path")->required();

    // predict
    auto* predict = app.add_subcommand("predict", "Predict expression from a trained bundle");
    TrainFlags predict_flags;
    std::string predict_bundle, predict_out;
    predict->add_option("--manifest", predict_flags.manifest_path, "Spot manifest CSV")->required();
    predict->add_option("--bundle", predict_bundle, "Model bundle path")->required();
    predict->add_option("--out", predict_out, "Predictions CSV path")->required();
    predict->add_option("--slide", predict_flags.slide_entries,
                        "Slide raster mapping <slide_id>=<png path>");
    predict->add_option("--patch-side", predict_flags.patch_side)->check(CLI::PositiveNumber);

    // eval
    auto* eval = app.add_subcommand("eval", "Leave-one-patient-out evaluation");
    TrainFlags eval_flags;
    std::string eval_out, eval_overlay_genes, eval_overlay_dir;
    bool eval_allow_skips = false;
    eval_flags.add_to(*eval);
    eval->add_option("--out", eval_out, "Report CSV path")->required();
    eval->add_option("--overlay-genes", eval_overlay_genes,
                     "Comma-separated genes to render as spot overlays");
    eval->add_option("--overlay-dir", eval_overlay_dir, "Directory for overlay SVGs");
    eval->add_flag("--allow-skips", eval_allow_skips, "Exit 0 even when genes are unevaluable");

    // baseline
    auto* baseline = app.add_subcommand("baseline", "OLS baseline on a precomputed feature table");
    TrainFlags baseline_flags;
    std::string baseline_features, baseline_out;
    baseline->add_option("--manifest", baseline_flags.manifest_path, "Spot manifest CSV")
        ->required();
    baseline->add_option("--expr", baseline_flags.expr_path, "Expression matrix")->required();
    baseline->add_option("--features", baseline_features, "Feature table CSV")->required();
    baseline->add_option("--out", baseline_out, "Report CSV path")->required();
    baseline->add_option("--top-genes", baseline_flags.top_genes)->check(CLI::PositiveNumber);
    baseline->add_option("--pseudo-count", baseline_flags.pseudo_count)
        ->check(CLI::PositiveNumber);
    baseline->add_flag("--no-log", baseline_flags.no_log);
    baseline->add_option("--genes", baseline_flags.genes_flag);
    baseline->add_option("--workers", baseline_flags.workers)->check(CLI::PositiveNumber);

    // report
    auto* report = app.add_subcommand("report", "Summarize a report CSV");
    std::string report_path;
    int report_top = 10;
    report->add_option("--report", report_path, "Report CSV path")->required();
    report->add_option("--top", report_top, "How many genes to list")->check(CLI::PositiveNumber);

    std::vector<const char*> argv;
    argv.push_back("nsl");
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            return cmd_synth(synth_out, synth_patients, synth_spots, synth_genes, synth_side,
                             synth_noise, synth_epsilon, synth_seed);
        }
        if (train->parsed()) return cmd_train(train_flags, train_out);
        if (predict->parsed()) return cmd_predict(predict_flags, predict_bundle, predict_out);
        if (eval->parsed()) {
            return cmd_eval(eval_flags, eval_out, eval_overlay_genes, eval_overlay_dir,
                            eval_allow_skips);
        }
        if (baseline->parsed()) return cmd_baseline(baseline_flags, baseline_features, baseline_out);
        if (report->parsed()) return cmd_report(report_path, report_top);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case ErrorKind::Validation: return 1;
            case ErrorKind::Data: return 2;
            case ErrorKind::Numeric: return 3;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}

}  // namespace nsl
