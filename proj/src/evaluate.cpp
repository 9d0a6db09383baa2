#include "nsl/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "nsl/stats.hpp"
#include "nsl/train.hpp"

namespace nsl {

namespace {

double median_sorted_copy(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt_stat(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::vector<Fold> lopo_split(const SpotDataset& dataset) {
    if (dataset.patients.size() < 2) {
        throw SinglePatient("leave-one-patient-out needs >= 2 patients, got " +
                            std::to_string(dataset.patients.size()));
    }
    std::vector<Fold> folds;
    folds.reserve(dataset.patients.size());
    for (const std::string& patient : dataset.patients) {
        Fold fold;
        fold.held_out_patient = patient;
        for (size_t i = 0; i < dataset.spots.size(); ++i) {
            if (dataset.spots[i].patient_id == patient) {
                fold.test_indices.push_back(i);
            } else {
                fold.train_indices.push_back(i);
            }
        }
        folds.push_back(std::move(fold));
    }
    return folds;
}

double combine_correlations(const std::vector<double>& per_fold_r) {
    if (per_fold_r.empty()) throw Empty("combine_correlations: no values");
    return median_sorted_copy(per_fold_r);
}

double combine_pvalues(const std::vector<double>& per_fold_p) {
    if (per_fold_p.empty()) throw Empty("combine_pvalues: no values");
    for (double p : per_fold_p) {
        if (!(p > 0.0 && p <= 1.0)) {
            throw OutOfRange("combine_pvalues: p-value " + std::to_string(p) +
                             " outside (0,1]");
        }
    }
    return std::min(1.0, 2.0 * median_sorted_copy(per_fold_p));
}

EvalReport assemble_report(const std::vector<std::string>& genes,
                           std::vector<FoldResult> folds) {
    EvalReport report;
    report.genes = genes;
    report.folds = std::move(folds);

    for (size_t g = 0; g < genes.size(); ++g) {
        GeneSummary summary;
        summary.gene = genes[g];
        std::vector<double> rs, ps;
        for (const FoldResult& fold : report.folds) {
            const FoldGeneStat& stat = fold.per_gene[g];
            if (stat.valid) {
                rs.push_back(stat.r);
                ps.push_back(stat.p);
            } else {
                ++summary.n_skipped;
            }
        }
        summary.n_folds = static_cast<int>(rs.size());
        if (!rs.empty()) {
            summary.evaluable = true;
            summary.median_r = combine_correlations(rs);
            summary.combined_p = combine_pvalues(ps);
            if (summary.median_r > 0.5) ++report.count_r_gt_half;
            if (summary.combined_p < kSignificanceThreshold) ++report.count_p_significant;
        }
        report.per_gene.push_back(std::move(summary));
    }
    return report;
}

EvalReport run_cv(const SpotDataset& dataset, const std::vector<ColorHistogram>& histograms,
                  const std::vector<std::string>& gene_list, const TrainConfig& config,
                  int workers) {
    if (gene_list.empty()) throw Empty("run_cv: gene list is empty");
    const std::vector<Fold> folds = lopo_split(dataset);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<double>> predictions(
        dataset.spots.size(), std::vector<double>(gene_list.size(), nan));

    std::vector<FoldResult> fold_results;
    fold_results.reserve(folds.size());

    for (const Fold& fold : folds) {
        const ModelBundle bundle =
            train_all(dataset, histograms, fold.train_indices, gene_list, config, workers);

        std::map<std::string, const TrainedGeneModel*> by_gene;
        for (const TrainedGeneModel& model : bundle.models) by_gene[model.gene_name] = &model;
        std::map<std::string, std::string> failed;
        for (const GeneFailure& f : bundle.failures) failed[f.gene_name] = f.error;

        FoldResult result;
        result.held_out_patient = fold.held_out_patient;
        result.per_gene.resize(gene_list.size());

        for (size_t g = 0; g < gene_list.size(); ++g) {
            FoldGeneStat& stat = result.per_gene[g];
            auto failure = failed.find(gene_list[g]);
            if (failure != failed.end()) {
                stat.skipped_reason = "training failed: " + failure->second;
                continue;
            }
            const TrainedGeneModel* model = by_gene.at(gene_list[g]);
            const int gene_index = dataset.gene_index(gene_list[g]);

            std::vector<double> predicted, truth;
            predicted.reserve(fold.test_indices.size());
            truth.reserve(fold.test_indices.size());
            for (size_t spot : fold.test_indices) {
                const double y = forward_histogram(histograms[spot], model->params, config.eps);
                predicted.push_back(y);
                truth.push_back(dataset.spots[spot].expression[static_cast<size_t>(gene_index)]);
                predictions[spot][g] = y;
            }
            stat.n = static_cast<long>(predicted.size());
            try {
                stat.r = pearson(predicted, truth);
                stat.p = pearson_pvalue(stat.r, stat.n);
                stat.valid = true;
            } catch (const Error& e) {
                stat.skipped_reason = e.name();
            }
        }
        fold_results.push_back(std::move(result));
    }

    EvalReport report = assemble_report(gene_list, std::move(fold_results));
    report.predictions = std::move(predictions);
    return report;
}

void write_report_csv(const std::string& path, const EvalReport& report) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DecodeError("cannot write report: " + path);

    os << "gene,median_r,combined_p,n_folds,n_skipped\n";
    for (const GeneSummary& s : report.per_gene) {
        if (s.evaluable) {
            os << s.gene << ',' << fmt_stat(s.median_r) << ',' << fmt_stat(s.combined_p) << ','
               << s.n_folds << ',' << s.n_skipped << "\n";
        } else {
            os << s.gene << ",NA,NA,0," << s.n_skipped << "\n";
        }
    }
    os << "# summary,genes_with_median_r_gt_0.5," << report.count_r_gt_half << "\n";
    os << "# summary,genes_with_combined_p_lt_1e-5," << report.count_p_significant << "\n";
    if (!os.good()) throw DecodeError("short write on report: " + path);
}

ParsedReport read_report_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DecodeError("cannot open report: " + path);

    std::string line;
    if (!std::getline(is, line)) throw MalformedRow("report is empty: " + path);
    if (line.rfind("gene,median_r,combined_p,n_folds,n_skipped", 0) != 0) {
        throw MissingColumn("unexpected report header: " + line);
    }

    ParsedReport parsed;
    size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("# summary,", 0) == 0) {
            std::stringstream ss(line.substr(10));
            std::string key, value;
            std::getline(ss, key, ',');
            std::getline(ss, value, ',');
            if (key == "genes_with_median_r_gt_0.5") {
                parsed.count_r_gt_half = std::stoi(value);
            } else if (key == "genes_with_combined_p_lt_1e-5") {
                parsed.count_p_significant = std::stoi(value);
            }
            continue;
        }
        std::stringstream ss(line);
        std::string gene, r, p, n_folds, n_skipped;
        if (!std::getline(ss, gene, ',') || !std::getline(ss, r, ',') ||
            !std::getline(ss, p, ',') || !std::getline(ss, n_folds, ',') ||
            !std::getline(ss, n_skipped, ',')) {
            throw MalformedRow("report row " + std::to_string(line_no));
        }
        ReportRow row;
        row.gene = gene;
        try {
            row.n_folds = std::stoi(n_folds);
            row.n_skipped = std::stoi(n_skipped);
            if (r != "NA") {
                row.evaluable = true;
                row.median_r = std::stod(r);
                row.combined_p = std::stod(p);
            }
        } catch (const std::exception&) {
            throw MalformedRow("report row " + std::to_string(line_no) + ": bad number");
        }
        parsed.rows.push_back(std::move(row));
    }
    return parsed;
}

}  // namespace nsl
