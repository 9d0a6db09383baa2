#ifndef NSL_EVALUATE_HPP
#define NSL_EVALUATE_HPP

#include <string>
#include <vector>

#include "nsl/dataset.hpp"
#include "nsl/optimizer.hpp"
#include "nsl/stain.hpp"

namespace nsl {

struct Fold {
    std::string held_out_patient;
    std::vector<size_t> train_indices;
    std::vector<size_t> test_indices;
};

// One (fold, gene) cell: either a correlation with its p-value over n test
// spots, or a skip reason (too few spots, zero variance, training failure).
struct FoldGeneStat {
    bool valid = false;
    double r = 0;
    double p = 1;
    long n = 0;
    std::string skipped_reason;
};

struct FoldResult {
    std::string held_out_patient;
    std::vector<FoldGeneStat> per_gene;  // aligned with the report's gene list
};

struct GeneSummary {
    std::string gene;
    bool evaluable = false;
    double median_r = 0;
    double combined_p = 1;
    int n_folds = 0;    // folds contributing to the medians
    int n_skipped = 0;
};

struct EvalReport {
    std::vector<std::string> genes;
    std::vector<GeneSummary> per_gene;
    std::vector<FoldResult> folds;
    int count_r_gt_half = 0;       // genes with median r > 0.5
    int count_p_significant = 0;   // genes with combined p < 1e-5
    // Cross-validated prediction per (spot, gene); NaN where unavailable.
    std::vector<std::vector<double>> predictions;
};

constexpr double kSignificanceThreshold = 1e-5;

// One fold per distinct patient: that patient's spots test, the rest train.
std::vector<Fold> lopo_split(const SpotDataset& dataset);

// Median (even count: mean of the two middle values).
double combine_correlations(const std::vector<double>& per_fold_r);

// Conservative combination min(1, 2 * median(p)).
double combine_pvalues(const std::vector<double>& per_fold_p);

// Aggregates per-fold statistics into per-gene medians, combined p-values,
// and the two summary counts.
EvalReport assemble_report(const std::vector<std::string>& genes,
                           std::vector<FoldResult> folds);

// Full leave-one-patient-out protocol: train per-gene models on each fold's
// training spots, correlate predictions on the held-out patient, aggregate.
EvalReport run_cv(const SpotDataset& dataset, const std::vector<ColorHistogram>& histograms,
                  const std::vector<std::string>& gene_list, const TrainConfig& config,
                  int workers);

// Report CSV: gene,median_r,combined_p,n_folds,n_skipped plus two summary
// footer lines. Unevaluable genes carry NA statistics.
void write_report_csv(const std::string& path, const EvalReport& report);

struct ReportRow {
    std::string gene;
    bool evaluable = false;
    double median_r = 0;
    double combined_p = 1;
    int n_folds = 0;
    int n_skipped = 0;
};

struct ParsedReport {
    std::vector<ReportRow> rows;
    int count_r_gt_half = 0;
    int count_p_significant = 0;
};

ParsedReport read_report_csv(const std::string& path);

}  // namespace nsl

#endif  // NSL_EVALUATE_HPP
