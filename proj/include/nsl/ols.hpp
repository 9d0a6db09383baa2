#ifndef NSL_OLS_HPP
#define NSL_OLS_HPP

#include <string>
#include <vector>

#include "nsl/dataset.hpp"
#include "nsl/evaluate.hpp"

namespace nsl {

struct FeatureTable {
    std::vector<std::string> spot_ids;
    std::vector<std::string> feature_names;
    std::vector<double> values;  // row-major, rows() x cols()

    size_t rows() const { return spot_ids.size(); }
    size_t cols() const { return feature_names.size(); }
    double at(size_t row, size_t col) const { return values[row * cols() + col]; }
};

struct OlsModel {
    std::string gene_name;
    std::vector<double> weights;  // intercept first, then one slope per feature
    std::vector<std::string> feature_names;
    bool rank_deficient = false;
};

// CSV with header spot_id,<feature names...>.
FeatureTable load_feature_table(const std::string& path);

// Least squares with an intercept column, solved by column-pivoted QR. A
// rank-deficient design falls back to ridge-jittered normal equations
// (jitter 1e-10 * trace / F) and flags the model.
OlsModel ols_fit(const FeatureTable& features, const std::vector<double>& targets);

// y_hat = intercept + X * slopes; feature columns are matched by name so a
// permuted table predicts identically.
std::vector<double> ols_predict(const OlsModel& model, const FeatureTable& features);

// OLS under the same leave-one-patient-out protocol and report schema as the
// stain model. Spots lacking a feature row are dropped (count reported).
EvalReport run_cv_ols(const SpotDataset& dataset, const FeatureTable& features,
                      const std::vector<std::string>& gene_list, int workers,
                      size_t* dropped_count = nullptr);

}  // namespace nsl

#endif  // NSL_OLS_HPP
