#include "nsl/ols.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "nsl/parallel.hpp"
#include "nsl/stats.hpp"

namespace nsl {

FeatureTable load_feature_table(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DecodeError("cannot open feature table: " + path);

    std::string line;
    if (!std::getline(is, line)) throw MalformedRow("feature table is empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    FeatureTable table;
    {
        std::stringstream ss(line);
        std::string field;
        bool first = true;
        while (std::getline(ss, field, ',')) {
            if (first) {
                if (field != "spot_id") {
                    throw MissingColumn("feature table must start with a 'spot_id' column");
                }
                first = false;
            } else {
                table.feature_names.push_back(field);
            }
        }
        if (table.feature_names.empty()) {
            throw MissingColumn("feature table has no feature columns");
        }
    }

    size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != table.feature_names.size() + 1) {
            throw RaggedRow("feature table row " + std::to_string(line_no));
        }
        table.spot_ids.push_back(fields[0]);
        for (size_t i = 1; i < fields.size(); ++i) {
            char* end = nullptr;
            const double v = std::strtod(fields[i].c_str(), &end);
            if (end == fields[i].c_str() || *end != '\0') {
                throw MalformedRow("feature table row " + std::to_string(line_no) +
                                   ": bad number '" + fields[i] + "'");
            }
            if (!std::isfinite(v)) {
                throw NonFinite("feature table row " + std::to_string(line_no));
            }
            table.values.push_back(v);
        }
    }
    return table;
}

OlsModel ols_fit(const FeatureTable& features, const std::vector<double>& targets) {
    const size_t n = features.rows();
    const size_t f = features.cols();
    if (targets.size() != n) {
        throw LengthMismatch("ols_fit: " + std::to_string(targets.size()) + " targets for " +
                             std::to_string(n) + " rows");
    }
    if (n < f + 1) {
        throw TooFewRows("ols_fit: " + std::to_string(n) + " rows for " + std::to_string(f) +
                         " features (+ intercept)");
    }
    for (double v : features.values) {
        if (!std::isfinite(v)) throw NonFinite("ols_fit: non-finite feature");
    }
    for (double t : targets) {
        if (!std::isfinite(t)) throw NonFinite("ols_fit: non-finite target");
    }

    Eigen::MatrixXd design(n, f + 1);
    Eigen::VectorXd t(n);
    for (size_t i = 0; i < n; ++i) {
        design(i, 0) = 1.0;
        for (size_t j = 0; j < f; ++j) design(i, j + 1) = features.at(i, j);
        t(static_cast<Eigen::Index>(i)) = targets[i];
    }

    OlsModel model;
    model.feature_names = features.feature_names;
    model.weights.resize(f + 1);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() == static_cast<Eigen::Index>(f + 1)) {
        Eigen::VectorXd w = qr.solve(t);
        for (size_t j = 0; j <= f; ++j) model.weights[j] = w(static_cast<Eigen::Index>(j));
        return model;
    }

    // Rank-deficient design: ridge jitter on the normal equations.
    model.rank_deficient = true;
    Eigen::MatrixXd gram = design.transpose() * design;
    const double jitter = 1e-10 * gram.trace() / static_cast<double>(f);
    gram.diagonal().array() += jitter;
    Eigen::VectorXd w = gram.ldlt().solve(design.transpose() * t);
    for (size_t j = 0; j <= f; ++j) model.weights[j] = w(static_cast<Eigen::Index>(j));
    return model;
}

std::vector<double> ols_predict(const OlsModel& model, const FeatureTable& features) {
    // Map each model feature onto the (possibly permuted) table column.
    std::unordered_map<std::string, size_t> column_of;
    for (size_t j = 0; j < features.feature_names.size(); ++j) {
        column_of[features.feature_names[j]] = j;
    }
    if (features.feature_names.size() != model.feature_names.size()) {
        throw ColumnMismatch("ols_predict: feature count differs from training");
    }
    std::vector<size_t> order(model.feature_names.size());
    for (size_t j = 0; j < model.feature_names.size(); ++j) {
        auto it = column_of.find(model.feature_names[j]);
        if (it == column_of.end()) {
            throw ColumnMismatch("ols_predict: missing feature '" + model.feature_names[j] + "'");
        }
        order[j] = it->second;
    }

    std::vector<double> out(features.rows());
    for (size_t i = 0; i < features.rows(); ++i) {
        double y = model.weights[0];
        for (size_t j = 0; j < order.size(); ++j) {
            y += model.weights[j + 1] * features.at(i, order[j]);
        }
        out[i] = y;
    }
    return out;
}

EvalReport run_cv_ols(const SpotDataset& dataset, const FeatureTable& features,
                      const std::vector<std::string>& gene_list, int workers,
                      size_t* dropped_count) {
    if (gene_list.empty()) throw Empty("run_cv_ols: gene list is empty");

    std::unordered_map<std::string, size_t> feature_row;
    for (size_t i = 0; i < features.spot_ids.size(); ++i) feature_row[features.spot_ids[i]] = i;

    // Restrict to spots that have a feature row, keeping dataset order.
    std::vector<size_t> spot_of;       // kept spot -> dataset index
    std::vector<size_t> row_of;        // kept spot -> feature row
    for (size_t i = 0; i < dataset.spots.size(); ++i) {
        auto it = feature_row.find(dataset.spots[i].spot_id);
        if (it != feature_row.end()) {
            spot_of.push_back(i);
            row_of.push_back(it->second);
        }
    }
    if (dropped_count) *dropped_count = dataset.spots.size() - spot_of.size();
    if (spot_of.empty()) throw NoOverlap("no dataset spot ids match the feature table");

    SpotDataset joined;
    joined.gene_names = dataset.gene_names;
    for (size_t i : spot_of) joined.spots.push_back(dataset.spots[i]);
    for (const SpotRecord& spot : joined.spots) {
        bool known = false;
        for (const std::string& p : joined.patients) known = known || p == spot.patient_id;
        if (!known) joined.patients.push_back(spot.patient_id);
    }

    std::vector<int> gene_index(gene_list.size());
    for (size_t g = 0; g < gene_list.size(); ++g) {
        gene_index[g] = joined.gene_index(gene_list[g]);
    }

    const std::vector<Fold> folds = lopo_split(joined);
    std::vector<FoldResult> fold_results(folds.size());

    auto subtable = [&](const std::vector<size_t>& indices) {
        FeatureTable sub;
        sub.feature_names = features.feature_names;
        for (size_t i : indices) {
            sub.spot_ids.push_back(joined.spots[i].spot_id);
            const size_t row = row_of[i];
            for (size_t j = 0; j < features.cols(); ++j) sub.values.push_back(features.at(row, j));
        }
        return sub;
    };

    for (size_t fi = 0; fi < folds.size(); ++fi) {
        const Fold& fold = folds[fi];
        FoldResult& result = fold_results[fi];
        result.held_out_patient = fold.held_out_patient;
        result.per_gene.resize(gene_list.size());

        const FeatureTable train_x = subtable(fold.train_indices);
        const FeatureTable test_x = subtable(fold.test_indices);

        parallel_for(gene_list.size(), workers, [&](size_t g) {
            FoldGeneStat& stat = result.per_gene[g];
            if (gene_index[g] < 0) {
                stat.skipped_reason = "unknown gene";
                return;
            }
            std::vector<double> train_t, test_t;
            for (size_t i : fold.train_indices) {
                train_t.push_back(joined.spots[i].expression[static_cast<size_t>(gene_index[g])]);
            }
            for (size_t i : fold.test_indices) {
                test_t.push_back(joined.spots[i].expression[static_cast<size_t>(gene_index[g])]);
            }
            try {
                const OlsModel model = ols_fit(train_x, train_t);
                const std::vector<double> predicted = ols_predict(model, test_x);
                stat.n = static_cast<long>(predicted.size());
                stat.r = pearson(predicted, test_t);
                stat.p = pearson_pvalue(stat.r, stat.n);
                stat.valid = true;
            } catch (const Error& e) {
                stat.skipped_reason = e.name();
            } catch (const std::exception& e) {
                stat.skipped_reason = e.what();
            }
        });
    }

    return assemble_report(gene_list, std::move(fold_results));
}

}  // namespace nsl
