#ifndef NSL_DATASET_HPP
#define NSL_DATASET_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nsl/image_png.hpp"
#include "nsl/stain.hpp"

namespace nsl {

struct SpotRecord {
    std::string patient_id;
    std::string slide_id;
    std::string spot_id;
    double x = 0;
    double y = 0;
    std::string patch_path;                 // empty when cropping from the slide raster
    std::shared_ptr<const Patch> patch;     // set for in-memory datasets
    std::vector<double> expression;         // aligned with SpotDataset::gene_names
};

struct SpotDataset {
    std::vector<SpotRecord> spots;
    std::vector<std::string> gene_names;
    std::vector<std::string> patients;  // distinct, in first-appearance order

    // Index into gene_names, or -1 when absent.
    int gene_index(const std::string& name) const;
};

struct SynthConfig {
    std::vector<NslParams> true_params;  // one per synthetic gene
    Mat3 mixing;                         // latent stain concentrations -> optical density
    int patients = 6;
    int spots_per_patient = 200;
    int patch_side = 32;
    double noise_sigma = 0.05;
    double eps = 0.01;  // optical-density floor shared with the downstream model
    std::uint64_t seed = 0;
};

// Fills true_params (one recoverable generator per gene) and a default
// mixing matrix, both drawn deterministically from the seed.
SynthConfig make_synth_config(int genes, int patients, int spots_per_patient, int patch_side,
                              double noise_sigma, std::uint64_t seed);

// Parses the spot manifest (CSV, header patient_id,slide_id,spot_id,x,y,patch_path;
// columns may appear in any order). Expression vectors are left empty.
SpotDataset load_manifest(const std::string& path);

// Attaches expression vectors from a tab- or comma-separated matrix whose
// first column is spot_id and whose remaining headers are gene names.
// Manifest spots missing from the matrix are dropped; the count is reported
// through dropped_count when non-null.
SpotDataset load_expression(const std::string& path, const SpotDataset& manifest,
                            size_t* dropped_count = nullptr);

// Genes ranked by median expression (descending), ties broken by ascending
// name; returns the top min(n, G).
std::vector<std::string> select_top_genes(const SpotDataset& dataset, int n);

// ln(value + pseudo_count)
double log_transform(double value, double pseudo_count);

// Applies log_transform to every expression value in place.
void apply_log_transform(SpotDataset& dataset, double pseudo_count);

// Axis-aligned side x side crop centered at (cx, cy); out-of-bounds area is
// filled with white and recorded in the patch's padded_fraction.
Patch extract_patch(const RasterImage& image, int cx, int cy, int side);

// Deterministic synthetic dataset produced by the generative counterpart of
// the model: latent concentrations per spot, mixed to optical density with
// per-pixel jitter, inverted to pixel colors, targets from the true params
// plus Gaussian noise.
SpotDataset synth_generate(const SynthConfig& config);

// Resolves each spot to a pixel patch: in-memory patch if present, else the
// PNG at patch_path, else a crop from the slide raster mapped by slide_id.
class PatchSource {
public:
    PatchSource() = default;
    PatchSource(std::map<std::string, std::string> slide_paths, int crop_side);

    Patch load(const SpotRecord& spot) const;

private:
    std::map<std::string, std::string> slide_paths_;
    int crop_side_ = 256;
    mutable std::map<std::string, RasterImage> slide_cache_;
};

// One histogram per spot, aligned with dataset.spots. Pixel data is released
// as soon as each histogram is built.
std::vector<ColorHistogram> build_histograms(const SpotDataset& dataset,
                                             const PatchSource& source);

}  // namespace nsl

#endif  // NSL_DATASET_HPP
