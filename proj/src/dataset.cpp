#include "nsl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "nsl/rng.hpp"

namespace nsl {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, delim)) fields.push_back(field);
    if (!line.empty() && line.back() == delim) fields.emplace_back();
    return fields;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

double parse_double(const std::string& s, const std::string& context, size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw MalformedRow("row " + std::to_string(line_no) + ": " + context +
                           " is not a number: '" + s + "'");
    }
    return v;
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

int SpotDataset::gene_index(const std::string& name) const {
    for (size_t i = 0; i < gene_names.size(); ++i) {
        if (gene_names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

SpotDataset load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DecodeError("cannot open manifest: " + path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();

    std::string line;
    if (!std::getline(in, line)) throw MalformedRow("manifest is empty: " + path);
    const auto header = split_line(strip_cr(line), ',');

    const char* required[] = {"patient_id", "slide_id", "spot_id", "x", "y", "patch_path"};
    std::unordered_map<std::string, size_t> col;
    for (size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* name : required) {
        if (!col.count(name)) throw MissingColumn(std::string("manifest lacks column '") + name + "'");
    }

    SpotDataset dataset;
    std::unordered_set<std::string> seen_spots;
    std::unordered_set<std::string> seen_patients;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_line(line, ',');
        if (fields.size() != header.size()) {
            throw MalformedRow("row " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " fields, got " +
                               std::to_string(fields.size()));
        }
        SpotRecord spot;
        spot.patient_id = fields[col["patient_id"]];
        spot.slide_id = fields[col["slide_id"]];
        spot.spot_id = fields[col["spot_id"]];
        spot.x = parse_double(fields[col["x"]], "x", line_no);
        spot.y = parse_double(fields[col["y"]], "y", line_no);
        spot.patch_path = fields[col["patch_path"]];
        if (spot.x < 0 || spot.y < 0) {
            throw MalformedRow("row " + std::to_string(line_no) + ": negative coordinates");
        }
        if (spot.patient_id.empty() || spot.spot_id.empty()) {
            throw MalformedRow("row " + std::to_string(line_no) + ": empty identifier");
        }
        if (!seen_spots.insert(spot.spot_id).second) {
            throw DuplicateSpotId("spot '" + spot.spot_id + "' at row " + std::to_string(line_no));
        }
        if (!spot.patch_path.empty()) {
            std::filesystem::path p(spot.patch_path);
            if (p.is_relative()) spot.patch_path = (base / p).string();
        }
        if (seen_patients.insert(spot.patient_id).second) {
            dataset.patients.push_back(spot.patient_id);
        }
        dataset.spots.push_back(std::move(spot));
    }
    return dataset;
}

SpotDataset load_expression(const std::string& path, const SpotDataset& manifest,
                            size_t* dropped_count) {
    std::ifstream in(path);
    if (!in) throw DecodeError("cannot open expression matrix: " + path);

    std::string line;
    if (!std::getline(in, line)) throw MalformedRow("expression matrix is empty: " + path);
    line = strip_cr(line);
    const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
    const auto header = split_line(line, delim);
    if (header.empty() || header[0] != "spot_id") {
        throw MissingColumn("expression matrix must start with a 'spot_id' column");
    }
    if (header.size() < 2) throw MissingColumn("expression matrix has no gene columns");

    std::vector<std::string> genes(header.begin() + 1, header.end());
    {
        std::unordered_set<std::string> unique(genes.begin(), genes.end());
        if (unique.size() != genes.size()) {
            throw MalformedRow("expression matrix has duplicate gene columns");
        }
    }

    std::unordered_map<std::string, std::vector<double>> values;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_line(line, delim);
        if (fields.size() != header.size()) {
            throw RaggedRow("row " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        }
        std::vector<double> row(genes.size());
        for (size_t g = 0; g < genes.size(); ++g) {
            row[g] = parse_double(fields[g + 1], "expression value", line_no);
        }
        values[fields[0]] = std::move(row);
    }

    SpotDataset out;
    out.gene_names = std::move(genes);
    size_t dropped = 0;
    std::unordered_set<std::string> kept_patients;
    for (const SpotRecord& spot : manifest.spots) {
        auto it = values.find(spot.spot_id);
        if (it == values.end()) {
            ++dropped;
            continue;
        }
        SpotRecord merged = spot;
        merged.expression = it->second;
        if (kept_patients.insert(merged.patient_id).second) {
            out.patients.push_back(merged.patient_id);
        }
        out.spots.push_back(std::move(merged));
    }
    if (out.spots.empty()) {
        throw NoOverlap("no manifest spot ids match the expression matrix");
    }
    if (dropped_count) *dropped_count = dropped;
    return out;
}

std::vector<std::string> select_top_genes(const SpotDataset& dataset, int n) {
    if (n < 1) throw OutOfRange("select_top_genes: n must be >= 1");

    struct Ranked {
        std::string name;
        double median;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(dataset.gene_names.size());
    for (size_t g = 0; g < dataset.gene_names.size(); ++g) {
        std::vector<double> column;
        column.reserve(dataset.spots.size());
        for (const SpotRecord& spot : dataset.spots) column.push_back(spot.expression[g]);
        ranked.push_back({dataset.gene_names[g], median_of(std::move(column))});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.median != b.median) return a.median > b.median;
        return a.name < b.name;
    });
    const size_t take = std::min(static_cast<size_t>(n), ranked.size());
    std::vector<std::string> out;
    out.reserve(take);
    for (size_t i = 0; i < take; ++i) out.push_back(ranked[i].name);
    return out;
}

double log_transform(double value, double pseudo_count) {
    if (!(pseudo_count > 0)) throw OutOfRange("pseudo_count must be > 0");
    if (value < 0) throw NegativeExpression("expression value " + std::to_string(value));
    return std::log(value + pseudo_count);
}

void apply_log_transform(SpotDataset& dataset, double pseudo_count) {
    for (SpotRecord& spot : dataset.spots) {
        for (double& v : spot.expression) v = log_transform(v, pseudo_count);
    }
}

Patch extract_patch(const RasterImage& image, int cx, int cy, int side) {
    if (side < 1) throw OutOfRange("extract_patch: side must be >= 1");
    if (image.width < 1 || image.height < 1) throw DecodeError("extract_patch: empty image");

    Patch patch;
    patch.width = side;
    patch.height = side;
    patch.pixels.resize(static_cast<size_t>(side) * static_cast<size_t>(side));

    const int x0 = cx - side / 2;
    const int y0 = cy - side / 2;
    size_t padded = 0;
    for (int py = 0; py < side; ++py) {
        const int sy = y0 + py;
        for (int px = 0; px < side; ++px) {
            const int sx = x0 + px;
            Vec3& out = patch.pixels[static_cast<size_t>(py) * side + px];
            if (sx < 0 || sy < 0 || sx >= image.width || sy >= image.height) {
                out = {1.0, 1.0, 1.0};
                ++padded;
            } else {
                const auto& p = image.at(sx, sy);
                out = {p[0] / 255.0, p[1] / 255.0, p[2] / 255.0};
            }
        }
    }
    patch.padded_fraction =
        static_cast<double>(padded) / static_cast<double>(patch.pixels.size());
    return patch;
}

SynthConfig make_synth_config(int genes, int patients, int spots_per_patient, int patch_side,
                              double noise_sigma, std::uint64_t seed) {
    if (genes < 1) throw OutOfRange("make_synth_config: genes must be >= 1");
    SynthConfig config;
    config.patients = patients;
    config.spots_per_patient = spots_per_patient;
    config.patch_side = patch_side;
    config.noise_sigma = noise_sigma;
    config.seed = seed;
    config.mixing = Mat3{{0.65, 0.20, 0.10,
                          0.30, 0.55, 0.15,
                          0.10, 0.25, 0.60}};

    // Separate stream from synth_generate's so adding genes does not shift
    // the spot-level randomness.
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    for (int g = 0; g < genes; ++g) {
        NslParams p;
        for (double& entry : p.stain.raw.m) entry = rng.uniform(0.15, 1.0);
        p.stain.raw = row_normalize(p.stain.raw);
        p.c = {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
        p.w = rng.uniform(1.2, 1.8);
        p.b = rng.uniform(-0.3, 0.3);
        config.true_params.push_back(p);
    }
    return config;
}

SpotDataset synth_generate(const SynthConfig& config) {
    if (config.true_params.empty()) throw OutOfRange("synth_generate: no true_params");
    if (config.patients < 1) throw OutOfRange("synth_generate: patients must be >= 1");
    if (config.spots_per_patient < 1) throw OutOfRange("synth_generate: spots_per_patient must be >= 1");
    if (config.patch_side < 1) throw OutOfRange("synth_generate: patch_side must be >= 1");
    if (config.noise_sigma < 0) throw OutOfRange("synth_generate: noise_sigma must be >= 0");
    if (!(config.eps > 0 && config.eps < 1)) throw InvalidEpsilon("synth_generate: eps outside (0,1)");

    const int genes = static_cast<int>(config.true_params.size());
    const double log_eps = std::log(config.eps);

    // Jitter takes one of 32 levels so each patch holds a small palette of
    // distinct colors; inference can then run over color histograms.
    constexpr int kJitterLevels = 32;
    constexpr double kJitterAmplitude = 0.02;

    SpotDataset dataset;
    for (int g = 0; g < genes; ++g) dataset.gene_names.push_back("synth" + std::to_string(g + 1));

    Rng rng(config.seed);
    const int total = config.patients * config.spots_per_patient;
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(config.spots_per_patient))));
    const int pitch = config.patch_side + 4;

    dataset.spots.reserve(static_cast<size_t>(total));
    for (int i = 0; i < total; ++i) {
        const int patient = i / config.spots_per_patient;
        const int on_slide = i % config.spots_per_patient;

        SpotRecord spot;
        spot.patient_id = "patient_" + std::to_string(patient + 1);
        spot.slide_id = "slide_" + std::to_string(patient + 1);
        char buf[32];
        std::snprintf(buf, sizeof buf, "spot_%05d", i + 1);
        spot.spot_id = buf;
        spot.x = pitch / 2 + (on_slide % cols) * pitch;
        spot.y = pitch / 2 + (on_slide / cols) * pitch;

        const Vec3 q = {rng.uniform(), rng.uniform(), rng.uniform()};
        const Vec3 base_od = config.mixing.mul(q);

        auto patch = std::make_shared<Patch>();
        patch->width = config.patch_side;
        patch->height = config.patch_side;
        patch->pixels.resize(static_cast<size_t>(config.patch_side) * config.patch_side);
        for (Vec3& pixel : patch->pixels) {
            const auto level = rng.uniform_index(kJitterLevels);
            const double jitter =
                -kJitterAmplitude + 2.0 * kJitterAmplitude * static_cast<double>(level) /
                                        (kJitterLevels - 1);
            for (int ch = 0; ch < 3; ++ch) {
                double od = base_od[ch] + jitter;
                od = od < 0.0 ? 0.0 : (od > 1.0 ? 1.0 : od);
                pixel[ch] = std::exp(od * log_eps);
            }
        }
        spot.patch = patch;

        spot.expression.resize(static_cast<size_t>(genes));
        for (int g = 0; g < genes; ++g) {
            const double y = forward(*patch, config.true_params[g], config.eps);
            spot.expression[g] = y + config.noise_sigma * rng.normal();
        }
        dataset.spots.push_back(std::move(spot));
    }
    for (int p = 0; p < config.patients; ++p) {
        dataset.patients.push_back("patient_" + std::to_string(p + 1));
    }
    return dataset;
}

PatchSource::PatchSource(std::map<std::string, std::string> slide_paths, int crop_side)
    : slide_paths_(std::move(slide_paths)), crop_side_(crop_side) {}

Patch PatchSource::load(const SpotRecord& spot) const {
    if (spot.patch) return *spot.patch;
    if (!spot.patch_path.empty()) {
        const RasterImage image = read_png(spot.patch_path);
        Patch patch;
        patch.width = image.width;
        patch.height = image.height;
        patch.pixels.reserve(image.pixels.size());
        for (const auto& p : image.pixels) {
            patch.pixels.push_back({p[0] / 255.0, p[1] / 255.0, p[2] / 255.0});
        }
        return patch;
    }
    auto it = slide_paths_.find(spot.slide_id);
    if (it == slide_paths_.end()) {
        throw DecodeError("spot '" + spot.spot_id + "' has no patch path and no slide mapping for '" +
                          spot.slide_id + "'");
    }
    auto cached = slide_cache_.find(spot.slide_id);
    if (cached == slide_cache_.end()) {
        cached = slide_cache_.emplace(spot.slide_id, read_png(it->second)).first;
    }
    return extract_patch(cached->second, static_cast<int>(spot.x), static_cast<int>(spot.y),
                         crop_side_);
}

std::vector<ColorHistogram> build_histograms(const SpotDataset& dataset,
                                             const PatchSource& source) {
    std::vector<ColorHistogram> histograms;
    histograms.reserve(dataset.spots.size());
    for (const SpotRecord& spot : dataset.spots) {
        histograms.push_back(ColorHistogram::from_patch(source.load(spot)));
    }
    return histograms;
}

}  // namespace nsl
