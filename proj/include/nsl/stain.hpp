#ifndef NSL_STAIN_HPP
#define NSL_STAIN_HPP

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "nsl/errors.hpp"

namespace nsl {

using Vec3 = std::array<double, 3>;

// Row-major 3x3 matrix; rows index stains, columns index RGB channels.
struct Mat3 {
    std::array<double, 9> m{};

    double& operator()(int r, int c) { return m[static_cast<size_t>(3 * r + c)]; }
    double operator()(int r, int c) const { return m[static_cast<size_t>(3 * r + c)]; }

    Vec3 row(int r) const { return {m[3 * r + 0ul], m[3 * r + 1ul], m[3 * r + 2ul]}; }
    void set_row(int r, const Vec3& v) {
        m[3 * r + 0ul] = v[0];
        m[3 * r + 1ul] = v[1];
        m[3 * r + 2ul] = v[2];
    }

    static Mat3 identity() { return Mat3{{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }

    Vec3 mul(const Vec3& v) const {
        return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
                m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
                m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
    }
};

// Divides each row by its L2 norm. Rows with norm below 1e-9 are rejected.
Mat3 row_normalize(const Mat3& raw);

// Learnable stain deconvolution matrix. `raw` holds the unconstrained
// parameters; the model always consumes the row-normalized form.
struct StainMatrix {
    Mat3 raw = Mat3::identity();

    Mat3 normalized() const { return row_normalize(raw); }
};

// Per-gene parameter bundle: 9 raw matrix entries + 3 stain biases + scalar
// head weight and bias = 14 stored scalars, 11 effective degrees of freedom
// once each matrix row is constrained to unit norm.
struct NslParams {
    StainMatrix stain;
    Vec3 c{0, 0, 0};
    double w = 0;
    double b = 0;

    bool finite() const;
};

// RGB image patch with channels in [0,1]; values below the optical-density
// floor clamp at transform time. `padded_fraction` records how much of the
// crop fell outside the source raster.
struct Patch {
    int width = 0;
    int height = 0;
    std::vector<Vec3> pixels;
    double padded_fraction = 0.0;

    size_t pixel_count() const { return pixels.size(); }
    bool valid() const;
};

// Count-weighted set of distinct pixel colors; forward passes over a
// histogram visit each color once instead of once per pixel.
struct ColorHistogram {
    std::vector<Vec3> colors;
    std::vector<std::uint32_t> counts;
    std::uint64_t total = 0;

    static ColorHistogram from_patch(const Patch& patch);
};

struct Gradients {
    Mat3 d_raw;
    Vec3 d_c{0, 0, 0};
    double d_w = 0;
    double d_b = 0;

    bool finite() const;
};

// Normalized optical density: u_j = ln(max(x_j, eps)) / ln(eps), mapping
// white (x=1) to 0 and full absorption (x<=eps) to 1.
Vec3 optical_density(const Vec3& pixel, double eps);

// (1 - e^-z) / (1 + e^-z), numerically tanh(z/2). Odd, range (-1,1),
// derivative (1 - psi^2) / 2.
double bipolar_sigmoid(double z);

// Model output for one patch:
//   y = w * (1/K) * sum_k 1^T psi(Dhat u^(k) + c) + b
double forward(const Patch& patch, const NslParams& params, double eps);

// Same value as forward() on the patch the histogram summarizes.
double forward_histogram(const ColorHistogram& hist, const NslParams& params, double eps);

// Mean squared error over the batch and its exact analytic gradient with
// respect to the raw parameters. The derivative through row normalization
// uses d(dhat)/d(d) = (I - dhat dhat^T) / ||d|| per row.
std::pair<double, Gradients> gradients(const std::vector<std::pair<Patch, double>>& batch,
                                       const NslParams& params, double eps);

// Histogram-backed variant used by the training loop; agrees with
// gradients() on the patches the histograms summarize.
std::pair<double, Gradients> gradients_histogram(
    const std::vector<std::pair<const ColorHistogram*, double>>& batch, const NslParams& params,
    double eps);

}  // namespace nsl

#endif  // NSL_STAIN_HPP
