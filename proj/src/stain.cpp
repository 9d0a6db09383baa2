#include "nsl/stain.hpp"

#include <cmath>
#include <cstring>
#include <unordered_map>

namespace nsl {

namespace {

constexpr double kMinRowNorm = 1e-9;

double row_norm(const Vec3& v) {
    return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

void check_epsilon(double eps) {
    if (!(eps > 0.0) || !(eps < 1.0)) {
        throw InvalidEpsilon("epsilon must lie in (0,1), got " + std::to_string(eps));
    }
}

// Optical density with the epsilon check and log(eps) hoisted out of the
// per-color loop; same operations and order as optical_density.
Vec3 od_from_color(const Vec3& color, double eps, double log_eps) {
    Vec3 u;
    for (int j = 0; j < 3; ++j) {
        const double x = color[j] > eps ? color[j] : eps;
        u[j] = std::log(x) / log_eps;
    }
    return u;
}

// Shared forward/backward core. Colors are visited once each with an
// attached weight (1 for plain patches, the bin count for histograms).
struct Accumulator {
    // forward state
    double activation_sum = 0.0;  // sum over pixels of 1^T psi(z)
    // backward state, per stain row j: sum_k weight * psi'(z_j) and
    // sum_k weight * psi'(z_j) * u^(k)
    Vec3 dpsi_sum{0, 0, 0};
    std::array<Vec3, 3> dpsi_u_sum{Vec3{0, 0, 0}, Vec3{0, 0, 0}, Vec3{0, 0, 0}};
    double weight_total = 0.0;

    void add(const Vec3& color, double weight, const Mat3& dhat, const Vec3& c, double eps,
             double log_eps, bool with_grad) {
        const Vec3 u = od_from_color(color, eps, log_eps);
        for (int j = 0; j < 3; ++j) {
            const double z = dhat(j, 0) * u[0] + dhat(j, 1) * u[1] + dhat(j, 2) * u[2] + c[j];
            const double s = bipolar_sigmoid(z);
            activation_sum += weight * s;
            if (with_grad) {
                const double ds = 0.5 * (1.0 - s * s);
                dpsi_sum[j] += weight * ds;
                dpsi_u_sum[j][0] += weight * ds * u[0];
                dpsi_u_sum[j][1] += weight * ds * u[1];
                dpsi_u_sum[j][2] += weight * ds * u[2];
            }
        }
        weight_total += weight;
    }
};

struct VecKey {
    std::array<std::uint64_t, 3> bits;
    bool operator==(const VecKey&) const = default;
};

struct VecKeyHash {
    size_t operator()(const VecKey& k) const {
        std::uint64_t h = 1469598103934665603ull;
        for (std::uint64_t b : k.bits) {
            h ^= b;
            h *= 1099511628211ull;
        }
        return static_cast<size_t>(h);
    }
};

VecKey key_of(const Vec3& v) {
    VecKey k;
    std::memcpy(k.bits.data(), v.data(), sizeof(k.bits));
    return k;
}

}  // namespace

Mat3 row_normalize(const Mat3& raw) {
    Mat3 out;
    for (int r = 0; r < 3; ++r) {
        const Vec3 row = raw.row(r);
        const double n = row_norm(row);
        if (n < kMinRowNorm) {
            throw SingularRow("row " + std::to_string(r) + " has L2 norm " + std::to_string(n));
        }
        out.set_row(r, {row[0] / n, row[1] / n, row[2] / n});
    }
    return out;
}

bool NslParams::finite() const {
    for (double v : stain.raw.m) {
        if (!std::isfinite(v)) return false;
    }
    return std::isfinite(c[0]) && std::isfinite(c[1]) && std::isfinite(c[2]) &&
           std::isfinite(w) && std::isfinite(b);
}

bool Patch::valid() const {
    if (width < 1 || height < 1) return false;
    if (pixels.size() != static_cast<size_t>(width) * static_cast<size_t>(height)) return false;
    for (const Vec3& p : pixels) {
        for (double ch : p) {
            if (!(ch >= 0.0 && ch <= 1.0)) return false;
        }
    }
    return true;
}

bool Gradients::finite() const {
    for (double v : d_raw.m) {
        if (!std::isfinite(v)) return false;
    }
    return std::isfinite(d_c[0]) && std::isfinite(d_c[1]) && std::isfinite(d_c[2]) &&
           std::isfinite(d_w) && std::isfinite(d_b);
}

ColorHistogram ColorHistogram::from_patch(const Patch& patch) {
    std::unordered_map<VecKey, std::uint32_t, VecKeyHash> bins;
    bins.reserve(patch.pixels.size());
    // First pass counts, second pass emits in first-seen order so the
    // histogram is a deterministic function of the pixel sequence.
    std::vector<const Vec3*> order;
    order.reserve(patch.pixels.size());
    for (const Vec3& p : patch.pixels) {
        auto [it, inserted] = bins.emplace(key_of(p), 0u);
        if (inserted) order.push_back(&p);
        ++it->second;
    }
    ColorHistogram hist;
    hist.colors.reserve(order.size());
    hist.counts.reserve(order.size());
    for (const Vec3* p : order) {
        const std::uint32_t n = bins.at(key_of(*p));
        hist.colors.push_back(*p);
        hist.counts.push_back(n);
        hist.total += n;
    }
    return hist;
}

Vec3 optical_density(const Vec3& pixel, double eps) {
    check_epsilon(eps);
    const double log_eps = std::log(eps);
    Vec3 u;
    for (int j = 0; j < 3; ++j) {
        const double x = pixel[j] > eps ? pixel[j] : eps;
        u[j] = std::log(x) / log_eps;
    }
    return u;
}

double bipolar_sigmoid(double z) { return std::tanh(0.5 * z); }

namespace {

double forward_core(const NslParams& params, double eps,
                    const std::vector<Vec3>& colors, const std::uint32_t* counts,
                    double total_weight) {
    check_epsilon(eps);
    const double log_eps = std::log(eps);
    const Mat3 dhat = params.stain.normalized();
    Accumulator acc;
    for (size_t i = 0; i < colors.size(); ++i) {
        const double w = counts ? static_cast<double>(counts[i]) : 1.0;
        acc.add(colors[i], w, dhat, params.c, eps, log_eps, /*with_grad=*/false);
    }
    return params.w * (acc.activation_sum / total_weight) + params.b;
}

}  // namespace

double forward(const Patch& patch, const NslParams& params, double eps) {
    if (patch.pixels.empty()) {
        throw Empty("forward: patch has no pixels");
    }
    return forward_core(params, eps, patch.pixels, nullptr,
                        static_cast<double>(patch.pixels.size()));
}

double forward_histogram(const ColorHistogram& hist, const NslParams& params, double eps) {
    if (hist.colors.empty() || hist.total == 0) {
        throw Empty("forward_histogram: empty histogram");
    }
    return forward_core(params, eps, hist.colors, hist.counts.data(),
                        static_cast<double>(hist.total));
}

namespace {

// One spot's contribution to the batch gradient. dl_dy is dL/dy_i.
void accumulate_spot(Gradients& g, const Accumulator& acc, const NslParams& params,
                     const Mat3& dhat, const Mat3& raw, double dl_dy) {
    const double k_inv = 1.0 / acc.weight_total;
    g.d_w += dl_dy * acc.activation_sum * k_inv;
    g.d_b += dl_dy;
    for (int j = 0; j < 3; ++j) {
        const double scale = dl_dy * params.w * k_inv;
        g.d_c[j] += scale * acc.dpsi_sum[j];
        // Gradient w.r.t. the normalized row, then pulled back through the
        // normalization: (I - dhat dhat^T) / ||d_raw||.
        const Vec3 g_hat = {scale * acc.dpsi_u_sum[j][0], scale * acc.dpsi_u_sum[j][1],
                            scale * acc.dpsi_u_sum[j][2]};
        const Vec3 hat = dhat.row(j);
        const double norm = row_norm(raw.row(j));
        const double dot = g_hat[0] * hat[0] + g_hat[1] * hat[1] + g_hat[2] * hat[2];
        for (int c = 0; c < 3; ++c) {
            g.d_raw(j, c) += (g_hat[c] - dot * hat[c]) / norm;
        }
    }
}

template <typename SpotColors>
std::pair<double, Gradients> gradients_core(const std::vector<SpotColors>& batch,
                                            const std::vector<double>& targets,
                                            const NslParams& params, double eps) {
    check_epsilon(eps);
    const double log_eps = std::log(eps);
    const Mat3 dhat = params.stain.normalized();
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    double loss = 0.0;
    Gradients g;
    for (size_t i = 0; i < batch.size(); ++i) {
        Accumulator acc;
        batch[i].visit(acc, dhat, params.c, eps, log_eps);
        const double y = params.w * (acc.activation_sum / acc.weight_total) + params.b;
        const double resid = y - targets[i];
        loss += resid * resid * inv_batch;
        accumulate_spot(g, acc, params, dhat, params.stain.raw, 2.0 * resid * inv_batch);
    }
    return {loss, g};
}

struct PatchColors {
    const Patch* patch;
    void visit(Accumulator& acc, const Mat3& dhat, const Vec3& c, double eps,
               double log_eps) const {
        for (const Vec3& p : patch->pixels) acc.add(p, 1.0, dhat, c, eps, log_eps, true);
    }
};

struct HistColors {
    const ColorHistogram* hist;
    void visit(Accumulator& acc, const Mat3& dhat, const Vec3& c, double eps,
               double log_eps) const {
        for (size_t i = 0; i < hist->colors.size(); ++i) {
            acc.add(hist->colors[i], static_cast<double>(hist->counts[i]), dhat, c, eps, log_eps,
                    true);
        }
    }
};

}  // namespace

std::pair<double, Gradients> gradients(const std::vector<std::pair<Patch, double>>& batch,
                                       const NslParams& params, double eps) {
    if (batch.empty()) {
        throw EmptyBatch("gradients: batch is empty");
    }
    std::vector<PatchColors> colors;
    std::vector<double> targets;
    colors.reserve(batch.size());
    targets.reserve(batch.size());
    for (const auto& [patch, t] : batch) {
        if (patch.pixels.empty()) throw Empty("gradients: patch has no pixels");
        colors.push_back({&patch});
        targets.push_back(t);
    }
    return gradients_core(colors, targets, params, eps);
}

std::pair<double, Gradients> gradients_histogram(
    const std::vector<std::pair<const ColorHistogram*, double>>& batch, const NslParams& params,
    double eps) {
    if (batch.empty()) {
        throw EmptyBatch("gradients_histogram: batch is empty");
    }
    std::vector<HistColors> colors;
    std::vector<double> targets;
    colors.reserve(batch.size());
    targets.reserve(batch.size());
    for (const auto& [hist, t] : batch) {
        if (hist->colors.empty()) throw Empty("gradients_histogram: empty histogram");
        colors.push_back({hist});
        targets.push_back(t);
    }
    return gradients_core(colors, targets, params, eps);
}

}  // namespace nsl
