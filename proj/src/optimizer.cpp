#include "nsl/optimizer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

namespace nsl {

namespace {

std::uint64_t fnv1a64(const void* data, size_t len, std::uint64_t h = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw OutOfRange("learning_rate must be > 0");
    if (batch_size < 1) throw OutOfRange("batch_size must be >= 1");
    if (epochs < 1) throw OutOfRange("epochs must be >= 1");
    if (!(beta1 > 0 && beta1 < 1)) throw OutOfRange("beta1 must lie in (0,1)");
    if (!(beta2 > 0 && beta2 < 1)) throw OutOfRange("beta2 must lie in (0,1)");
    if (!(adam_eps > 0)) throw OutOfRange("adam_eps must be > 0");
    if (!(eps > 0 && eps < 1)) throw InvalidEpsilon("optical-density floor must lie in (0,1)");
    if (!(init_range > 0)) throw OutOfRange("init_range must be > 0");
}

std::uint64_t TrainConfig::digest() const {
    // Hash a canonical text rendering rather than raw struct bytes so the
    // digest is independent of padding and field layout.
    char buf[256];
    const int n = std::snprintf(buf, sizeof buf,
                                "lr=%.17g;batch=%d;epochs=%d;b1=%.17g;b2=%.17g;aeps=%.17g;"
                                "eps=%.17g;seed=%llu;init=%.17g",
                                learning_rate, batch_size, epochs, beta1, beta2, adam_eps, eps,
                                static_cast<unsigned long long>(seed), init_range);
    return fnv1a64(buf, static_cast<size_t>(n));
}

std::array<double, AdamState::kScalarCount> flatten(const NslParams& params) {
    std::array<double, AdamState::kScalarCount> out{};
    std::memcpy(out.data(), params.stain.raw.m.data(), 9 * sizeof(double));
    out[9] = params.c[0];
    out[10] = params.c[1];
    out[11] = params.c[2];
    out[12] = params.w;
    out[13] = params.b;
    return out;
}

std::array<double, AdamState::kScalarCount> flatten(const Gradients& grads) {
    std::array<double, AdamState::kScalarCount> out{};
    std::memcpy(out.data(), grads.d_raw.m.data(), 9 * sizeof(double));
    out[9] = grads.d_c[0];
    out[10] = grads.d_c[1];
    out[11] = grads.d_c[2];
    out[12] = grads.d_w;
    out[13] = grads.d_b;
    return out;
}

NslParams unflatten(const std::array<double, AdamState::kScalarCount>& values) {
    NslParams p;
    std::memcpy(p.stain.raw.m.data(), values.data(), 9 * sizeof(double));
    p.c = {values[9], values[10], values[11]};
    p.w = values[12];
    p.b = values[13];
    return p;
}

std::pair<NslParams, AdamState> adam_step(const NslParams& params, const Gradients& grads,
                                          const AdamState& state, const TrainConfig& config) {
    if (!grads.finite()) throw NonFinite("adam_step: non-finite gradient");
    if (state.step < 0) throw ShapeMismatch("adam_step: negative step count");

    const auto p = flatten(params);
    const auto g = flatten(grads);

    AdamState next = state;
    next.step = state.step + 1;
    const double t = static_cast<double>(next.step);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);

    std::array<double, AdamState::kScalarCount> updated{};
    for (int i = 0; i < AdamState::kScalarCount; ++i) {
        next.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g[i];
        next.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g[i] * g[i];
        const double m_hat = next.m[i] / bc1;
        const double v_hat = next.v[i] / bc2;
        updated[i] = p[i] - config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
    }

    NslParams out = unflatten(updated);
    out.stain.raw = row_normalize(out.stain.raw);
    return {out, next};
}

}  // namespace nsl
