#ifndef NSL_OPTIMIZER_HPP
#define NSL_OPTIMIZER_HPP

#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include "nsl/stain.hpp"

namespace nsl {

struct TrainConfig {
    double learning_rate = 0.001;
    int batch_size = 128;
    int epochs = 250;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double eps = 1e-6;  // optical-density floor
    std::uint64_t seed = 0;
    double init_range = 0.1;  // w, b ~ Uniform(-init_range, +init_range)

    void validate() const;

    // Stable fingerprint of all hyperparameters.
    std::uint64_t digest() const;
};

// First/second moment accumulators, one slot per stored scalar
// (9 matrix entries, 3 biases, w, b).
struct AdamState {
    static constexpr int kScalarCount = 14;

    std::int64_t step = 0;
    std::array<double, kScalarCount> m{};
    std::array<double, kScalarCount> v{};
};

// Flattened view of the 14 stored scalars, in serialization order.
std::array<double, AdamState::kScalarCount> flatten(const NslParams& params);
std::array<double, AdamState::kScalarCount> flatten(const Gradients& grads);
NslParams unflatten(const std::array<double, AdamState::kScalarCount>& values);

// One bias-corrected Adam update over all stored scalars, followed by row
// normalization of the stain matrix so the stored raw entries stay bounded.
std::pair<NslParams, AdamState> adam_step(const NslParams& params, const Gradients& grads,
                                          const AdamState& state, const TrainConfig& config);

}  // namespace nsl

#endif  // NSL_OPTIMIZER_HPP
