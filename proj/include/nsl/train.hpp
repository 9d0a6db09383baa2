#ifndef NSL_TRAIN_HPP
#define NSL_TRAIN_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nsl/dataset.hpp"
#include "nsl/optimizer.hpp"
#include "nsl/stain.hpp"

namespace nsl {

struct TrainedGeneModel {
    std::string gene_name;
    NslParams params;
    std::vector<double> loss_trace;  // mean training loss per epoch
    std::uint64_t config_digest = 0;
};

struct GeneFailure {
    std::string gene_name;
    std::string error;
};

struct ModelBundle {
    TrainConfig config;
    std::vector<TrainedGeneModel> models;   // successful genes, in request order
    std::vector<GeneFailure> failures;      // failed genes, in request order
};

// Trains one gene's 11-parameter model with shuffled minibatch Adam over the
// given spot subset. The RNG stream is seeded with config.seed XOR gene_index
// so results are independent of which other genes run, or on how many
// threads.
TrainedGeneModel train_gene(const SpotDataset& dataset,
                            const std::vector<ColorHistogram>& histograms,
                            std::span<const size_t> subset, int gene_index,
                            const TrainConfig& config);

// One model per requested gene; unknown genes and per-gene training errors
// become failure records while the remaining genes continue.
ModelBundle train_all(const SpotDataset& dataset, const std::vector<ColorHistogram>& histograms,
                      std::span<const size_t> subset, const std::vector<std::string>& gene_list,
                      const TrainConfig& config, int workers);

}  // namespace nsl

#endif  // NSL_TRAIN_HPP
