#include "nsl/train.hpp"

#include <cmath>
#include <numeric>

#include "nsl/parallel.hpp"
#include "nsl/rng.hpp"

namespace nsl {

namespace {

NslParams random_init(Rng& rng, const TrainConfig& config) {
    NslParams p;
    // Strictly positive matrix entries keep the initial rows well away from
    // the singular-row guard.
    for (double& entry : p.stain.raw.m) entry = rng.uniform(0.1, 1.0);
    p.stain.raw = row_normalize(p.stain.raw);
    p.c = {0, 0, 0};
    p.w = rng.uniform(-config.init_range, config.init_range);
    p.b = rng.uniform(-config.init_range, config.init_range);
    return p;
}

}  // namespace

TrainedGeneModel train_gene(const SpotDataset& dataset,
                            const std::vector<ColorHistogram>& histograms,
                            std::span<const size_t> subset, int gene_index,
                            const TrainConfig& config) {
    config.validate();
    if (subset.size() < 2) {
        throw EmptyDataset("train_gene: need at least 2 training spots, got " +
                           std::to_string(subset.size()));
    }
    if (gene_index < 0 || gene_index >= static_cast<int>(dataset.gene_names.size())) {
        throw OutOfRange("train_gene: gene index " + std::to_string(gene_index) +
                         " outside [0, " + std::to_string(dataset.gene_names.size()) + ")");
    }
    if (histograms.size() != dataset.spots.size()) {
        throw ShapeMismatch("train_gene: histogram count does not match spot count");
    }

    const std::string& gene_name = dataset.gene_names[static_cast<size_t>(gene_index)];
    Rng rng(config.seed ^ static_cast<std::uint64_t>(gene_index));

    NslParams params = random_init(rng, config);
    AdamState state;

    std::vector<size_t> order(subset.begin(), subset.end());
    const size_t n = order.size();
    const size_t batch_size = static_cast<size_t>(config.batch_size);

    TrainedGeneModel model;
    model.gene_name = gene_name;
    model.config_digest = config.digest();
    model.loss_trace.reserve(static_cast<size_t>(config.epochs));

    std::vector<std::pair<const ColorHistogram*, double>> batch;
    batch.reserve(std::min(batch_size, n));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (size_t start = 0; start < n; start += batch_size) {
            const size_t stop = std::min(start + batch_size, n);
            batch.clear();
            for (size_t i = start; i < stop; ++i) {
                const size_t spot = order[i];
                batch.emplace_back(&histograms[spot],
                                   dataset.spots[spot].expression[static_cast<size_t>(gene_index)]);
            }
            auto [loss, grads] = gradients_histogram(batch, params, config.eps);
            if (!std::isfinite(loss)) {
                throw NonFiniteLoss("gene '" + gene_name + "', epoch " + std::to_string(epoch) +
                                    ", step " + std::to_string(state.step));
            }
            epoch_loss += loss * static_cast<double>(stop - start);
            auto [next_params, next_state] = adam_step(params, grads, state, config);
            params = next_params;
            state = next_state;
        }
        model.loss_trace.push_back(epoch_loss / static_cast<double>(n));
    }

    model.params = params;
    return model;
}

ModelBundle train_all(const SpotDataset& dataset, const std::vector<ColorHistogram>& histograms,
                      std::span<const size_t> subset, const std::vector<std::string>& gene_list,
                      const TrainConfig& config, int workers) {
    if (gene_list.empty()) throw Empty("train_all: gene list is empty");

    struct Slot {
        bool ok = false;
        TrainedGeneModel model;
        std::string error;
    };
    std::vector<Slot> slots(gene_list.size());

    parallel_for(gene_list.size(), workers, [&](size_t i) {
        Slot& slot = slots[i];
        const int gene_index = dataset.gene_index(gene_list[i]);
        if (gene_index < 0) {
            slot.error = "unknown gene";
            return;
        }
        try {
            slot.model = train_gene(dataset, histograms, subset, gene_index, config);
            slot.ok = true;
        } catch (const std::exception& e) {
            slot.error = e.what();
        }
    });

    ModelBundle bundle;
    bundle.config = config;
    for (size_t i = 0; i < gene_list.size(); ++i) {
        if (slots[i].ok) {
            bundle.models.push_back(std::move(slots[i].model));
        } else {
            bundle.failures.push_back({gene_list[i], slots[i].error});
        }
    }
    return bundle;
}

}  // namespace nsl
