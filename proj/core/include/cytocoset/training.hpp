#ifndef CYTOCOSET_TRAINING_HPP
#define CYTOCOSET_TRAINING_HPP

#include "common.hpp"
#include "data.hpp"
#include "setnet.hpp"
#include "triplets.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

/**
 * @file training.hpp
 *
 * @brief Composite classification + triplet loss and the gradient-descent training loop.
 *
 * For a batch of `B` set instances the loss is
 *
 *     alpha * mean_b BCE(p_b, y_b) + (1 - alpha) * mean_t max(0, |e_ref - e_same| - |e_ref - e_diff| + h)
 *
 * where the second mean runs over the instances that carry a triplet binding and the `e` are
 * learned embeddings. With `alpha = 1` the triplet branch is skipped entirely, which recovers
 * plain set-encoder classification.
 */

namespace cytocoset {

struct LossConfig {
    double alpha = 0.5;
    double margin = 1.0;

    void validate() const;
};

struct TrainConfig {
    double learning_rate = 1e-4;
    /// Set instances per step, sampled with replacement from the training samples.
    int batch_size = 200;
    int epochs = 100;
    int steps_per_epoch = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

constexpr double bce_clamp = 1e-7;

/// Binary cross-entropy with `p` clamped to `[1e-7, 1 - 1e-7]`.
double bce_loss(double p, int y);

/// `max(0, |e_ref - e_same| - |e_ref - e_diff| + h)` with Euclidean distances.
double triplet_term(std::span<const double> e_ref, std::span<const double> e_diff, std::span<const double> e_same, double h);

/**
 * `alpha * mean(BCE) + (1 - alpha) * mean(triplet_values)`; the triplet mean is 0 when
 * `triplet_values` is empty.
 */
double total_loss(std::span<const double> probabilities, std::span<const int> labels,
                  std::span<const double> triplet_values, const LossConfig& cfg);

/// Lookup from a reference sample to its (diff, same) partners, by cohort index.
class TripletIndex {
public:
    TripletIndex() = default;
    TripletIndex(const CohortDataset& cohort, const std::vector<Triplet>& triplets);

    std::span<const std::pair<std::size_t, std::size_t>> partners(std::size_t ref) const;
    bool empty() const { return count_ == 0; }
    std::size_t size() const { return count_; }

private:
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> by_ref_;
    std::size_t count_ = 0;
};

struct TripletBinding {
    std::size_t diff_index = 0;
    std::size_t same_index = 0;
    RowMatrix diff_set;
    RowMatrix same_set;
};

struct BatchInstance {
    std::size_t sample_index = 0;
    RowMatrix set;
    int label = 0;
    std::optional<TripletBinding> binding;
};

struct Batch {
    std::vector<BatchInstance> instances;

    std::size_t num_bound() const;
};

/**
 * Draw `batch_size` instances: sample ids uniformly with replacement from `train_indices`,
 * each with a fresh `set_size`-cell subsample. The k-th occurrence (within this batch) of a
 * reference sample binds its triplet number `(step + k) mod count`, with partner sets drawn
 * from the partners' own cells.
 */
Batch make_batch(const CohortDataset& cohort, std::span<const std::size_t> train_indices, const TripletIndex& triplets,
                 int set_size, int batch_size, std::uint64_t batch_seed, std::uint64_t step);

struct LossBreakdown {
    double mean_bce = 0;
    double mean_triplet = 0;
    std::size_t num_bound = 0;
    double bce_component = 0;
    double triplet_component = 0;
    double total = 0;
};

/**
 * Evaluate the composite loss on a batch and, if `grads` is non-null, accumulate its exact
 * gradient with respect to every parameter.
 */
LossBreakdown composite_loss(const ModelParams& params, const Batch& batch, const LossConfig& cfg, Gradients* grads);

struct TrainLogEntry {
    std::size_t step = 0;
    double bce_component = 0;
    double triplet_component = 0;
    double total = 0;

    bool operator==(const TrainLogEntry&) const = default;
};

struct FitResult {
    ModelParams params;
    std::vector<TrainLogEntry> log;
};

/**
 * Train from `init_params(net)` with plain gradient descent on the composite loss.
 * Batches use seeds derived from `train.seed`. Every triplet member must be a training sample.
 * Throws `NumericError` naming the step if the loss becomes non-finite.
 */
FitResult fit(const CohortDataset& cohort, const SplitPlan& split, const std::vector<Triplet>& triplets,
              const SetEncoderConfig& net, const LossConfig& loss, const TrainConfig& train);

/// Training log CSV: `step,bce_component,triplet_component,total`.
void write_training_log(const std::filesystem::path& path, const std::vector<TrainLogEntry>& log);

}

#endif
