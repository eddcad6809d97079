#ifndef CYTOCOSET_EXPERIMENT_HPP
#define CYTOCOSET_EXPERIMENT_HPP

#include "data.hpp"
#include "evaluation.hpp"
#include "rff.hpp"
#include "setnet.hpp"
#include "training.hpp"
#include "triplets.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace cytocoset {

/**
 * Everything that determines one train/evaluate run. Randomness flows from `seed` alone:
 * see `trial_seeds()`. The `seed` members of the nested configs are ignored and overwritten.
 */
struct ExperimentConfig {
    RffConfig rff;
    TripletConfig triplets;
    /// Applied to `triplets.covariate` when it is continuous.
    std::optional<BinarizeRule> binarize;
    SetEncoderConfig net;
    LossConfig loss;
    TrainConfig train;
    int n_trials = 30;
    double test_fraction = 0.25;
    int n_eval_subsets = 10;
    std::uint64_t seed = 0;
};

/// Per-purpose seeds for one trial.
struct TrialSeeds {
    std::uint64_t split = 0;
    std::uint64_t projection = 0;
    std::uint64_t init = 0;
    std::uint64_t batch = 0;
    std::uint64_t evaluation = 0;
};

/**
 * `split` is the base seed (stratified_splits derives per-trial seeds itself); `projection`
 * is shared by all trials; `init`, `batch` and `evaluation` are derived from `(seed, trial)`.
 */
TrialSeeds trial_seeds(std::uint64_t seed, int trial);

/// Binarize the triplet covariate if it is continuous and a rule is configured.
CohortDataset prepare_cohort(const CohortDataset& cohort, const ExperimentConfig& cfg);

std::vector<SplitPlan> make_splits(const CohortDataset& cohort, const ExperimentConfig& cfg);

std::vector<SampleSignature> featurize(const CohortDataset& cohort, const ExperimentConfig& cfg);

/// Triplets mined on the training ids of `split`; empty when `alpha == 1`.
std::vector<Triplet> mine_triplets(const CohortDataset& cohort, const std::vector<SampleSignature>& sigs,
                                   const SplitPlan& split, const ExperimentConfig& cfg);

/// Encoder and training configs with the trial's seeds filled in.
SetEncoderConfig trial_net_config(const CohortDataset& cohort, const ExperimentConfig& cfg, int trial);
TrainConfig trial_train_config(const ExperimentConfig& cfg, int trial);

struct Evaluation {
    MetricsReport metrics;
    std::vector<std::string> ids;
    std::vector<double> scores;
    std::vector<int> labels;
    bool zero_division = false;
};

/// Score the test ids of `split` and compute metrics.
Evaluation evaluate_split(const ModelParams& params, const CohortDataset& cohort, const SplitPlan& split,
                          int n_eval_subsets, std::uint64_t seed);

struct TrialResult {
    SplitPlan split;
    std::vector<Triplet> triplets;
    FitResult fit;
    Evaluation evaluation;
};

TrialResult run_trial(const CohortDataset& cohort, const std::vector<SampleSignature>& sigs, const SplitPlan& split,
                      const ExperimentConfig& cfg);

/// `cfg.n_trials` trials on a prepared cohort, in trial order.
std::vector<TrialResult> run_trials(const CohortDataset& cohort, const ExperimentConfig& cfg);

struct SweepCell {
    int h_s = 0;
    int h_d = 0;
    double alpha = 0;
    std::vector<double> aucs;
    double mean_auc = 0;
    double std_auc = 0;
    /// Trials in which this cell had the highest AUC (first cell in grid order wins ties).
    int argmax_count = 0;
};

struct SweepGrid {
    std::vector<double> alphas{0.3, 0.5, 0.7};
    std::vector<int> h_s{20, 40, 60, 80};
    std::vector<int> h_d{20, 40, 60, 80};
};

/**
 * Run every (alpha, h_s, h_d) cell on the first `trials` splits. All cells of a trial share its
 * split, signatures and seeds, so cells differ only in the swept hyperparameters.
 * Rows are ordered by alpha, then h_s, then h_d.
 */
std::vector<SweepCell> sweep(const CohortDataset& cohort, const ExperimentConfig& cfg, const SweepGrid& grid, int trials);

/// Sample mean and (n-1) standard deviation; stddev is 0 for fewer than two values.
std::pair<double, double> mean_std(const std::vector<double>& values);

}

#endif
