#include "cytocoset/experiment.hpp"
#include "cytocoset/seeds.hpp"

#include <cmath>
#include <numeric>

namespace cytocoset {

TrialSeeds trial_seeds(std::uint64_t seed, int trial) {
    const auto t = static_cast<std::uint64_t>(trial);
    TrialSeeds out;
    out.split = seed;
    out.projection = derive_seed(seed, SeedPurpose::Projection);
    out.init = derive_seed(seed, SeedPurpose::Init, t);
    out.batch = derive_seed(seed, SeedPurpose::Batch, t);
    out.evaluation = derive_seed(seed, SeedPurpose::Evaluation, t);
    return out;
}

CohortDataset prepare_cohort(const CohortDataset& cohort, const ExperimentConfig& cfg) {
    if (!cfg.binarize || cfg.triplets.covariate.empty()) {
        return cohort;
    }
    return binarize_covariate(cohort, cfg.triplets.covariate, *cfg.binarize);
}

std::vector<SplitPlan> make_splits(const CohortDataset& cohort, const ExperimentConfig& cfg) {
    return stratified_splits(cohort, cfg.n_trials, cfg.test_fraction, trial_seeds(cfg.seed, 0).split);
}

std::vector<SampleSignature> featurize(const CohortDataset& cohort, const ExperimentConfig& cfg) {
    auto rff = cfg.rff;
    rff.seed = trial_seeds(cfg.seed, 0).projection;
    return featurize_cohort(cohort, rff);
}

std::vector<Triplet> mine_triplets(const CohortDataset& cohort, const std::vector<SampleSignature>& sigs,
                                   const SplitPlan& split, const ExperimentConfig& cfg) {
    if (cfg.loss.alpha >= 1.0) {
        return {};
    }
    return select_triplets(cohort.subset(split.train_ids), sigs, cfg.triplets);
}

SetEncoderConfig trial_net_config(const CohortDataset& cohort, const ExperimentConfig& cfg, int trial) {
    auto net = cfg.net;
    net.input_dim = static_cast<int>(cohort.markers().size());
    net.seed = trial_seeds(cfg.seed, trial).init;
    return net;
}

TrainConfig trial_train_config(const ExperimentConfig& cfg, int trial) {
    auto train = cfg.train;
    train.seed = trial_seeds(cfg.seed, trial).batch;
    return train;
}

Evaluation evaluate_split(const ModelParams& params, const CohortDataset& cohort, const SplitPlan& split,
                          int n_eval_subsets, std::uint64_t seed) {
    Evaluation out;
    out.ids = split.test_ids;
    out.scores = score_samples(params, cohort, out.ids, n_eval_subsets, seed);
    for (const auto& id : out.ids) {
        out.labels.push_back(cohort.at(cohort.index_of(id)).record.outcome);
    }
    out.metrics.trial_id = split.trial_id;
    out.metrics.n_test = out.ids.size();
    out.metrics.auc = roc_auc(out.scores, out.labels);
    auto prf = precision_recall_f1(out.scores, out.labels, 0.5);
    out.metrics.precision = prf.precision;
    out.metrics.recall = prf.recall;
    out.metrics.f1 = prf.f1;
    out.zero_division = prf.zero_division;
    return out;
}

TrialResult run_trial(const CohortDataset& cohort, const std::vector<SampleSignature>& sigs, const SplitPlan& split,
                      const ExperimentConfig& cfg) {
    TrialResult out;
    out.split = split;
    out.triplets = mine_triplets(cohort, sigs, split, cfg);
    out.fit = fit(cohort, split, out.triplets, trial_net_config(cohort, cfg, split.trial_id), cfg.loss,
                  trial_train_config(cfg, split.trial_id));
    out.evaluation = evaluate_split(out.fit.params, cohort, split, cfg.n_eval_subsets,
                                    trial_seeds(cfg.seed, split.trial_id).evaluation);
    return out;
}

std::vector<TrialResult> run_trials(const CohortDataset& cohort, const ExperimentConfig& cfg) {
    const auto splits = make_splits(cohort, cfg);
    std::vector<SampleSignature> sigs;
    if (cfg.loss.alpha < 1.0) {
        sigs = featurize(cohort, cfg);
    }
    std::vector<TrialResult> out;
    out.reserve(splits.size());
    for (const auto& split : splits) {
        out.push_back(run_trial(cohort, sigs, split, cfg));
    }
    return out;
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
    if (values.empty()) {
        return {std::nan(""), 0.0};
    }
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) {
        return {mean, 0.0};
    }
    double ss = 0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(ss / (n - 1))};
}

std::vector<SweepCell> sweep(const CohortDataset& cohort, const ExperimentConfig& cfg, const SweepGrid& grid, int trials) {
    if (grid.alphas.empty() || grid.h_s.empty() || grid.h_d.empty()) {
        throw DataError("sweep grid is empty");
    }
    if (trials < 1) {
        throw DataError("sweep needs at least one trial");
    }
    auto base = cfg;
    base.n_trials = trials;
    const auto splits = make_splits(cohort, base);
    const auto sigs = featurize(cohort, base);

    std::vector<SweepCell> cells;
    for (double a : grid.alphas) {
        for (int hs : grid.h_s) {
            for (int hd : grid.h_d) {
                SweepCell c;
                c.alpha = a;
                c.h_s = hs;
                c.h_d = hd;
                cells.push_back(c);
            }
        }
    }

    for (const auto& split : splits) {
        std::size_t best = 0;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            auto run = base;
            run.loss.alpha = cells[i].alpha;
            run.triplets.h_s = cells[i].h_s;
            run.triplets.h_d = cells[i].h_d;
            auto res = run_trial(cohort, sigs, split, run);
            cells[i].aucs.push_back(res.evaluation.metrics.auc);
            if (res.evaluation.metrics.auc > cells[best].aucs.back()) {
                best = i;
            }
        }
        ++cells[best].argmax_count;
    }
    for (auto& c : cells) {
        std::tie(c.mean_auc, c.std_auc) = mean_std(c.aucs);
    }
    return cells;
}

}
