#ifndef CYTOCOSET_TESTS_FIXTURES_HPP
#define CYTOCOSET_TESTS_FIXTURES_HPP

#include "cytocoset/csv.hpp"
#include "cytocoset/data.hpp"
#include "cytocoset/experiment.hpp"
#include "cytocoset/setnet.hpp"
#include "cytocoset/synth.hpp"
#include "cytocoset/training.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace fixtures {

inline cytocoset::RowMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> normal(0.0, sd);
    cytocoset::RowMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = normal(rng);
    }
    return m;
}

inline cytocoset::ModelParams random_params(const cytocoset::SetEncoderConfig& cfg, std::mt19937_64& rng) {
    cytocoset::ModelParams p(cfg);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (double& v : p.values()) {
        v = unif(rng);
    }
    return p;
}

inline cytocoset::RowMatrix permute_rows(const cytocoset::RowMatrix& X, std::mt19937_64& rng) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(X.rows()));
    for (std::size_t i = 0; i < perm.size(); ++i) {
        perm[i] = static_cast<Eigen::Index>(i);
    }
    std::shuffle(perm.begin(), perm.end(), rng);
    cytocoset::RowMatrix out(X.rows(), X.cols());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        out.row(r) = X.row(perm[r]);
    }
    return out;
}

struct GradientCase {
    cytocoset::ModelParams params;
    cytocoset::Batch batch;
    cytocoset::LossConfig loss;
    long double kink = 0;
};

/**
 * A random composite-loss configuration (5-cell sets, 3 markers, 3 instances, 2 with active
 * triplet bindings) drawn until every non-smooth point is at least `min_kink` away, so
 * central differences are well-defined.
 */
inline GradientCase random_gradient_case(std::uint64_t seed, long double min_kink = 5e-3L) {
    std::mt19937_64 rng(seed);
    cytocoset::SetEncoderConfig cfg;
    cfg.input_dim = 3;
    cfg.block_widths = {6, 5};
    cfg.embed_dim = 4;
    cfg.set_size = 5;
    const oracle::ReferenceNet ref(cfg);
    std::uniform_real_distribution<double> alpha_dist(0.1, 0.9);
    std::bernoulli_distribution coin(0.5);

    for (int attempt = 0; attempt < 10000; ++attempt) {
        GradientCase c;
        c.params = random_params(cfg, rng);
        c.loss.alpha = alpha_dist(rng);
        for (int b = 0; b < 3; ++b) {
            cytocoset::BatchInstance inst;
            inst.set = random_matrix(5, 3, rng);
            inst.label = coin(rng) ? 1 : 0;
            if (b < 2) {
                cytocoset::TripletBinding bind;
                bind.diff_set = random_matrix(5, 3, rng);
                bind.same_set = random_matrix(5, 3, rng);
                inst.binding = std::move(bind);
            }
            c.batch.instances.push_back(std::move(inst));
        }
        // Large margins keep most hinges active.
        c.loss.margin = 2.0 + 3.0 * coin(rng);
        long double kink = 1e30L;
        ref.loss(oracle::to_real(c.params.values()), c.batch, c.loss, kink);
        if (kink >= min_kink) {
            c.kink = kink;
            return c;
        }
    }
    throw std::runtime_error("could not draw a smooth gradient case");
}

/// Max relative error over coordinates where either gradient exceeds `floor` in magnitude.
inline double max_relative_error(std::span<const double> analytic, const std::vector<double>& numeric, double floor = 1e-8) {
    double worst = 0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
        const double scale = std::max(std::fabs(analytic[i]), std::fabs(numeric[i]));
        if (scale <= floor) {
            continue;
        }
        worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / scale);
    }
    return worst;
}

/// Desk-scale synthetic regime used by the trend checks.
inline cytocoset::SynthConfig trend_cohort(std::uint64_t seed) {
    cytocoset::SynthConfig sc;
    sc.n_samples = 40;
    sc.cells_per_sample = 500;
    sc.n_markers = 10;
    sc.effect_size = 1.0;
    sc.signal_fraction = 0.1;
    sc.covariate_alignment = 0.9;
    sc.seed = seed;
    return sc;
}

/// Training settings sized for single-core desk runs (a few seconds per model). Chosen on
/// cohort seeds 0-19; the acceptance trend checks use a disjoint seed block.
inline cytocoset::ExperimentConfig trend_experiment(std::uint64_t seed, double alpha) {
    cytocoset::ExperimentConfig cfg;
    cfg.rff.d = 64;
    cfg.rff.gamma = 1.0;
    cfg.triplets.covariate = "cov";
    cfg.triplets.h_s = 40;
    cfg.triplets.h_d = 40;
    cfg.net.block_widths = {32, 32};
    cfg.net.embed_dim = 16;
    cfg.net.set_size = 64;
    cfg.loss.alpha = alpha;
    cfg.loss.margin = 1.0;
    cfg.train.learning_rate = 0.2;
    cfg.train.batch_size = 32;
    cfg.train.epochs = 400;
    cfg.n_trials = 1;
    cfg.test_fraction = 0.25;
    cfg.n_eval_subsets = 10;
    cfg.seed = seed;
    return cfg;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("cytocoset_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}

#endif
