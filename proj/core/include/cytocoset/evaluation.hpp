#ifndef CYTOCOSET_EVALUATION_HPP
#define CYTOCOSET_EVALUATION_HPP

#include "common.hpp"
#include "data.hpp"
#include "setnet.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

/**
 * @file evaluation.hpp
 *
 * @brief Classification metrics, the covariate-dependency statistic, embedding alignment
 * between covariate-matched pairs and 2-D PCA projections of embeddings.
 */

namespace cytocoset {

struct MetricsReport {
    int trial_id = 0;
    std::size_t n_test = 0;
    double auc = 0.5;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

/**
 * Rank-based (Mann-Whitney) AUC with average ranks for ties, i.e.
 * `P(score_pos > score_neg) + 0.5 * P(tie)`. Throws `DataError` unless both classes are present.
 */
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct ClassificationMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    /// Set when precision or recall had a zero denominator and was reported as 0.
    bool zero_division = false;
};

/// Precision, recall and F1 of `score >= threshold` predictions.
ClassificationMetrics precision_recall_f1(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

/// Rows are outcome 0/1, columns covariate 0/1: D0 = r0c0, D1 = r0c1, D2 = r1c0, D3 = r1c1.
struct ContingencyTable {
    long D0 = 0;
    long D1 = 0;
    long D2 = 0;
    long D3 = 0;

    long total() const { return D0 + D1 + D2 + D3; }
};

struct CovariateDependency {
    ContingencyTable table;
    /// |(D1 + D2) - (D0 + D3)|
    double statistic = 0;
    /// `statistic / cohort size`
    double normalized = 0;
};

/// Throws `DataError` if the covariate is missing or not binarized on any sample.
CovariateDependency covariate_dependency(const CohortDataset& cohort, const std::string& covariate);

/// Mean probability over `n_subsets` independent subsampled sets per sample.
std::vector<double> score_samples(const ModelParams& params, const CohortDataset& cohort,
                                  const std::vector<std::string>& ids, int n_subsets, std::uint64_t seed);

/// Mean embedding over `n_subsets` independent subsampled sets per sample.
std::vector<std::vector<double>> embed_samples(const ModelParams& params, const CohortDataset& cohort,
                                               const std::vector<std::string>& ids, int n_subsets, std::uint64_t seed);

/**
 * How two samples are classified as Same/Diff for a covariate.
 * `Binary` compares binarized values. `RawGap` uses `g = |raw_a - raw_b|`: Same when
 * `g <= same_max`, Diff when `g >= diff_min`, and pairs in between are skipped.
 */
struct GapRule {
    enum class Mode { Binary, RawGap };
    Mode mode = Mode::Binary;
    double same_max = 0;
    double diff_min = 0;
};

struct AlignmentPair {
    std::string id_a;
    std::string id_b;
    bool same = false;
    double distance = 0;
};

struct EmbeddingDistanceSummary {
    std::vector<double> same_pair_distances;
    std::vector<double> diff_pair_distances;
    GapRule delta;
    std::vector<AlignmentPair> pairs;

    double mean_same() const;
    double mean_diff() const;
};

/**
 * Sample up to `n_pairs` distinct unordered pairs from the samples of `cohort` and record the
 * Euclidean distance between their embeddings, grouped into Same and Diff under `delta`.
 */
EmbeddingDistanceSummary embedding_alignment(const ModelParams& params, const CohortDataset& cohort,
                                             const std::string& covariate, const GapRule& delta, int n_pairs,
                                             int n_subsets, std::uint64_t seed);

struct PcaProjection {
    std::vector<std::array<double, 2>> coords;
    std::array<double, 2> eigenvalues{0, 0};
    /// Share of total variance captured by the two retained axes.
    double explained = 0;
};

/**
 * Project mean-centered vectors onto the top-2 eigenvectors of their covariance.
 * Each axis is oriented so its first non-zero loading is positive.
 */
PcaProjection pca_project(const std::vector<std::vector<double>>& embeddings);

}

#endif
