#ifndef CYTOCOSET_TRIPLETS_HPP
#define CYTOCOSET_TRIPLETS_HPP

#include "common.hpp"
#include "data.hpp"
#include "rff.hpp"

#include <filesystem>
#include <string>
#include <vector>

/**
 * @file triplets.hpp
 *
 * @brief Covariate-consistent (reference, different, same) triplets mined from RFF signature distances.
 *
 * A triplet is admissible when the "same" member shares the reference's binarized covariate and lies
 * within the `h_s` quantile of all same-covariate pair distances, and the "different" member has the
 * other covariate value and is farther from the reference than the "same" member by at least the
 * `100 - h_d` quantile of all covariate-consistent margins. Smaller `h_s`/`h_d` are therefore stricter.
 */

namespace cytocoset {

struct TripletConfig {
    std::string covariate;
    /// Percentile in {20, 40, 60, 80}.
    int h_s = 40;
    /// Percentile in {20, 40, 60, 80}.
    int h_d = 40;
    int max_per_reference = 1;

    void validate() const;
};

struct Triplet {
    std::string ref_id;
    std::string diff_id;
    std::string same_id;
    double d_same = 0;
    double d_diff = 0;

    bool operator==(const Triplet&) const = default;
};

struct DistanceMatrix {
    std::vector<std::string> ids;
    RowMatrix D;
};

struct TripletThresholds {
    double same = 0;
    double margin = 0;
};

DistanceMatrix pairwise_distances(const std::vector<SampleSignature>& sigs);

/// Linear-interpolation quantile (position `q/100 * (n-1)` in the sorted values), `q` in [0, 100].
double quantile_threshold(std::vector<double> values, double q);

/**
 * Every admissible triplet over the samples of `train`, before the per-reference cap,
 * ordered by reference id, then ascending `d_same`, descending `d_diff`, then ids.
 * `sigs` may contain extra samples; only those in `train` are used.
 */
std::vector<Triplet> admissible_triplets(const CohortDataset& train, const std::vector<SampleSignature>& sigs,
                                         const TripletConfig& cfg, TripletThresholds* thresholds = nullptr);

/// `admissible_triplets()` truncated to the first `max_per_reference` entries of each reference.
std::vector<Triplet> select_triplets(const CohortDataset& train, const std::vector<SampleSignature>& sigs,
                                     const TripletConfig& cfg, TripletThresholds* thresholds = nullptr);

/// Triplets CSV: `ref_id,diff_id,same_id,d_same,d_diff`.
void write_triplets(const std::filesystem::path& path, const std::vector<Triplet>& triplets);
std::vector<Triplet> read_triplets(const std::filesystem::path& path);

}

#endif
