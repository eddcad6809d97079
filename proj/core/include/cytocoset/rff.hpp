#ifndef CYTOCOSET_RFF_HPP
#define CYTOCOSET_RFF_HPP

#include "common.hpp"
#include "data.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

/**
 * @file rff.hpp
 *
 * @brief Random Fourier Feature encodings of cells and pooled per-sample signatures.
 *
 * Each cell row `a` is mapped to `sqrt(2/K) * [cos(a P), sin(a P)]` where `P` is an
 * `n x K` matrix of Normal(0, 1/gamma) draws and `K = d/2`. Inner products of these
 * encodings approximate the Gaussian kernel `exp(-|x-y|^2 / (2 gamma))`.
 */

namespace cytocoset {

enum class Pooling { Median, Max };

Pooling parse_pooling(const std::string& name);
std::string to_string(Pooling p);

struct RffConfig {
    /// Signature dimension; must be even and >= 2.
    int d = 128;
    /// Variance parameter: entries of the projection are Normal(0, 1/gamma).
    double gamma = 1.0;
    Pooling pooling = Pooling::Median;
    std::uint64_t seed = 0;

    void validate() const;
};

struct RffProjection {
    /// n x (d/2)
    RowMatrix P;
    double gamma = 1.0;
    std::uint64_t seed = 0;

    int num_features() const { return static_cast<int>(P.cols()); }
};

struct SampleSignature {
    std::string sample_id;
    std::vector<double> values;
};

/// Draw the shared n x (d/2) projection. Identical (n, d, gamma, seed) give an identical matrix.
RffProjection make_projection(int n, const RffConfig& cfg);

/// Per-cell RFF encodings, m x d, rows in cell order.
RowMatrix transform_cells(const RowMatrix& cells, const RffProjection& proj);

inline RowMatrix transform_cells(const CellMatrix& cells, const RffProjection& proj) {
    return transform_cells(cells.values, proj);
}

/// Column-wise median (midpoint average for even m) or max over cells.
SampleSignature pool_signature(const RowMatrix& Z, Pooling pooling, const std::string& sample_id);

/// Euclidean distance between two signatures.
double signature_distance(std::span<const double> a, std::span<const double> b);

inline double signature_distance(const SampleSignature& a, const SampleSignature& b) {
    return signature_distance(a.values, b.values);
}

/// Full pipeline for every sample of a cohort with one shared projection.
std::vector<SampleSignature> featurize_cohort(const CohortDataset& cohort, const RffConfig& cfg);

/// Signatures CSV: `sample_id,s0,...,s{d-1}`.
void write_signatures(const std::filesystem::path& path, const std::vector<SampleSignature>& sigs);
std::vector<SampleSignature> read_signatures(const std::filesystem::path& path);

}

#endif
