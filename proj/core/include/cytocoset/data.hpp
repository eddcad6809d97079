#ifndef CYTOCOSET_DATA_HPP
#define CYTOCOSET_DATA_HPP

#include "common.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

/**
 * @file data.hpp
 *
 * @brief Per-sample cell matrices, clinical manifests, covariate binarization,
 * fixed-size set subsampling and stratified train/test splits.
 */

namespace cytocoset {

/**
 * One sample's cells x markers expression matrix.
 * Values are assumed to be pre-transformed (arcsinh or equivalent); nothing is rescaled here.
 */
struct CellMatrix {
    std::string sample_id;
    std::vector<std::string> markers;
    RowMatrix values;

    Eigen::Index num_cells() const { return values.rows(); }
    Eigen::Index num_markers() const { return values.cols(); }
};

/**
 * Rule used to turn a continuous covariate into a binary one.
 * Values strictly greater than the threshold map to 1, everything else (ties included) to 0.
 */
struct BinarizeRule {
    enum class Kind { Threshold, Median };
    Kind kind = Kind::Median;
    double threshold = 0;

    static BinarizeRule median() { return BinarizeRule{Kind::Median, 0}; }
    static BinarizeRule at(double t) { return BinarizeRule{Kind::Threshold, t}; }

    /// Parse "median" or "threshold:<value>" (a bare number is accepted as a threshold).
    static BinarizeRule parse(const std::string& text);
};

struct CovariateValue {
    enum class Kind { Binary, Continuous };
    Kind kind = Kind::Continuous;
    double raw = 0;
    std::optional<int> binarized;
    /// Threshold that produced `binarized`, for continuous covariates.
    std::optional<double> resolved_threshold;

    static CovariateValue binary(int v) {
        CovariateValue out;
        out.kind = Kind::Binary;
        out.raw = v;
        out.binarized = v;
        return out;
    }

    static CovariateValue continuous(double v) {
        CovariateValue out;
        out.kind = Kind::Continuous;
        out.raw = v;
        return out;
    }

    bool operator==(const CovariateValue&) const = default;
};

struct SampleRecord {
    std::string sample_id;
    std::string cells_path;
    int outcome = 0;
    std::map<std::string, CovariateValue> covariates;
};

struct Sample {
    CellMatrix cells;
    SampleRecord record;
};

/**
 * A set of samples sharing one marker panel. Construct through `CohortDataset::make()`,
 * which checks that all matrices use an identical marker list and that ids are unique.
 */
class CohortDataset {
public:
    CohortDataset() = default;

    static CohortDataset make(std::vector<Sample> samples);

    const std::vector<Sample>& samples() const { return samples_; }
    const std::vector<std::string>& markers() const { return markers_; }
    std::size_t size() const { return samples_.size(); }

    const Sample& at(std::size_t i) const { return samples_.at(i); }

    /// Index of a sample by id; throws `DataError` for unknown ids.
    std::size_t index_of(const std::string& id) const;
    bool contains(const std::string& id) const { return index_.count(id) > 0; }

    std::vector<std::string> ids() const;

    /// Sub-cohort in the order of `ids`.
    CohortDataset subset(const std::vector<std::string>& ids) const;

    /// Replace sample records (same ids, same order), keeping the cell matrices.
    CohortDataset with_records(std::vector<SampleRecord> records) const;

private:
    std::vector<Sample> samples_;
    std::vector<std::string> markers_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct SplitPlan {
    int trial_id = 0;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    std::uint64_t seed = 0;
};

/**
 * Load a cells CSV: a header row of marker names followed by one numeric row per cell.
 * Errors (missing file, ragged rows, non-numeric cells, empty body) are reported as
 * `DataError` with 1-based row/column positions, counting the header as row 1.
 */
CellMatrix load_cell_matrix(const std::filesystem::path& path, const std::string& sample_id);

/// Write a cells CSV at full round-trip precision.
void write_cell_matrix(const std::filesystem::path& path, const CellMatrix& matrix);

/**
 * Load a manifest CSV with columns `sample_id,cells_path,outcome,<covariate...>`.
 * Covariate columns whose present values are all 0/1 are typed binary, otherwise continuous.
 * An empty covariate cell leaves that covariate absent on the sample.
 * `cells_path` is kept verbatim; relative paths are resolved by `load_cohort()`.
 */
std::vector<SampleRecord> load_manifest(const std::filesystem::path& path);

/// Write a manifest CSV; the covariate columns are the union over all records, sorted by name.
void write_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records);

/**
 * Load a manifest and every referenced cells file. Relative cell paths are resolved
 * against the manifest's directory.
 */
CohortDataset load_cohort(const std::filesystem::path& manifest_path);

/**
 * Give covariate `name` a binary value on every sample. Binary covariates pass through.
 * Throws `DataError` if any sample lacks the covariate.
 */
CohortDataset binarize_covariate(const CohortDataset& cohort, const std::string& name, const BinarizeRule& rule);

/// Binarized value of a covariate; throws `DataError` if it is absent or not yet binarized.
int binarized_covariate(const SampleRecord& record, const std::string& name);

/// Raw value of a covariate; throws `DataError` if absent.
double raw_covariate(const SampleRecord& record, const std::string& name);

/**
 * Draw `set_size` cells: uniformly without replacement when the sample has at least that many
 * cells, with replacement otherwise. Output depends only on (matrix, set_size, seed).
 */
CellMatrix subsample_set(const CellMatrix& matrix, int set_size, std::uint64_t seed);

/// Row indices chosen by `subsample_set()`.
std::vector<Eigen::Index> subsample_indices(Eigen::Index num_cells, int set_size, std::uint64_t seed);

/**
 * Stratified train/test splits. For each class with `c` samples, `round(test_fraction * c)`
 * (clamped to [1, c-1]) samples go to test. Plan `t` uses a seed derived from `(seed, t)`;
 * duplicate test sets are redrawn while distinct ones remain possible.
 */
std::vector<SplitPlan> stratified_splits(const CohortDataset& cohort, int n_trials, double test_fraction, std::uint64_t seed);

}

#endif
