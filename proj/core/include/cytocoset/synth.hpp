#ifndef CYTOCOSET_SYNTH_HPP
#define CYTOCOSET_SYNTH_HPP

#include "data.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cytocoset {

/// An additional binary covariate equal to the outcome with probability `alignment`.
struct SynthCovariate {
    std::string name;
    double alignment = 0.5;
};

struct SynthConfig {
    int n_samples = 40;
    int cells_per_sample = 500;
    int n_markers = 10;
    /// Mean shift of the outcome-associated subpopulation along the first ceil(n_markers/4) markers.
    double effect_size = 1.0;
    /// Fraction of an outcome-1 sample's cells drawn from the shifted subpopulation.
    double signal_fraction = 0.3;
    /// Probability that covariate "cov" equals the outcome.
    double covariate_alignment = 0.9;
    std::vector<SynthCovariate> extra_covariates;
    std::uint64_t seed = 0;

    void validate() const;
};

/**
 * Gaussian-mixture cohort. Sample `i` (id `s000`, `s001`, ...) has outcome `i % 2`. Outcome-0 cells
 * are standard normal; an outcome-1 sample draws `round(signal_fraction * cells)` cells from the
 * shifted normal. Binary covariates ("cov" plus extras) flip the outcome with probability
 * `1 - alignment`, each from its own stream, so adding covariates never changes the cells.
 */
CohortDataset generate_cohort(const SynthConfig& cfg);

/// Dependency statistic by direct counting of agreeing vs disagreeing (covariate, outcome) samples.
double verify_dependency(const CohortDataset& cohort, const std::string& covariate);

/// Write `<dir>/cells/<id>.csv` for every sample and `<dir>/manifest.csv` with relative paths.
void write_cohort(const CohortDataset& cohort, const std::filesystem::path& dir);

}

#endif
