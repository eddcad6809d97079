#include "cytocoset/synth.hpp"
#include "cytocoset/seeds.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace cytocoset {

void SynthConfig::validate() const {
    if (n_samples < 1 || cells_per_sample < 1 || n_markers < 1) {
        throw DataError("synthetic cohort sizes must be >= 1");
    }
    auto in_unit = [](double v) { return v >= 0 && v <= 1; };
    if (!in_unit(signal_fraction) || !in_unit(covariate_alignment)) {
        throw DataError("signal_fraction and covariate_alignment must lie in [0, 1]");
    }
    for (const auto& c : extra_covariates) {
        if (!in_unit(c.alignment)) {
            throw DataError("covariate alignment must lie in [0, 1]");
        }
        if (c.name.empty() || c.name == "cov") {
            throw DataError("extra covariates need a name other than 'cov'");
        }
    }
}

CohortDataset generate_cohort(const SynthConfig& cfg) {
    cfg.validate();
    std::vector<std::string> markers;
    for (int j = 0; j < cfg.n_markers; ++j) {
        markers.push_back("m" + std::to_string(j));
    }
    const int shifted_markers = (cfg.n_markers + 3) / 4;
    const auto n_signal = static_cast<int>(std::lround(cfg.signal_fraction * cfg.cells_per_sample));

    std::vector<SynthCovariate> covariates{{"cov", cfg.covariate_alignment}};
    covariates.insert(covariates.end(), cfg.extra_covariates.begin(), cfg.extra_covariates.end());

    std::vector<Sample> samples;
    for (int i = 0; i < cfg.n_samples; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "s%03d", i);
        Sample s;
        s.record.sample_id = id;
        s.record.outcome = i % 2;
        s.record.cells_path = std::string("cells/") + id + ".csv";

        s.cells.sample_id = id;
        s.cells.markers = markers;
        s.cells.values.resize(cfg.cells_per_sample, cfg.n_markers);
        std::mt19937_64 rng(derive_seed(cfg.seed, SeedPurpose::Synth, static_cast<std::uint64_t>(i)));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int r = 0; r < cfg.cells_per_sample; ++r) {
            const bool shifted = s.record.outcome == 1 && r < n_signal;
            for (int j = 0; j < cfg.n_markers; ++j) {
                double v = normal(rng);
                if (shifted && j < shifted_markers) {
                    v += cfg.effect_size;
                }
                s.cells.values(r, j) = v;
            }
        }

        for (std::size_t c = 0; c < covariates.size(); ++c) {
            std::mt19937_64 crng(derive_seed(derive_seed(cfg.seed, SeedPurpose::Covariate, c), static_cast<std::uint64_t>(i)));
            std::bernoulli_distribution agree(covariates[c].alignment);
            const int value = agree(crng) ? s.record.outcome : 1 - s.record.outcome;
            s.record.covariates[covariates[c].name] = CovariateValue::binary(value);
        }
        samples.push_back(std::move(s));
    }
    return CohortDataset::make(std::move(samples));
}

double verify_dependency(const CohortDataset& cohort, const std::string& covariate) {
    long agree = 0;
    long disagree = 0;
    for (const auto& s : cohort.samples()) {
        if (binarized_covariate(s.record, covariate) == s.record.outcome) {
            ++agree;
        } else {
            ++disagree;
        }
    }
    return static_cast<double>(agree > disagree ? agree - disagree : disagree - agree);
}

void write_cohort(const CohortDataset& cohort, const std::filesystem::path& dir) {
    std::vector<SampleRecord> records;
    for (const auto& s : cohort.samples()) {
        auto rec = s.record;
        rec.cells_path = "cells/" + rec.sample_id + ".csv";
        write_cell_matrix(dir / rec.cells_path, s.cells);
        records.push_back(std::move(rec));
    }
    write_manifest(dir / "manifest.csv", records);
}

}
