#include "cytocoset/data.hpp"
#include "cytocoset/csv.hpp"
#include "cytocoset/seeds.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_set>

namespace cytocoset {

BinarizeRule BinarizeRule::parse(const std::string& text) {
    if (text == "median") {
        return median();
    }
    std::string value = text;
    const std::string prefix = "threshold:";
    if (value.rfind(prefix, 0) == 0) {
        value = value.substr(prefix.size());
    }
    double t = 0;
    if (!csv::parse_double(value, t)) {
        throw DataError("invalid binarization rule '" + text + "' (expected 'median' or 'threshold:<value>')");
    }
    return at(t);
}

CohortDataset CohortDataset::make(std::vector<Sample> samples) {
    CohortDataset out;
    if (!samples.empty()) {
        out.markers_ = samples.front().cells.markers;
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.cells.sample_id != s.record.sample_id) {
            throw DataError("cell matrix id '" + s.cells.sample_id + "' does not match record id '" + s.record.sample_id + "'");
        }
        if (s.cells.markers != out.markers_) {
            throw DataError("sample '" + s.record.sample_id + "' has a marker panel different from the cohort's");
        }
        if (!out.index_.emplace(s.record.sample_id, i).second) {
            throw DataError("duplicate sample_id '" + s.record.sample_id + "'");
        }
    }
    out.samples_ = std::move(samples);
    return out;
}

std::size_t CohortDataset::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
        throw DataError("unknown sample_id '" + id + "'");
    }
    return it->second;
}

std::vector<std::string> CohortDataset::ids() const {
    std::vector<std::string> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) {
        out.push_back(s.record.sample_id);
    }
    return out;
}

CohortDataset CohortDataset::subset(const std::vector<std::string>& ids) const {
    std::vector<Sample> picked;
    picked.reserve(ids.size());
    for (const auto& id : ids) {
        picked.push_back(samples_[index_of(id)]);
    }
    auto out = make(std::move(picked));
    if (out.samples_.empty()) {
        out.markers_ = markers_;
    }
    return out;
}

CohortDataset CohortDataset::with_records(std::vector<SampleRecord> records) const {
    if (records.size() != samples_.size()) {
        throw DataError("record count does not match cohort size");
    }
    std::vector<Sample> updated = samples_;
    for (std::size_t i = 0; i < records.size(); ++i) {
        updated[i].record = std::move(records[i]);
    }
    return make(std::move(updated));
}

CellMatrix load_cell_matrix(const std::filesystem::path& path, const std::string& sample_id) {
    auto lines = csv::read_lines(path);
    while (!lines.empty() && (lines.back().empty() || lines.back() == "\r")) {
        lines.pop_back();
    }
    const std::string where = "'" + path.string() + "'";
    if (lines.empty()) {
        throw DataError(where + ": missing header row");
    }

    CellMatrix out;
    out.sample_id = sample_id;
    out.markers = csv::split_line(lines[0]);
    std::set<std::string> seen;
    for (const auto& m : out.markers) {
        if (m.empty()) {
            throw DataError(where + ": empty marker name in header");
        }
        if (!seen.insert(m).second) {
            throw DataError(where + ": duplicate marker '" + m + "' in header");
        }
    }

    const auto n = static_cast<Eigen::Index>(out.markers.size());
    const auto m = static_cast<Eigen::Index>(lines.size() - 1);
    if (m == 0) {
        throw DataError(where + ": empty body (header only, no cell rows)");
    }

    out.values.resize(m, n);
    for (Eigen::Index r = 0; r < m; ++r) {
        auto fields = csv::split_line(lines[r + 1]);
        if (static_cast<Eigen::Index>(fields.size()) != n) {
            throw DataError(where + ": ragged row " + std::to_string(r + 2) + " has " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(n));
        }
        for (Eigen::Index c = 0; c < n; ++c) {
            double v = 0;
            if (!csv::parse_double(fields[c], v)) {
                throw DataError(where + ": non-numeric value '" + fields[c] + "' at row " + std::to_string(r + 2) +
                                ", column " + std::to_string(c + 1));
            }
            out.values(r, c) = v;
        }
    }
    return out;
}

void write_cell_matrix(const std::filesystem::path& path, const CellMatrix& matrix) {
    std::string text = csv::join(matrix.markers) + "\n";
    for (Eigen::Index r = 0; r < matrix.values.rows(); ++r) {
        for (Eigen::Index c = 0; c < matrix.values.cols(); ++c) {
            if (c) {
                text += ',';
            }
            text += csv::format_double(matrix.values(r, c));
        }
        text += '\n';
    }
    csv::write_text(path, text);
}

std::vector<SampleRecord> load_manifest(const std::filesystem::path& path) {
    auto lines = csv::read_lines(path);
    const std::string where = "'" + path.string() + "'";
    if (lines.empty()) {
        throw DataError(where + ": missing header row");
    }
    auto header = csv::split_line(lines[0]);
    if (header.size() < 3 || header[0] != "sample_id" || header[1] != "cells_path" || header[2] != "outcome") {
        throw DataError(where + ": header must start with sample_id,cells_path,outcome");
    }

    const std::size_t n_cov = header.size() - 3;
    std::vector<SampleRecord> records;
    std::vector<std::vector<std::optional<double>>> cov_values(n_cov);
    std::unordered_set<std::string> ids;

    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].empty() || lines[r] == "\r") {
            continue;
        }
        auto fields = csv::split_line(lines[r]);
        const std::string row = std::to_string(r + 1);
        if (fields.size() != header.size()) {
            throw DataError(where + ": ragged row " + row);
        }
        SampleRecord rec;
        rec.sample_id = fields[0];
        rec.cells_path = fields[1];
        if (rec.sample_id.empty()) {
            throw DataError(where + ": empty sample_id at row " + row);
        }
        if (!ids.insert(rec.sample_id).second) {
            throw DataError(where + ": duplicate sample_id '" + rec.sample_id + "' at row " + row);
        }
        double outcome = 0;
        if (!csv::parse_double(fields[2], outcome) || (outcome != 0.0 && outcome != 1.0)) {
            throw DataError(where + ": outcome '" + fields[2] + "' at row " + row + " is not 0 or 1");
        }
        rec.outcome = static_cast<int>(outcome);

        for (std::size_t c = 0; c < n_cov; ++c) {
            const auto& cell = fields[c + 3];
            if (cell.empty()) {
                cov_values[c].push_back(std::nullopt);
                continue;
            }
            double v = 0;
            if (!csv::parse_double(cell, v)) {
                throw DataError(where + ": non-numeric covariate '" + header[c + 3] + "' value '" + cell + "' at row " + row);
            }
            cov_values[c].push_back(v);
        }
        records.push_back(std::move(rec));
    }

    for (std::size_t c = 0; c < n_cov; ++c) {
        bool all_binary = true;
        for (const auto& v : cov_values[c]) {
            if (v && *v != 0.0 && *v != 1.0) {
                all_binary = false;
            }
        }
        for (std::size_t r = 0; r < records.size(); ++r) {
            const auto& v = cov_values[c][r];
            if (!v) {
                continue;
            }
            records[r].covariates[header[c + 3]] =
                all_binary ? CovariateValue::binary(static_cast<int>(*v)) : CovariateValue::continuous(*v);
        }
    }
    return records;
}

void write_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records) {
    std::set<std::string> names;
    for (const auto& r : records) {
        for (const auto& [name, value] : r.covariates) {
            names.insert(name);
        }
    }
    std::vector<std::string> header{"sample_id", "cells_path", "outcome"};
    header.insert(header.end(), names.begin(), names.end());
    std::string text = csv::join(header) + "\n";
    for (const auto& r : records) {
        std::vector<std::string> fields{r.sample_id, r.cells_path, std::to_string(r.outcome)};
        for (const auto& name : names) {
            auto it = r.covariates.find(name);
            fields.push_back(it == r.covariates.end() ? std::string() : csv::format_double(it->second.raw));
        }
        text += csv::join(fields) + "\n";
    }
    csv::write_text(path, text);
}

CohortDataset load_cohort(const std::filesystem::path& manifest_path) {
    auto records = load_manifest(manifest_path);
    const auto base = manifest_path.parent_path();
    std::vector<Sample> samples;
    samples.reserve(records.size());
    for (auto& rec : records) {
        std::filesystem::path cells_path(rec.cells_path);
        if (cells_path.is_relative()) {
            cells_path = base / cells_path;
        }
        Sample s;
        s.cells = load_cell_matrix(cells_path, rec.sample_id);
        s.record = std::move(rec);
        samples.push_back(std::move(s));
    }
    return CohortDataset::make(std::move(samples));
}

namespace {

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    if (n % 2 == 1) {
        return values[n / 2];
    }
    return (values[n / 2 - 1] + values[n / 2]) / 2;
}

}

CohortDataset binarize_covariate(const CohortDataset& cohort, const std::string& name, const BinarizeRule& rule) {
    std::vector<SampleRecord> records;
    records.reserve(cohort.size());
    std::vector<double> raws;
    for (const auto& s : cohort.samples()) {
        raws.push_back(raw_covariate(s.record, name));
        records.push_back(s.record);
    }

    // Idempotence: an already-resolved continuous covariate keeps its threshold.
    double threshold = rule.kind == BinarizeRule::Kind::Median ? median_of(raws) : rule.threshold;
    for (auto& rec : records) {
        auto& cov = rec.covariates.at(name);
        if (cov.kind == CovariateValue::Kind::Binary) {
            continue;
        }
        if (cov.resolved_threshold) {
            continue;
        }
        cov.binarized = cov.raw > threshold ? 1 : 0;
        cov.resolved_threshold = threshold;
    }
    return cohort.with_records(std::move(records));
}

int binarized_covariate(const SampleRecord& record, const std::string& name) {
    auto it = record.covariates.find(name);
    if (it == record.covariates.end()) {
        throw DataError("sample '" + record.sample_id + "' is missing covariate '" + name + "'");
    }
    if (!it->second.binarized) {
        throw DataError("covariate '" + name + "' on sample '" + record.sample_id +
                        "' is continuous and has not been binarized");
    }
    return *it->second.binarized;
}

double raw_covariate(const SampleRecord& record, const std::string& name) {
    auto it = record.covariates.find(name);
    if (it == record.covariates.end()) {
        throw DataError("sample '" + record.sample_id + "' is missing covariate '" + name + "'");
    }
    return it->second.raw;
}

std::vector<Eigen::Index> subsample_indices(Eigen::Index num_cells, int set_size, std::uint64_t seed) {
    if (set_size < 1) {
        throw DataError("set_size must be >= 1");
    }
    if (num_cells < 1) {
        throw DataError("cannot subsample an empty cell matrix");
    }
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> out;
    out.reserve(set_size);

    if (num_cells < set_size) {
        std::uniform_int_distribution<Eigen::Index> pick(0, num_cells - 1);
        for (int i = 0; i < set_size; ++i) {
            out.push_back(pick(rng));
        }
        return out;
    }

    // Floyd's algorithm: set_size distinct indices in O(set_size) expected draws.
    std::unordered_set<Eigen::Index> chosen;
    chosen.reserve(static_cast<std::size_t>(set_size) * 2);
    for (Eigen::Index j = num_cells - set_size; j < num_cells; ++j) {
        std::uniform_int_distribution<Eigen::Index> pick(0, j);
        auto t = pick(rng);
        if (chosen.insert(t).second) {
            out.push_back(t);
        } else {
            chosen.insert(j);
            out.push_back(j);
        }
    }
    return out;
}

CellMatrix subsample_set(const CellMatrix& matrix, int set_size, std::uint64_t seed) {
    auto rows = subsample_indices(matrix.num_cells(), set_size, seed);
    CellMatrix out;
    out.sample_id = matrix.sample_id;
    out.markers = matrix.markers;
    out.values.resize(set_size, matrix.num_markers());
    for (int i = 0; i < set_size; ++i) {
        out.values.row(i) = matrix.values.row(rows[i]);
    }
    return out;
}

namespace {

// Number of distinct test sets, saturating at `cap`.
std::uint64_t count_test_sets(const std::vector<std::pair<std::size_t, std::size_t>>& class_sizes, std::uint64_t cap) {
    long double total = 1;
    for (auto [c, k] : class_sizes) {
        long double binom = 1;
        for (std::size_t i = 1; i <= k; ++i) {
            binom = binom * static_cast<long double>(c - k + i) / static_cast<long double>(i);
        }
        total *= binom;
        if (total >= static_cast<long double>(cap)) {
            return cap;
        }
    }
    return static_cast<std::uint64_t>(std::llround(total));
}

}

std::vector<SplitPlan> stratified_splits(const CohortDataset& cohort, int n_trials, double test_fraction, std::uint64_t seed) {
    if (n_trials < 1) {
        throw DataError("n_trials must be >= 1");
    }
    if (!(test_fraction > 0 && test_fraction < 1)) {
        throw DataError("test_fraction must lie strictly between 0 and 1");
    }

    std::vector<std::string> by_class[2];
    for (const auto& s : cohort.samples()) {
        by_class[s.record.outcome].push_back(s.record.sample_id);
    }
    std::vector<std::pair<std::size_t, std::size_t>> class_sizes;
    for (int c = 0; c < 2; ++c) {
        if (by_class[c].size() < 2) {
            throw DataError("outcome class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                            " sample(s); stratified splitting needs at least 2 per class");
        }
        const auto size = by_class[c].size();
        auto k = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(size)));
        k = std::clamp<std::size_t>(k, 1, size - 1);
        class_sizes.emplace_back(size, k);
    }

    // Plan t only depends on plans 0..t-1, so a shorter run is a prefix of a longer one.
    const auto possible = count_test_sets(class_sizes, static_cast<std::uint64_t>(n_trials));
    constexpr int max_attempts = 1000;

    std::vector<SplitPlan> plans;
    std::set<std::vector<std::string>> seen;
    for (int t = 0; t < n_trials; ++t) {
        const auto trial_seed = derive_seed(seed, SeedPurpose::Split, static_cast<std::uint64_t>(t));
        const bool force_distinct = seen.size() < possible;
        SplitPlan plan;
        for (int attempt = 0; attempt < max_attempts; ++attempt) {
            plan = SplitPlan{};
            plan.trial_id = t;
            plan.seed = attempt == 0 ? trial_seed : derive_seed(trial_seed, static_cast<std::uint64_t>(attempt));
            std::mt19937_64 rng(plan.seed);
            for (int c = 0; c < 2; ++c) {
                auto ids = by_class[c];
                std::shuffle(ids.begin(), ids.end(), rng);
                const auto k = class_sizes[c].second;
                plan.test_ids.insert(plan.test_ids.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
                plan.train_ids.insert(plan.train_ids.end(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
            }
            std::sort(plan.train_ids.begin(), plan.train_ids.end());
            std::sort(plan.test_ids.begin(), plan.test_ids.end());
            if (seen.insert(plan.test_ids).second || !force_distinct) {
                break;
            }
        }
        plans.push_back(std::move(plan));
    }
    return plans;
}

}
