#include "cytocoset/rff.hpp"
#include "cytocoset/csv.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cytocoset {

Pooling parse_pooling(const std::string& name) {
    if (name == "median") {
        return Pooling::Median;
    }
    if (name == "max") {
        return Pooling::Max;
    }
    throw DataError("unknown pooling '" + name + "' (expected 'median' or 'max')");
}

std::string to_string(Pooling p) {
    return p == Pooling::Median ? "median" : "max";
}

void RffConfig::validate() const {
    if (d < 2 || d % 2 != 0) {
        throw DataError("RFF dimension d must be even and >= 2, got " + std::to_string(d));
    }
    if (!(gamma > 0)) {
        throw DataError("RFF gamma must be positive");
    }
}

RffProjection make_projection(int n, const RffConfig& cfg) {
    cfg.validate();
    if (n < 1) {
        throw DataError("projection needs at least one input marker");
    }
    RffProjection out;
    out.gamma = cfg.gamma;
    out.seed = cfg.seed;
    out.P.resize(n, cfg.d / 2);
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(cfg.gamma));
    for (Eigen::Index i = 0; i < out.P.size(); ++i) {
        out.P.data()[i] = normal(rng);
    }
    return out;
}

RowMatrix transform_cells(const RowMatrix& cells, const RffProjection& proj) {
    const auto n = proj.P.rows();
    const auto K = proj.P.cols();
    if (cells.cols() != n) {
        throw DataError("cell matrix has " + std::to_string(cells.cols()) + " markers but the projection expects " +
                        std::to_string(n));
    }
    const double scale = std::sqrt(2.0 / static_cast<double>(K));
    RowMatrix Z(cells.rows(), 2 * K);
    std::vector<double> projected(K);
    for (Eigen::Index q = 0; q < cells.rows(); ++q) {
        std::fill(projected.begin(), projected.end(), 0.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double a = cells(q, i);
            const double* prow = proj.P.data() + i * K;
            for (Eigen::Index k = 0; k < K; ++k) {
                projected[k] += a * prow[k];
            }
        }
        double* zrow = Z.data() + q * 2 * K;
        for (Eigen::Index k = 0; k < K; ++k) {
            zrow[k] = scale * std::cos(projected[k]);
            zrow[K + k] = scale * std::sin(projected[k]);
        }
    }
    return Z;
}

SampleSignature pool_signature(const RowMatrix& Z, Pooling pooling, const std::string& sample_id) {
    const auto m = Z.rows();
    if (m < 1) {
        throw DataError("cannot pool an empty encoding matrix for sample '" + sample_id + "'");
    }
    SampleSignature out;
    out.sample_id = sample_id;
    out.values.resize(Z.cols());
    std::vector<double> column(m);
    for (Eigen::Index x = 0; x < Z.cols(); ++x) {
        for (Eigen::Index q = 0; q < m; ++q) {
            column[q] = Z(q, x);
        }
        if (pooling == Pooling::Max) {
            out.values[x] = *std::max_element(column.begin(), column.end());
            continue;
        }
        auto mid = column.begin() + m / 2;
        std::nth_element(column.begin(), mid, column.end());
        const double upper = *mid;
        if (m % 2 == 1) {
            out.values[x] = upper;
        } else {
            const double lower = *std::max_element(column.begin(), mid);
            out.values[x] = (lower + upper) / 2;
        }
    }
    return out;
}

double signature_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DataError("signature length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double sum = 0;
    for (std::size_t x = 0; x < a.size(); ++x) {
        const double diff = a[x] - b[x];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

std::vector<SampleSignature> featurize_cohort(const CohortDataset& cohort, const RffConfig& cfg) {
    auto proj = make_projection(static_cast<int>(cohort.markers().size()), cfg);
    std::vector<SampleSignature> out;
    out.reserve(cohort.size());
    for (const auto& s : cohort.samples()) {
        out.push_back(pool_signature(transform_cells(s.cells, proj), cfg.pooling, s.record.sample_id));
    }
    return out;
}

void write_signatures(const std::filesystem::path& path, const std::vector<SampleSignature>& sigs) {
    const std::size_t d = sigs.empty() ? 0 : sigs.front().values.size();
    std::string text = "sample_id";
    for (std::size_t x = 0; x < d; ++x) {
        text += ",s" + std::to_string(x);
    }
    text += '\n';
    for (const auto& s : sigs) {
        text += s.sample_id;
        for (double v : s.values) {
            text += ',' + csv::format_double(v);
        }
        text += '\n';
    }
    csv::write_text(path, text);
}

std::vector<SampleSignature> read_signatures(const std::filesystem::path& path) {
    auto lines = csv::read_lines(path);
    const std::string where = "'" + path.string() + "'";
    if (lines.empty()) {
        throw DataError(where + ": missing header row");
    }
    auto header = csv::split_line(lines[0]);
    if (header.empty() || header[0] != "sample_id") {
        throw DataError(where + ": header must start with sample_id");
    }
    std::vector<SampleSignature> out;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].empty() || lines[r] == "\r") {
            continue;
        }
        auto fields = csv::split_line(lines[r]);
        if (fields.size() != header.size()) {
            throw DataError(where + ": ragged row " + std::to_string(r + 1));
        }
        SampleSignature sig;
        sig.sample_id = fields[0];
        for (std::size_t c = 1; c < fields.size(); ++c) {
            double v = 0;
            if (!csv::parse_double(fields[c], v)) {
                throw DataError(where + ": non-numeric value at row " + std::to_string(r + 1) + ", column " +
                                std::to_string(c + 1));
            }
            sig.values.push_back(v);
        }
        out.push_back(std::move(sig));
    }
    return out;
}

}
