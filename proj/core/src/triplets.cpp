#include "cytocoset/triplets.hpp"
#include "cytocoset/csv.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace cytocoset {

void TripletConfig::validate() const {
    auto on_grid = [](int q) { return q == 20 || q == 40 || q == 60 || q == 80; };
    if (!on_grid(h_s) || !on_grid(h_d)) {
        throw DataError("h_s and h_d must be one of 20, 40, 60, 80");
    }
    if (max_per_reference < 1) {
        throw DataError("max_per_reference must be >= 1");
    }
    if (covariate.empty()) {
        throw DataError("no covariate named for triplet selection");
    }
}

DistanceMatrix pairwise_distances(const std::vector<SampleSignature>& sigs) {
    if (sigs.size() < 2) {
        throw DataError("pairwise distances need at least two signatures");
    }
    DistanceMatrix out;
    const auto n = static_cast<Eigen::Index>(sigs.size());
    out.D = RowMatrix::Zero(n, n);
    for (const auto& s : sigs) {
        out.ids.push_back(s.sample_id);
    }
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = a + 1; b < n; ++b) {
            const double dist = signature_distance(sigs[a], sigs[b]);
            out.D(a, b) = dist;
            out.D(b, a) = dist;
        }
    }
    return out;
}

double quantile_threshold(std::vector<double> values, double q) {
    if (values.empty()) {
        throw DataError("quantile of an empty list");
    }
    if (!(q >= 0 && q <= 100)) {
        throw DataError("quantile must lie in [0, 100]");
    }
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<Triplet> admissible_triplets(const CohortDataset& train, const std::vector<SampleSignature>& sigs,
                                         const TripletConfig& cfg, TripletThresholds* thresholds) {
    cfg.validate();

    std::unordered_map<std::string, const SampleSignature*> by_id;
    for (const auto& s : sigs) {
        by_id[s.sample_id] = &s;
    }

    // Work in id order so the output does not depend on cohort ordering.
    auto ids = train.ids();
    std::sort(ids.begin(), ids.end());
    std::vector<SampleSignature> picked;
    std::vector<int> cov;
    for (const auto& id : ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw DataError("no signature for sample '" + id + "'");
        }
        picked.push_back(*it->second);
        cov.push_back(binarized_covariate(train.at(train.index_of(id)).record, cfg.covariate));
    }

    const auto n = ids.size();
    std::size_t group_size[2] = {0, 0};
    for (int c : cov) {
        ++group_size[c];
    }
    if (group_size[0] == 0 || group_size[1] == 0) {
        throw DataError("covariate group empty: every training sample has " + cfg.covariate + " = " +
                        std::to_string(group_size[0] == 0 ? 1 : 0));
    }

    const auto dist = pairwise_distances(picked);
    const auto& D = dist.D;

    std::vector<double> same_pairs;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            if (cov[a] == cov[b]) {
                same_pairs.push_back(D(a, b));
            }
        }
    }
    std::vector<double> margins;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i || cov[k] != cov[i]) {
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (cov[j] != cov[i]) {
                    margins.push_back(D(i, j) - D(i, k));
                }
            }
        }
    }
    if (same_pairs.empty()) {
        // Both groups are singletons: no reference has a "same" partner.
        if (thresholds) {
            *thresholds = TripletThresholds{};
        }
        return {};
    }

    TripletThresholds t;
    t.same = quantile_threshold(same_pairs, cfg.h_s);
    t.margin = quantile_threshold(margins, 100 - cfg.h_d);
    if (thresholds) {
        *thresholds = t;
    }

    std::vector<Triplet> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Triplet> local;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i || cov[k] != cov[i] || D(i, k) > t.same) {
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (cov[j] == cov[i] || D(i, j) - D(i, k) < t.margin) {
                    continue;
                }
                local.push_back(Triplet{ids[i], ids[j], ids[k], D(i, k), D(i, j)});
            }
        }
        std::sort(local.begin(), local.end(), [](const Triplet& a, const Triplet& b) {
            if (a.d_same != b.d_same) {
                return a.d_same < b.d_same;
            }
            if (a.d_diff != b.d_diff) {
                return a.d_diff > b.d_diff;
            }
            if (a.same_id != b.same_id) {
                return a.same_id < b.same_id;
            }
            return a.diff_id < b.diff_id;
        });
        out.insert(out.end(), local.begin(), local.end());
    }
    return out;
}

std::vector<Triplet> select_triplets(const CohortDataset& train, const std::vector<SampleSignature>& sigs,
                                     const TripletConfig& cfg, TripletThresholds* thresholds) {
    auto all = admissible_triplets(train, sigs, cfg, thresholds);
    std::vector<Triplet> out;
    std::unordered_map<std::string, int> kept;
    for (auto& t : all) {
        if (kept[t.ref_id]++ < cfg.max_per_reference) {
            out.push_back(std::move(t));
        }
    }
    return out;
}

void write_triplets(const std::filesystem::path& path, const std::vector<Triplet>& triplets) {
    std::string text = "ref_id,diff_id,same_id,d_same,d_diff\n";
    for (const auto& t : triplets) {
        text += csv::join({t.ref_id, t.diff_id, t.same_id, csv::format_double(t.d_same), csv::format_double(t.d_diff)});
        text += '\n';
    }
    csv::write_text(path, text);
}

std::vector<Triplet> read_triplets(const std::filesystem::path& path) {
    auto lines = csv::read_lines(path);
    const std::string where = "'" + path.string() + "'";
    if (lines.empty() || csv::split_line(lines[0]) !=
                             std::vector<std::string>{"ref_id", "diff_id", "same_id", "d_same", "d_diff"}) {
        throw DataError(where + ": expected header ref_id,diff_id,same_id,d_same,d_diff");
    }
    std::vector<Triplet> out;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].empty() || lines[r] == "\r") {
            continue;
        }
        auto f = csv::split_line(lines[r]);
        Triplet t;
        if (f.size() != 5 || !csv::parse_double(f[3], t.d_same) || !csv::parse_double(f[4], t.d_diff)) {
            throw DataError(where + ": malformed row " + std::to_string(r + 1));
        }
        t.ref_id = f[0];
        t.diff_id = f[1];
        t.same_id = f[2];
        out.push_back(std::move(t));
    }
    return out;
}

}
