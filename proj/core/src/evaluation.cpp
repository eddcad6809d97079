#include "cytocoset/evaluation.hpp"
#include "cytocoset/seeds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace cytocoset {

namespace {

void check_binary_labels(std::span<const double> scores, std::span<const int> labels, std::size_t& n_pos, std::size_t& n_neg) {
    if (scores.size() != labels.size()) {
        throw DataError("scores and labels differ in length");
    }
    n_pos = 0;
    n_neg = 0;
    for (int y : labels) {
        if (y == 1) {
            ++n_pos;
        } else if (y == 0) {
            ++n_neg;
        } else {
            throw DataError("labels must be 0 or 1");
        }
    }
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("metrics need both outcome classes present");
    }
}

}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    std::size_t n_pos = 0, n_neg = 0;
    check_binary_labels(scores, labels, n_pos, n_neg);

    const auto n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of (1-based, tie-averaged) ranks of the positives.
    double rank_sum = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            ++j;
        }
        const double avg_rank = static_cast<double>(i + 1 + j) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                rank_sum += avg_rank;
            }
        }
        i = j;
    }
    const double P = static_cast<double>(n_pos);
    const double N = static_cast<double>(n_neg);
    const double u = rank_sum - P * (P + 1) / 2.0;
    return u / (P * N);
}

ClassificationMetrics precision_recall_f1(std::span<const double> scores, std::span<const int> labels, double threshold) {
    std::size_t n_pos = 0, n_neg = 0;
    check_binary_labels(scores, labels, n_pos, n_neg);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (predicted && labels[i] == 1) {
            ++tp;
        } else if (predicted) {
            ++fp;
        } else if (labels[i] == 1) {
            ++fn;
        }
    }
    ClassificationMetrics out;
    if (tp + fp > 0) {
        out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    } else {
        out.zero_division = true;
    }
    if (tp + fn > 0) {
        out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    } else {
        out.zero_division = true;
    }
    if (out.precision + out.recall > 0) {
        out.f1 = 2 * out.precision * out.recall / (out.precision + out.recall);
    }
    return out;
}

CovariateDependency covariate_dependency(const CohortDataset& cohort, const std::string& covariate) {
    CovariateDependency out;
    auto& t = out.table;
    for (const auto& s : cohort.samples()) {
        const int c = binarized_covariate(s.record, covariate);
        const int y = s.record.outcome;
        if (y == 0) {
            (c == 0 ? t.D0 : t.D1) += 1;
        } else {
            (c == 0 ? t.D2 : t.D3) += 1;
        }
    }
    out.statistic = static_cast<double>(std::labs((t.D1 + t.D2) - (t.D0 + t.D3)));
    out.normalized = cohort.size() > 0 ? out.statistic / static_cast<double>(cohort.size()) : 0.0;
    return out;
}

std::vector<double> score_samples(const ModelParams& params, const CohortDataset& cohort,
                                  const std::vector<std::string>& ids, int n_subsets, std::uint64_t seed) {
    if (n_subsets < 1) {
        throw DataError("n_eval_subsets must be >= 1");
    }
    const int set_size = params.config().set_size;
    std::vector<double> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const auto idx = cohort.index_of(id);
        const auto& cells = cohort.at(idx).cells;
        double sum = 0;
        for (int r = 0; r < n_subsets; ++r) {
            const auto s = derive_seed(derive_seed(seed, SeedPurpose::Evaluation, idx), static_cast<std::uint64_t>(r));
            sum += forward(params, subsample_set(cells, set_size, s).values).probability();
        }
        out.push_back(sum / n_subsets);
    }
    return out;
}

std::vector<std::vector<double>> embed_samples(const ModelParams& params, const CohortDataset& cohort,
                                               const std::vector<std::string>& ids, int n_subsets, std::uint64_t seed) {
    if (n_subsets < 1) {
        throw DataError("n_eval_subsets must be >= 1");
    }
    const int set_size = params.config().set_size;
    const auto E = static_cast<std::size_t>(params.config().embed_dim);
    std::vector<std::vector<double>> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const auto idx = cohort.index_of(id);
        const auto& cells = cohort.at(idx).cells;
        std::vector<double> mean(E, 0.0);
        for (int r = 0; r < n_subsets; ++r) {
            const auto s = derive_seed(derive_seed(seed, SeedPurpose::Evaluation, idx), static_cast<std::uint64_t>(r));
            auto res = forward(params, subsample_set(cells, set_size, s).values);
            for (std::size_t j = 0; j < E; ++j) {
                mean[j] += res.embedding[j];
            }
        }
        for (auto& v : mean) {
            v /= n_subsets;
        }
        out.push_back(std::move(mean));
    }
    return out;
}

namespace {

double mean_of(const std::vector<double>& v) {
    if (v.empty()) {
        return std::nan("");
    }
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}

double EmbeddingDistanceSummary::mean_same() const {
    return mean_of(same_pair_distances);
}

double EmbeddingDistanceSummary::mean_diff() const {
    return mean_of(diff_pair_distances);
}

EmbeddingDistanceSummary embedding_alignment(const ModelParams& params, const CohortDataset& cohort,
                                             const std::string& covariate, const GapRule& delta, int n_pairs,
                                             int n_subsets, std::uint64_t seed) {
    if (n_pairs < 1) {
        throw DataError("n_pairs must be >= 1");
    }
    const auto ids = cohort.ids();
    const auto n = ids.size();
    if (n < 2) {
        throw DataError("embedding alignment needs at least two samples");
    }
    // Validate the covariate up front so a missing value is reported even if no pair touches it.
    for (const auto& s : cohort.samples()) {
        if (delta.mode == GapRule::Mode::Binary) {
            binarized_covariate(s.record, covariate);
        } else {
            raw_covariate(s.record, covariate);
        }
    }

    std::vector<std::pair<std::size_t, std::size_t>> all_pairs;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            all_pairs.emplace_back(a, b);
        }
    }
    std::mt19937_64 rng(derive_seed(seed, SeedPurpose::Pairs));
    std::shuffle(all_pairs.begin(), all_pairs.end(), rng);
    all_pairs.resize(std::min(all_pairs.size(), static_cast<std::size_t>(n_pairs)));

    const auto emb = embed_samples(params, cohort, ids, n_subsets, seed);

    EmbeddingDistanceSummary out;
    out.delta = delta;
    for (auto [a, b] : all_pairs) {
        const auto& ra = cohort.at(a).record;
        const auto& rb = cohort.at(b).record;
        bool same = false;
        if (delta.mode == GapRule::Mode::Binary) {
            same = binarized_covariate(ra, covariate) == binarized_covariate(rb, covariate);
        } else {
            const double gap = std::fabs(raw_covariate(ra, covariate) - raw_covariate(rb, covariate));
            if (gap <= delta.same_max) {
                same = true;
            } else if (gap >= delta.diff_min) {
                same = false;
            } else {
                continue;
            }
        }
        double sum = 0;
        for (std::size_t j = 0; j < emb[a].size(); ++j) {
            const double d = emb[a][j] - emb[b][j];
            sum += d * d;
        }
        const double dist = std::sqrt(sum);
        out.pairs.push_back(AlignmentPair{ids[a], ids[b], same, dist});
        (same ? out.same_pair_distances : out.diff_pair_distances).push_back(dist);
    }
    return out;
}

PcaProjection pca_project(const std::vector<std::vector<double>>& embeddings) {
    if (embeddings.size() < 2) {
        throw DataError("PCA projection needs at least two samples");
    }
    const auto n = static_cast<Eigen::Index>(embeddings.size());
    const auto dim = static_cast<Eigen::Index>(embeddings.front().size());
    if (dim < 2) {
        throw DataError("PCA projection needs vectors of dimension >= 2");
    }
    RowMatrix X(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(embeddings[i].size()) != dim) {
            throw DataError("PCA inputs differ in dimension");
        }
        for (Eigen::Index j = 0; j < dim; ++j) {
            X(i, j) = embeddings[i][j];
        }
    }
    const Eigen::RowVectorXd mean = X.colwise().mean();
    X.rowwise() -= mean;
    const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw NumericError("eigen-decomposition of the embedding covariance failed");
    }
    // Eigen returns eigenvalues in increasing order.
    const auto& evals = solver.eigenvalues();
    Eigen::MatrixXd axes(dim, 2);
    for (int k = 0; k < 2; ++k) {
        Eigen::VectorXd v = solver.eigenvectors().col(dim - 1 - k);
        for (Eigen::Index j = 0; j < dim; ++j) {
            if (std::fabs(v(j)) > 1e-12) {
                if (v(j) < 0) {
                    v = -v;
                }
                break;
            }
        }
        axes.col(k) = v;
    }

    PcaProjection out;
    const Eigen::MatrixXd proj = X * axes;
    out.coords.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.coords[i] = {proj(i, 0), proj(i, 1)};
    }
    out.eigenvalues = {std::max(0.0, evals(dim - 1)), std::max(0.0, evals(dim - 2))};
    double total = 0;
    for (Eigen::Index j = 0; j < dim; ++j) {
        total += std::max(0.0, evals(j));
    }
    out.explained = total > 0 ? (out.eigenvalues[0] + out.eigenvalues[1]) / total : 0.0;
    return out;
}

}
