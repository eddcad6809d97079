#include "cytocoset/training.hpp"
#include "cytocoset/csv.hpp"
#include "cytocoset/seeds.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace cytocoset {

void LossConfig::validate() const {
    if (!(alpha >= 0 && alpha <= 1)) {
        throw DataError("alpha must lie in [0, 1]");
    }
    if (!(margin >= 0)) {
        throw DataError("margin must be >= 0");
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) {
        throw DataError("learning_rate must be positive");
    }
    if (batch_size < 1) {
        throw DataError("batch_size must be >= 1");
    }
    if (epochs < 1) {
        throw DataError("epochs must be >= 1");
    }
    if (steps_per_epoch < 1) {
        throw DataError("steps_per_epoch must be >= 1");
    }
}

double bce_loss(double p, int y) {
    p = std::clamp(p, bce_clamp, 1.0 - bce_clamp);
    return y == 1 ? -std::log(p) : -std::log(1.0 - p);
}

namespace {

double euclidean(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DataError("embedding length mismatch");
    }
    double sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

}

double triplet_term(std::span<const double> e_ref, std::span<const double> e_diff, std::span<const double> e_same, double h) {
    return std::max(0.0, euclidean(e_ref, e_same) - euclidean(e_ref, e_diff) + h);
}

double total_loss(std::span<const double> probabilities, std::span<const int> labels,
                  std::span<const double> triplet_values, const LossConfig& cfg) {
    if (probabilities.empty() || probabilities.size() != labels.size()) {
        throw DataError("total_loss needs one label per probability and a non-empty batch");
    }
    double bce = 0;
    for (std::size_t b = 0; b < probabilities.size(); ++b) {
        bce += bce_loss(probabilities[b], labels[b]);
    }
    bce /= static_cast<double>(probabilities.size());
    double trip = 0;
    for (double t : triplet_values) {
        trip += t;
    }
    if (!triplet_values.empty()) {
        trip /= static_cast<double>(triplet_values.size());
    }
    return cfg.alpha * bce + (1.0 - cfg.alpha) * trip;
}

TripletIndex::TripletIndex(const CohortDataset& cohort, const std::vector<Triplet>& triplets)
    : by_ref_(cohort.size()) {
    for (const auto& t : triplets) {
        by_ref_[cohort.index_of(t.ref_id)].emplace_back(cohort.index_of(t.diff_id), cohort.index_of(t.same_id));
        ++count_;
    }
}

std::span<const std::pair<std::size_t, std::size_t>> TripletIndex::partners(std::size_t ref) const {
    if (ref >= by_ref_.size()) {
        return {};
    }
    return by_ref_[ref];
}

std::size_t Batch::num_bound() const {
    return static_cast<std::size_t>(
        std::count_if(instances.begin(), instances.end(), [](const BatchInstance& b) { return b.binding.has_value(); }));
}

Batch make_batch(const CohortDataset& cohort, std::span<const std::size_t> train_indices, const TripletIndex& triplets,
                 int set_size, int batch_size, std::uint64_t batch_seed, std::uint64_t step) {
    if (train_indices.empty()) {
        throw DataError("cannot build a batch from an empty training set");
    }
    Batch batch;
    batch.instances.reserve(batch_size);
    std::mt19937_64 rng(derive_seed(batch_seed, SeedPurpose::Batch));
    std::uniform_int_distribution<std::size_t> pick(0, train_indices.size() - 1);
    std::unordered_map<std::size_t, std::uint64_t> occurrences;

    for (int b = 0; b < batch_size; ++b) {
        BatchInstance inst;
        inst.sample_index = train_indices[pick(rng)];
        const auto& sample = cohort.at(inst.sample_index);
        inst.label = sample.record.outcome;
        inst.set = subsample_set(sample.cells, set_size, derive_seed(batch_seed, SeedPurpose::Instance, b)).values;

        auto partners = triplets.partners(inst.sample_index);
        if (!partners.empty()) {
            const auto k = occurrences[inst.sample_index]++;
            const auto& [diff, same] = partners[(step + k) % partners.size()];
            TripletBinding bind;
            bind.diff_index = diff;
            bind.same_index = same;
            const auto pseed = derive_seed(batch_seed, SeedPurpose::Partner, b);
            bind.diff_set = subsample_set(cohort.at(diff).cells, set_size, derive_seed(pseed, 0)).values;
            bind.same_set = subsample_set(cohort.at(same).cells, set_size, derive_seed(pseed, 1)).values;
            inst.binding = std::move(bind);
        }
        batch.instances.push_back(std::move(inst));
    }
    return batch;
}

LossBreakdown composite_loss(const ModelParams& params, const Batch& batch, const LossConfig& cfg, Gradients* grads) {
    cfg.validate();
    if (batch.instances.empty()) {
        throw DataError("empty batch");
    }
    const double B = static_cast<double>(batch.instances.size());
    const bool use_triplets = cfg.alpha < 1.0;
    LossBreakdown out;
    out.num_bound = use_triplets ? batch.num_bound() : 0;
    const double triplet_weight = out.num_bound > 0 ? (1.0 - cfg.alpha) / static_cast<double>(out.num_bound) : 0.0;

    const auto E = static_cast<std::size_t>(params.config().embed_dim);
    std::vector<double> d_ref(E), d_diff(E), d_same(E);

    for (const auto& inst : batch.instances) {
        auto ref = forward(params, inst.set);
        const double p = ref.probability();
        out.mean_bce += bce_loss(p, inst.label);

        // d BCE / d logit = p - y, except where the clamp is active.
        const bool clamped = p < bce_clamp || p > 1.0 - bce_clamp;
        const double dlogit = clamped ? 0.0 : cfg.alpha / B * (p - static_cast<double>(inst.label));

        if (!use_triplets || !inst.binding) {
            if (grads) {
                backward(params, inst.set, ref.trace, dlogit, {}, *grads);
            }
            continue;
        }

        const auto& bind = *inst.binding;
        auto diff = forward(params, bind.diff_set);
        auto same = forward(params, bind.same_set);
        const double dist_same = euclidean(ref.embedding, same.embedding);
        const double dist_diff = euclidean(ref.embedding, diff.embedding);
        const double t = std::max(0.0, dist_same - dist_diff + cfg.margin);
        out.mean_triplet += t;

        if (!grads) {
            continue;
        }
        std::fill(d_ref.begin(), d_ref.end(), 0.0);
        std::fill(d_diff.begin(), d_diff.end(), 0.0);
        std::fill(d_same.begin(), d_same.end(), 0.0);
        if (t > 0.0) {
            for (std::size_t j = 0; j < E; ++j) {
                if (dist_same > 0.0) {
                    const double g = triplet_weight * (ref.embedding[j] - same.embedding[j]) / dist_same;
                    d_ref[j] += g;
                    d_same[j] -= g;
                }
                if (dist_diff > 0.0) {
                    const double g = triplet_weight * (ref.embedding[j] - diff.embedding[j]) / dist_diff;
                    d_ref[j] -= g;
                    d_diff[j] += g;
                }
            }
        }
        backward(params, inst.set, ref.trace, dlogit, d_ref, *grads);
        backward(params, bind.diff_set, diff.trace, 0.0, d_diff, *grads);
        backward(params, bind.same_set, same.trace, 0.0, d_same, *grads);
    }

    out.mean_bce /= B;
    if (out.num_bound > 0) {
        out.mean_triplet /= static_cast<double>(out.num_bound);
    }
    out.bce_component = cfg.alpha * out.mean_bce;
    out.triplet_component = (1.0 - cfg.alpha) * out.mean_triplet;
    out.total = out.bce_component + out.triplet_component;
    return out;
}

FitResult fit(const CohortDataset& cohort, const SplitPlan& split, const std::vector<Triplet>& triplets,
              const SetEncoderConfig& net, const LossConfig& loss, const TrainConfig& train) {
    net.validate();
    loss.validate();
    train.validate();
    if (net.input_dim != static_cast<int>(cohort.markers().size())) {
        throw DataError("encoder input_dim " + std::to_string(net.input_dim) + " does not match the cohort's " +
                        std::to_string(cohort.markers().size()) + " markers");
    }

    std::vector<std::size_t> train_indices;
    std::unordered_set<std::string> train_ids;
    for (const auto& id : split.train_ids) {
        train_indices.push_back(cohort.index_of(id));
        train_ids.insert(id);
    }
    if (train_indices.empty()) {
        throw DataError("training split is empty");
    }
    for (const auto& t : triplets) {
        for (const auto* id : {&t.ref_id, &t.diff_id, &t.same_id}) {
            if (!train_ids.count(*id)) {
                throw DataError("triplet member '" + *id + "' is not in the training split");
            }
        }
    }
    const TripletIndex index(cohort, triplets);

    FitResult result;
    result.params = init_params(net);
    Gradients grads(net);
    const std::size_t total_steps = static_cast<std::size_t>(train.epochs) * train.steps_per_epoch;
    result.log.reserve(total_steps);

    for (std::size_t step = 0; step < total_steps; ++step) {
        const auto batch_seed = derive_seed(train.seed, SeedPurpose::Batch, step);
        auto batch = make_batch(cohort, train_indices, index, net.set_size, train.batch_size, batch_seed, step);
        grads.set_zero();
        LossBreakdown lb;
        try {
            lb = composite_loss(result.params, batch, loss, &grads);
        } catch (const NumericError& e) {
            throw NumericError("training step " + std::to_string(step) + ": " + e.what());
        }
        if (!std::isfinite(lb.total)) {
            throw NumericError("non-finite loss at training step " + std::to_string(step));
        }
        result.log.push_back(TrainLogEntry{step, lb.bce_component, lb.triplet_component, lb.total});

        auto values = result.params.values();
        const auto g = grads.values();
        for (std::size_t i = 0; i < values.size(); ++i) {
            values[i] -= train.learning_rate * g[i];
        }
    }
    return result;
}

void write_training_log(const std::filesystem::path& path, const std::vector<TrainLogEntry>& log) {
    std::string text = "step,bce_component,triplet_component,total\n";
    for (const auto& e : log) {
        text += std::to_string(e.step) + ',' + csv::format_double(e.bce_component) + ',' +
                csv::format_double(e.triplet_component) + ',' + csv::format_double(e.total) + '\n';
    }
    csv::write_text(path, text);
}

}
