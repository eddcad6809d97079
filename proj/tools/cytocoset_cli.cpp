#include "run_config.hpp"

#include "cytocoset/csv.hpp"
#include "cytocoset/evaluation.hpp"
#include "cytocoset/experiment.hpp"
#include "cytocoset/seeds.hpp"
#include "cytocoset/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cytocoset;
using cytocoset::cli::Json;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_numeric = 3;

// Flags that override fields of the experiment config; applied only when given on the command line.
class ConfigFlags {
public:
    explicit ConfigFlags(CLI::App* app) : app_(app) {
        app_->add_option("--config", config_path_, "JSON config file; command-line flags override its values");
    }

    template <typename T, typename Set>
    void add(const std::string& name, const std::string& help, Set set) {
        auto value = std::make_shared<T>();
        auto* opt = app_->add_option(name, *value, help);
        if constexpr (!CLI::detail::is_mutable_container<T>::value) {
            // Later flags win, so scripts can append overrides.
            opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        }
        entries_.emplace_back(opt, [value, set](ExperimentConfig& cfg) { set(cfg, *value); });
    }

    void seed() {
        add<std::uint64_t>("--seed", "Base seed; every random stream is derived from it",
                           [](ExperimentConfig& c, std::uint64_t v) { c.seed = v; });
    }

    void rff() {
        add<int>("--rff-d", "Signature dimension (even)", [](ExperimentConfig& c, int v) { c.rff.d = v; });
        add<double>("--rff-gamma", "Kernel variance parameter", [](ExperimentConfig& c, double v) { c.rff.gamma = v; });
        add<std::string>("--rff-pool", "Signature pooling: median or max",
                         [](ExperimentConfig& c, const std::string& v) { c.rff.pooling = parse_pooling(v); });
    }

    void covariate() {
        add<std::string>("--covariate", "Covariate driving triplet selection",
                         [](ExperimentConfig& c, const std::string& v) { c.triplets.covariate = v; });
        add<std::string>("--binarize", "Rule for a continuous covariate: median or threshold:<v>",
                         [](ExperimentConfig& c, const std::string& v) { c.binarize = BinarizeRule::parse(v); });
    }

    void triplets() {
        covariate();
        add<int>("--h-s", "Same-pair distance percentile (20, 40, 60, 80)",
                 [](ExperimentConfig& c, int v) { c.triplets.h_s = v; });
        add<int>("--h-d", "Different-pair margin percentile (20, 40, 60, 80)",
                 [](ExperimentConfig& c, int v) { c.triplets.h_d = v; });
        add<int>("--max-per-reference", "Triplets kept per reference sample",
                 [](ExperimentConfig& c, int v) { c.triplets.max_per_reference = v; });
    }

    void net() {
        add<std::vector<int>>("--block-widths", "Per-cell block widths, e.g. 64,64",
                              [](ExperimentConfig& c, const std::vector<int>& v) { c.net.block_widths = v; });
        app_->get_option("--block-widths")->delimiter(',');
        add<int>("--embed-dim", "Embedding width", [](ExperimentConfig& c, int v) { c.net.embed_dim = v; });
        add<int>("--set-size", "Cells per set instance", [](ExperimentConfig& c, int v) { c.net.set_size = v; });
    }

    void loss() {
        add<double>("--alpha", "BCE weight; 1 disables the triplet term", [](ExperimentConfig& c, double v) { c.loss.alpha = v; });
        add<double>("--margin", "Triplet margin h", [](ExperimentConfig& c, double v) { c.loss.margin = v; });
    }

    void train() {
        add<double>("--lr", "SGD learning rate", [](ExperimentConfig& c, double v) { c.train.learning_rate = v; });
        add<int>("--batch-size", "Set instances per step", [](ExperimentConfig& c, int v) { c.train.batch_size = v; });
        add<int>("--epochs", "Training epochs", [](ExperimentConfig& c, int v) { c.train.epochs = v; });
        add<int>("--steps-per-epoch", "SGD steps per epoch", [](ExperimentConfig& c, int v) { c.train.steps_per_epoch = v; });
    }

    void split() {
        add<double>("--test-fraction", "Per-class test share", [](ExperimentConfig& c, double v) { c.test_fraction = v; });
    }

    void eval() {
        add<int>("--n-eval-subsets", "Subsampled sets averaged per test sample",
                 [](ExperimentConfig& c, int v) { c.n_eval_subsets = v; });
    }

    void trials() {
        add<int>("--n-trials", "Number of train/test splits", [](ExperimentConfig& c, int v) { c.n_trials = v; });
    }

    ExperimentConfig resolve() const {
        ExperimentConfig cfg = config_path_.empty() ? ExperimentConfig{} : cli::load_config(config_path_);
        for (const auto& [opt, set] : entries_) {
            if (opt->count() > 0) {
                set(cfg);
            }
        }
        return cfg;
    }

    const std::string& config_path() const { return config_path_; }

private:
    CLI::App* app_;
    std::string config_path_;
    std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> entries_;
};

void write_json(const fs::path& path, const Json& j) {
    csv::write_text(path, j.dump(2) + "\n");
}

fs::path sidecar(const fs::path& out, const std::string& suffix) {
    return fs::path(out.string() + suffix);
}

/// Resolved-config echo next to the primary output. Holds no timestamps or output paths.
void echo_config(const fs::path& out, const std::string& command, const Json& inputs, const Json& options,
                 const ExperimentConfig& cfg) {
    Json j;
    j["command"] = command;
    j["inputs"] = inputs;
    j["options"] = options;
    const auto resolved = cli::config_to_json(cfg);
    for (const auto& [k, v] : resolved.items()) {
        j[k] = v;
    }
    write_json(sidecar(out, ".config.json"), j);
}

SplitPlan split_for(const CohortDataset& cohort, const ExperimentConfig& cfg, int trial) {
    if (trial < 0) {
        throw DataError("--trial must be >= 0");
    }
    return stratified_splits(cohort, trial + 1, cfg.test_fraction, trial_seeds(cfg.seed, 0).split).back();
}

CohortDataset load_prepared(const std::string& manifest, const ExperimentConfig& cfg) {
    return prepare_cohort(load_cohort(manifest), cfg);
}

std::string metric_row(const MetricsReport& m) {
    return std::to_string(m.trial_id) + ',' + std::to_string(m.n_test) + ',' + csv::format_double(m.auc) + ',' +
           csv::format_double(m.precision) + ',' + csv::format_double(m.recall) + ',' + csv::format_double(m.f1) + '\n';
}

Json metrics_json(const Evaluation& ev) {
    Json j;
    j["trial_id"] = ev.metrics.trial_id;
    j["n_test"] = ev.metrics.n_test;
    j["auc"] = ev.metrics.auc;
    j["precision"] = ev.metrics.precision;
    j["recall"] = ev.metrics.recall;
    j["f1"] = ev.metrics.f1;
    j["zero_division"] = ev.zero_division;
    Json samples = Json::array();
    for (std::size_t i = 0; i < ev.ids.size(); ++i) {
        samples.push_back({{"sample_id", ev.ids[i]}, {"score", ev.scores[i]}, {"label", ev.labels[i]}});
    }
    j["samples"] = samples;
    return j;
}

std::vector<std::string> select_ids(const CohortDataset& cohort, const ExperimentConfig& cfg, const std::string& subset,
                                    int trial) {
    if (subset == "all") {
        return cohort.ids();
    }
    const auto split = split_for(cohort, cfg, trial);
    if (subset == "train") {
        return split.train_ids;
    }
    if (subset == "test") {
        return split.test_ids;
    }
    throw DataError("unknown subset '" + subset + "' (expected all, train or test)");
}

struct Command {
    CLI::App* app = nullptr;
    std::function<void()> run;
};

}

int main(int argc, char** argv) {
    CLI::App app{"cytocoset: covariate-aware set embeddings for multi-sample single-cell data"};
    app.require_subcommand(1);
    std::vector<Command> commands;

    // synth
    {
        auto* sub = app.add_subcommand("synth", "Generate a synthetic cohort (cells/*.csv and manifest.csv)");
        auto flags = std::make_shared<ConfigFlags>(sub);
        flags->seed();
        auto sc = std::make_shared<SynthConfig>();
        auto out = std::make_shared<std::string>();
        auto extras = std::make_shared<std::vector<std::string>>();
        sub->add_option("--out", *out, "Output directory")->required();
        sub->add_option("--n-samples", sc->n_samples, "Number of samples")->capture_default_str();
        sub->add_option("--cells", sc->cells_per_sample, "Cells per sample")->capture_default_str();
        sub->add_option("--markers", sc->n_markers, "Markers per cell")->capture_default_str();
        sub->add_option("--effect-size", sc->effect_size, "Shift of the outcome-associated cells")->capture_default_str();
        sub->add_option("--signal-fraction", sc->signal_fraction, "Share of shifted cells in outcome-1 samples")
            ->capture_default_str();
        sub->add_option("--alignment", sc->covariate_alignment, "P(cov == outcome)")->capture_default_str();
        sub->add_option("--extra-covariate", *extras, "Additional covariate as name:alignment (repeatable)");
        commands.push_back({sub, [=] {
            const auto cfg = flags->resolve();
            auto synth = *sc;
            synth.seed = cfg.seed;
            for (const auto& e : *extras) {
                const auto colon = e.find(':');
                double phi = 0;
                if (colon == std::string::npos || !csv::parse_double(e.substr(colon + 1), phi)) {
                    throw DataError("--extra-covariate expects name:alignment, got '" + e + "'");
                }
                synth.extra_covariates.push_back({e.substr(0, colon), phi});
            }
            write_cohort(generate_cohort(synth), *out);
            Json opts{{"n_samples", synth.n_samples},
                      {"cells_per_sample", synth.cells_per_sample},
                      {"n_markers", synth.n_markers},
                      {"effect_size", synth.effect_size},
                      {"signal_fraction", synth.signal_fraction},
                      {"covariate_alignment", synth.covariate_alignment},
                      {"extra_covariates", *extras}};
            echo_config(fs::path(*out) / "synth", "synth", Json::object(), opts, cfg);
        }});
    }

    // featurize
    {
        auto* sub = app.add_subcommand("featurize", "Per-sample random Fourier feature signatures");
        auto flags = std::make_shared<ConfigFlags>(sub);
        flags->seed();
        flags->rff();
        auto manifest = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        sub->add_option("--manifest", *manifest, "Cohort manifest CSV")->required();
        sub->add_option("--out", *out, "Signatures CSV")->required();
        commands.push_back({sub, [=] {
            const auto cfg = flags->resolve();
            const auto cohort = load_cohort(*manifest);
            write_signatures(*out, featurize(cohort, cfg));
            echo_config(*out, "featurize", {{"manifest", *manifest}}, Json::object(), cfg);
        }});
    }

    // triplets
    {
        auto* sub = app.add_subcommand("triplets", "Mine covariate triplets on the training samples of a split");
        auto flags = std::make_shared<ConfigFlags>(sub);
        flags->seed();
        flags->triplets();
        flags->split();
        auto manifest = std::make_shared<std::string>();
        auto signatures = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto trial = std::make_shared<int>(0);
        auto all = std::make_shared<bool>(false);
        sub->add_option("--manifest", *manifest, "Cohort manifest CSV")->required();
        sub->add_option("--signatures", *signatures, "Signatures CSV from featurize")->required();
        sub->add_option("--out", *out, "Triplets CSV")->required();
        sub->add_option("--trial", *trial, "Split index whose training samples are used")->capture_default_str();
        sub->add_flag("--all-samples", *all, "Mine on every sample instead of a training split");
        commands.push_back({sub, [=] {
            const auto cfg = flags->resolve();
            if (cfg.triplets.covariate.empty()) {
                throw DataError("--covariate is required");
            }
            const auto cohort = load_prepared(*manifest, cfg);
            const auto sigs = read_signatures(*signatures);
            const auto pool = *all ? cohort : cohort.subset(split_for(cohort, cfg, *trial).train_ids);
            write_triplets(*out, select_triplets(pool, sigs, cfg.triplets));
            echo_config(*out, "triplets", {{"manifest", *manifest}, {"signatures", *signatures}},
                        {{"trial", *trial}, {"all_samples", *all}}, cfg);
        }});
    }

    // train
    {
        auto* sub = app.add_subcommand("train", "Fit the set encoder on the training samples of a split");
        auto flags = std::make_shared<ConfigFlags>(sub);
        flags->seed();
        flags->rff();
        flags->triplets();
        flags->net();
        flags->loss();
        flags->train();
        flags->split();
        auto manifest = std::make_shared<std::string>();
        auto triplets = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto log = std::make_shared<std::string>();
        auto trial = std::make_shared<int>(0);
        sub->add_option("--manifest", *manifest, "Cohort manifest CSV")->required();
        sub->add_option("--triplets", *triplets, "Triplets CSV; mined from the split when omitted");
        sub->add_option("--out", *out, "Checkpoint path")->required();
        sub->add_option("--log", *log, "Training log CSV (default <out>.log.csv)");
        sub->add_option("--trial", *trial, "Split index")->capture_default_str();
        commands.push_back({sub, [=] {
            const auto cfg = flags->resolve();
            const auto cohort = load_prepared(*manifest, cfg);
            const auto split = split_for(cohort, cfg, *trial);
            std::vector<Triplet> mined;
            if (cfg.loss.alpha < 1.0) {
                if (!triplets->empty()) {
                    mined = read_triplets(*triplets);
                } else {
                    mined = mine_triplets(cohort, featurize(cohort, cfg), split, cfg);
                }
            }
            const auto result = fit(cohort, split, mined, trial_net_config(cohort, cfg, *trial), cfg.loss,
                                    trial_train_config(cfg, *trial));
            write_checkpoint(*out, result.params);
            write_training_log(log->empty() ? sidecar(*out, ".log.csv") : fs::path(*log), result.log);
            echo_config(*out, "train", {{"manifest", *manifest}, {"triplets", *triplets}}, {{"trial", *trial}}, cfg);
        }});
    }

    // evaluate
    {
        auto* sub = app.add_subcommand("evaluate", "Score the test samples of a split with a checkpoint");
        auto flags = std::make_shared<ConfigFlags>(sub);
        flags->seed();
        flags->covariate();
        flags->split();
        flags->eval();
        auto manifest = std::make_shared<std::string>();
        auto checkpoint = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto trial = std::make_shared<int>(0);
        sub->add_option("--manifest", *manifest, "Cohort manifest CSV")->required();
        sub->add_option("--checkpoint", *checkpoint, "Checkpoint from train")->required();
        sub->add_option("--out", *out, "Metrics JSON")->required();
        sub->add_option("--trial", *trial, "Split index")->capture_default_str();
        commands.push_back({sub, [=] {
            const auto cfg = flags->resolve();
            const auto cohort = load_prepared(*manifest, cfg);
            const auto params = read_checkpoint(*checkpoint);
            const auto split = split_for(cohort, cfg, *trial);
            const auto ev = evaluate_split(params, cohort, split, cfg.n_eval_subsets, trial_seeds(cfg.seed, *trial).evaluation);
            write_json(*out, metrics_json(ev));
            echo_config(*out, "evaluate", {{"manifest", *manifest}, {"checkpoint", *checkpoint}}, {{"trial", *trial}}, cfg);
        }});
    }

    // trials
    {
        auto* sub = app.add_subcommand("trials", "Train and evaluate over repeated stratified splits");
        auto flags = std::make_shared<ConfigFlags>(sub);
        flags->seed();
        flags->rff();
        flags->triplets();
        flags->net();
        flags->loss();
        flags->train();
        flags->split();
        flags->eval();
        flags->trials();
        auto manifest = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        sub->add_option("--manifest", *manifest, "Cohort manifest CSV")->required();
        sub->add_option("--out", *out, "Per-trial metrics CSV; a .summary.json sidecar is written next to it")->required();
        commands.push_back({sub, [=] {
            const auto cfg = flags->resolve();
            const auto cohort = load_prepared(*manifest, cfg);
            const auto results = run_trials(cohort, cfg);
            std::string text = "trial_id,n_test,auc,precision,recall,f1\n";
            std::vector<double> auc, prec, rec, f1;
            for (const auto& r : results) {
                const auto& m = r.evaluation.metrics;
                text += metric_row(m);
                auc.push_back(m.auc);
                prec.push_back(m.precision);
                rec.push_back(m.recall);
                f1.push_back(m.f1);
            }
            const auto [mean_auc, std_auc] = mean_std(auc);
            const double n_test_mean = static_cast<double>(results.front().evaluation.metrics.n_test);
            text += "mean," + csv::format_double(n_test_mean) + ',' + csv::format_double(mean_auc) + ',' +
                    csv::format_double(mean_std(prec).first) + ',' + csv::format_double(mean_std(rec).first) + ',' +
                    csv::format_double(mean_std(f1).first) + '\n';
            csv::write_text(*out, text);

            // Normal-approximation 95% interval of the mean AUC.
            const double half = 1.96 * std_auc / std::sqrt(static_cast<double>(auc.size()));
            Json summary{{"n_trials", results.size()},
                         {"mean_auc", mean_auc},
                         {"std_auc", std_auc},
                         {"ci95_low", mean_auc - half},
                         {"ci95_high", mean_auc + half},
                         {"mean_precision", mean_std(prec).first},
                         {"mean_recall", mean_std(rec).first},
                         {"mean_f1", mean_std(f1).first}};
            write_json(sidecar(*out, ".summary.json"), summary);
            echo_config(*out, "trials", {{"manifest", *manifest}}, Json::object(), cfg);
        }});
    }

    // covdep
    {
        auto* sub = app.add_subcommand("covdep", "Covariate/outcome dependency table, ascending");
        auto flags = std::make_shared<ConfigFlags>(sub);
        auto manifest = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto names = std::make_shared<std::vector<std::string>>();
        auto binarize = std::make_shared<std::string>("median");
        sub->add_option("--manifest", *manifest, "Cohort manifest CSV")->required();
        sub->add_option("--out", *out, "Dependency CSV")->required();
        sub->add_option("--covariates", *names, "Covariates to score (default: all)")->delimiter(',');
        sub->add_option("--binarize", *binarize, "Rule applied to continuous covariates")->capture_default_str();
        commands.push_back({sub, [=] {
            const auto cfg = flags->resolve();
            auto cohort = load_cohort(*manifest);
            auto list = *names;
            if (list.empty()) {
                std::set<std::string> all;
                for (const auto& s : cohort.samples()) {
                    for (const auto& [k, v] : s.record.covariates) {
                        all.insert(k);
                    }
                }
                list.assign(all.begin(), all.end());
            }
            if (list.empty()) {
                throw DataError("manifest has no covariate columns");
            }
            const auto rule = BinarizeRule::parse(*binarize);
            std::vector<std::pair<std::string, CovariateDependency>> rows;
            for (const auto& name : list) {
                cohort = binarize_covariate(cohort, name, rule);
                rows.emplace_back(name, covariate_dependency(cohort, name));
            }
            std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
                if (a.second.statistic != b.second.statistic) {
                    return a.second.statistic < b.second.statistic;
                }
                return a.first < b.first;
            });
            std::string text = "covariate,D0,D1,D2,D3,statistic,normalized\n";
            for (const auto& [name, dep] : rows) {
                const auto& t = dep.table;
                text += name + ',' + std::to_string(t.D0) + ',' + std::to_string(t.D1) + ',' + std::to_string(t.D2) + ',' +
                        std::to_string(t.D3) + ',' + csv::format_double(dep.statistic) + ',' +
                        csv::format_double(dep.normalized) + '\n';
            }
            csv::write_text(*out, text);
            echo_config(*out, "covdep", {{"manifest", *manifest}}, {{"covariates", list}, {"binarize", *binarize}}, cfg);
        }});
    }

    // embed, project, align share checkpoint/subset handling
    struct EmbedOptions {
        std::string manifest, checkpoint, out, subset = "all";
        int trial = 0;
    };
    auto add_embed_options = [](CLI::App* sub, EmbedOptions& o) {
        sub->add_option("--manifest", o.manifest, "Cohort manifest CSV")->required();
        sub->add_option("--checkpoint", o.checkpoint, "Checkpoint from train")->required();
        sub->add_option("--out", o.out, "Output CSV")->required();
        sub->add_option("--subset", o.subset, "Samples to use: all, train or test (of --trial)")->capture_default_str();
        sub->add_option("--trial", o.trial, "Split index for --subset")->capture_default_str();
    };
    auto embed_inputs = [](const EmbedOptions& o) { return Json{{"manifest", o.manifest}, {"checkpoint", o.checkpoint}}; };
    auto embed_opts = [](const EmbedOptions& o) { return Json{{"subset", o.subset}, {"trial", o.trial}}; };

    {
        auto* sub = app.add_subcommand("embed", "Per-sample embeddings (second-to-last layer)");
        auto flags = std::make_shared<ConfigFlags>(sub);
        flags->seed();
        flags->split();
        flags->eval();
        auto o = std::make_shared<EmbedOptions>();
        add_embed_options(sub, *o);
        commands.push_back({sub, [=] {
            const auto cfg = flags->resolve();
            const auto cohort = load_cohort(o->manifest);
            const auto params = read_checkpoint(o->checkpoint);
            const auto ids = select_ids(cohort, cfg, o->subset, o->trial);
            const auto emb = embed_samples(params, cohort, ids, cfg.n_eval_subsets, trial_seeds(cfg.seed, o->trial).evaluation);
            std::string text = "sample_id";
            for (int j = 0; j < params.config().embed_dim; ++j) {
                text += ",e" + std::to_string(j);
            }
            text += ",label\n";
            for (std::size_t i = 0; i < ids.size(); ++i) {
                text += ids[i];
                for (double v : emb[i]) {
                    text += ',' + csv::format_double(v);
                }
                text += ',' + std::to_string(cohort.at(cohort.index_of(ids[i])).record.outcome) + '\n';
            }
            csv::write_text(o->out, text);
            echo_config(o->out, "embed", embed_inputs(*o), embed_opts(*o), cfg);
        }});
    }

    {
        auto* sub = app.add_subcommand("project", "2-D PCA projection of per-sample embeddings");
        auto flags = std::make_shared<ConfigFlags>(sub);
        flags->seed();
        flags->split();
        flags->eval();
        auto o = std::make_shared<EmbedOptions>();
        add_embed_options(sub, *o);
        commands.push_back({sub, [=] {
            const auto cfg = flags->resolve();
            const auto cohort = load_cohort(o->manifest);
            const auto params = read_checkpoint(o->checkpoint);
            const auto ids = select_ids(cohort, cfg, o->subset, o->trial);
            const auto emb = embed_samples(params, cohort, ids, cfg.n_eval_subsets, trial_seeds(cfg.seed, o->trial).evaluation);
            const auto pca = pca_project(emb);
            std::string text = "sample_id,pc1,pc2,label\n";
            for (std::size_t i = 0; i < ids.size(); ++i) {
                text += ids[i] + ',' + csv::format_double(pca.coords[i][0]) + ',' + csv::format_double(pca.coords[i][1]) + ',' +
                        std::to_string(cohort.at(cohort.index_of(ids[i])).record.outcome) + '\n';
            }
            csv::write_text(o->out, text);
            write_json(sidecar(o->out, ".variance.json"),
                       Json{{"eigenvalues", {pca.eigenvalues[0], pca.eigenvalues[1]}}, {"explained", pca.explained}});
            echo_config(o->out, "project", embed_inputs(*o), embed_opts(*o), cfg);
        }});
    }

    {
        auto* sub = app.add_subcommand("align", "Embedding distances of Same vs Diff covariate pairs");
        auto flags = std::make_shared<ConfigFlags>(sub);
        flags->seed();
        flags->covariate();
        flags->split();
        flags->eval();
        auto o = std::make_shared<EmbedOptions>();
        add_embed_options(sub, *o);
        auto n_pairs = std::make_shared<int>(1000);
        auto same_max = std::make_shared<double>(0);
        auto diff_min = std::make_shared<double>(0);
        auto* gap = sub->add_option("--same-max", *same_max, "Raw-gap mode: pairs with |gap| <= this are Same");
        sub->add_option("--diff-min", *diff_min, "Raw-gap mode: pairs with |gap| >= this are Diff")->needs(gap);
        gap->needs("--diff-min");
        sub->add_option("--n-pairs", *n_pairs, "Random unordered pairs to sample")->capture_default_str();
        commands.push_back({sub, [=] {
            const auto cfg = flags->resolve();
            if (cfg.triplets.covariate.empty()) {
                throw DataError("--covariate is required");
            }
            GapRule rule;
            const bool raw_gap = sub->count("--same-max") > 0;
            // The raw-gap rule reads raw values, so only binarize in binary mode.
            const auto cohort = raw_gap ? load_cohort(o->manifest) : load_prepared(o->manifest, cfg);
            if (raw_gap) {
                rule = GapRule{GapRule::Mode::RawGap, *same_max, *diff_min};
            }
            const auto params = read_checkpoint(o->checkpoint);
            const auto pool = cohort.subset(select_ids(cohort, cfg, o->subset, o->trial));
            const auto res = embedding_alignment(params, pool, cfg.triplets.covariate, rule, *n_pairs, cfg.n_eval_subsets,
                                                 trial_seeds(cfg.seed, o->trial).evaluation);
            std::string text = "id_a,id_b,group,distance\n";
            for (const auto& p : res.pairs) {
                text += p.id_a + ',' + p.id_b + ',' + (p.same ? "same" : "diff") + ',' + csv::format_double(p.distance) + '\n';
            }
            csv::write_text(o->out, text);
            write_json(sidecar(o->out, ".summary.json"), Json{{"n_same", res.same_pair_distances.size()},
                                                              {"n_diff", res.diff_pair_distances.size()},
                                                              {"mean_same", res.mean_same()},
                                                              {"mean_diff", res.mean_diff()}});
            auto opts = embed_opts(*o);
            opts["n_pairs"] = *n_pairs;
            opts["mode"] = raw_gap ? "raw_gap" : "binary";
            if (raw_gap) {
                opts["same_max"] = *same_max;
                opts["diff_min"] = *diff_min;
            }
            echo_config(o->out, "align", embed_inputs(*o), opts, cfg);
        }});
    }

    // sweep
    {
        auto* sub = app.add_subcommand("sweep", "Grid over alpha, H_s and H_d");
        auto flags = std::make_shared<ConfigFlags>(sub);
        flags->seed();
        flags->rff();
        flags->triplets();
        flags->net();
        flags->loss();
        flags->train();
        flags->split();
        flags->eval();
        auto manifest = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto grid = std::make_shared<SweepGrid>();
        auto trials = std::make_shared<int>(10);
        sub->add_option("--manifest", *manifest, "Cohort manifest CSV")->required();
        sub->add_option("--out", *out, "Sweep CSV; a .trials.csv sidecar holds per-trial AUCs")->required();
        sub->add_option("--alphas", grid->alphas, "Alpha values")->delimiter(',')->capture_default_str();
        sub->add_option("--hs-grid", grid->h_s, "H_s values")->delimiter(',')->capture_default_str();
        sub->add_option("--hd-grid", grid->h_d, "H_d values")->delimiter(',')->capture_default_str();
        sub->add_option("--sweep-trials", *trials, "Splits per grid cell")->capture_default_str();
        commands.push_back({sub, [=] {
            const auto cfg = flags->resolve();
            const auto cohort = load_prepared(*manifest, cfg);
            const auto cells = sweep(cohort, cfg, *grid, *trials);
            std::string text = "h_s,h_d,alpha,mean_auc,std_auc,argmax_count\n";
            std::string per_trial = "h_s,h_d,alpha,trial_id,auc\n";
            for (const auto& c : cells) {
                const auto head = std::to_string(c.h_s) + ',' + std::to_string(c.h_d) + ',' + csv::format_double(c.alpha);
                text += head + ',' + csv::format_double(c.mean_auc) + ',' + csv::format_double(c.std_auc) + ',' +
                        std::to_string(c.argmax_count) + '\n';
                for (std::size_t t = 0; t < c.aucs.size(); ++t) {
                    per_trial += head + ',' + std::to_string(t) + ',' + csv::format_double(c.aucs[t]) + '\n';
                }
            }
            csv::write_text(*out, text);
            csv::write_text(sidecar(*out, ".trials.csv"), per_trial);
            echo_config(*out, "sweep", {{"manifest", *manifest}},
                        {{"alphas", grid->alphas}, {"h_s", grid->h_s}, {"h_d", grid->h_d}, {"sweep_trials", *trials}}, cfg);
        }});
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        for (const auto& c : commands) {
            if (c.app->parsed()) {
                c.run();
            }
        }
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return exit_numeric;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_data;
    }
    return 0;
}
