#include "run_config.hpp"

#include "cytocoset/csv.hpp"

#include <set>

namespace cytocoset::cli {

std::string binarize_to_string(const std::optional<BinarizeRule>& rule) {
    if (!rule) {
        return "";
    }
    if (rule->kind == BinarizeRule::Kind::Median) {
        return "median";
    }
    return "threshold:" + csv::format_double(rule->threshold);
}

Json config_to_json(const ExperimentConfig& cfg) {
    Json j;
    j["seed"] = cfg.seed;
    j["n_trials"] = cfg.n_trials;
    j["test_fraction"] = cfg.test_fraction;
    j["n_eval_subsets"] = cfg.n_eval_subsets;
    j["rff"] = {{"d", cfg.rff.d}, {"gamma", cfg.rff.gamma}, {"pooling", to_string(cfg.rff.pooling)}};
    j["triplets"] = {{"covariate", cfg.triplets.covariate},
                     {"h_s", cfg.triplets.h_s},
                     {"h_d", cfg.triplets.h_d},
                     {"max_per_reference", cfg.triplets.max_per_reference}};
    j["binarize"] = cfg.binarize ? Json(binarize_to_string(cfg.binarize)) : Json(nullptr);
    j["net"] = {{"block_widths", cfg.net.block_widths}, {"embed_dim", cfg.net.embed_dim}, {"set_size", cfg.net.set_size}};
    j["loss"] = {{"alpha", cfg.loss.alpha}, {"margin", cfg.loss.margin}};
    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"batch_size", cfg.train.batch_size},
                  {"epochs", cfg.train.epochs},
                  {"steps_per_epoch", cfg.train.steps_per_epoch}};
    return j;
}

namespace {

void check_keys(const Json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) {
        throw DataError("config: '" + where + "' must be an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw DataError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
        }
    }
}

template <typename T>
void take(const Json& j, const char* key, T& out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

}

void merge_config(const Json& j, ExperimentConfig& cfg) {
    try {
        check_keys(j, "", {"seed", "n_trials", "test_fraction", "n_eval_subsets", "rff", "triplets", "binarize", "net",
                           "loss", "train", "command", "inputs", "options"});
        take(j, "seed", cfg.seed);
        take(j, "n_trials", cfg.n_trials);
        take(j, "test_fraction", cfg.test_fraction);
        take(j, "n_eval_subsets", cfg.n_eval_subsets);
        if (j.contains("rff")) {
            const auto& r = j.at("rff");
            check_keys(r, "rff", {"d", "gamma", "pooling"});
            take(r, "d", cfg.rff.d);
            take(r, "gamma", cfg.rff.gamma);
            if (r.contains("pooling")) {
                cfg.rff.pooling = parse_pooling(r.at("pooling").get<std::string>());
            }
        }
        if (j.contains("triplets")) {
            const auto& t = j.at("triplets");
            check_keys(t, "triplets", {"covariate", "h_s", "h_d", "max_per_reference"});
            take(t, "covariate", cfg.triplets.covariate);
            take(t, "h_s", cfg.triplets.h_s);
            take(t, "h_d", cfg.triplets.h_d);
            take(t, "max_per_reference", cfg.triplets.max_per_reference);
        }
        if (j.contains("binarize")) {
            const auto& b = j.at("binarize");
            if (b.is_null() || (b.is_string() && b.get<std::string>().empty())) {
                cfg.binarize.reset();
            } else {
                cfg.binarize = BinarizeRule::parse(b.get<std::string>());
            }
        }
        if (j.contains("net")) {
            const auto& n = j.at("net");
            check_keys(n, "net", {"block_widths", "embed_dim", "set_size"});
            take(n, "block_widths", cfg.net.block_widths);
            take(n, "embed_dim", cfg.net.embed_dim);
            take(n, "set_size", cfg.net.set_size);
        }
        if (j.contains("loss")) {
            const auto& l = j.at("loss");
            check_keys(l, "loss", {"alpha", "margin"});
            take(l, "alpha", cfg.loss.alpha);
            take(l, "margin", cfg.loss.margin);
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            check_keys(t, "train", {"learning_rate", "batch_size", "epochs", "steps_per_epoch"});
            take(t, "learning_rate", cfg.train.learning_rate);
            take(t, "batch_size", cfg.train.batch_size);
            take(t, "epochs", cfg.train.epochs);
            take(t, "steps_per_epoch", cfg.train.steps_per_epoch);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    for (const auto& line : csv::read_lines(path)) {
        text += line;
        text += '\n';
    }
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("config '" + path.string() + "': " + e.what());
    }
    ExperimentConfig cfg;
    merge_config(j, cfg);
    return cfg;
}

}
