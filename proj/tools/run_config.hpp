#ifndef CYTOCOSET_TOOLS_RUN_CONFIG_HPP
#define CYTOCOSET_TOOLS_RUN_CONFIG_HPP

#include "cytocoset/experiment.hpp"

#include <json.hpp>

#include <filesystem>

namespace cytocoset::cli {

using Json = nlohmann::ordered_json;

/**
 * JSON form of an experiment configuration:
 *
 *     {"seed": 0, "n_trials": 30, "test_fraction": 0.25, "n_eval_subsets": 10,
 *      "rff": {"d", "gamma", "pooling"},
 *      "triplets": {"covariate", "h_s", "h_d", "max_per_reference"},
 *      "binarize": "median" | "threshold:<v>" | null,
 *      "net": {"block_widths", "embed_dim", "set_size"},
 *      "loss": {"alpha", "margin"},
 *      "train": {"learning_rate", "batch_size", "epochs", "steps_per_epoch"}}
 *
 * Every key is optional. A resolved-config echo is also accepted: its "command", "inputs"
 * and "options" members are ignored.
 */
Json config_to_json(const ExperimentConfig& cfg);

/// Overlay the keys present in `j` onto `cfg`. Unknown keys and wrong types raise `DataError`.
void merge_config(const Json& j, ExperimentConfig& cfg);

ExperimentConfig load_config(const std::filesystem::path& path);

std::string binarize_to_string(const std::optional<BinarizeRule>& rule);

}

#endif
