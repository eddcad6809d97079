#include "cytocoset/csv.hpp"
#include "cytocoset/setnet.hpp"

#include <json.hpp>

#include <sstream>

namespace cytocoset {

namespace {

constexpr const char* magic = "cytocoset-checkpoint";
constexpr int format_version = 1;

nlohmann::ordered_json config_echo(const SetEncoderConfig& cfg) {
    nlohmann::ordered_json j;
    j["input_dim"] = cfg.input_dim;
    j["block_widths"] = cfg.block_widths;
    j["embed_dim"] = cfg.embed_dim;
    j["set_size"] = cfg.set_size;
    j["seed"] = cfg.seed;
    return j;
}

}

std::string checkpoint_to_string(const ModelParams& params) {
    std::string text = std::string(magic) + " " + std::to_string(format_version) + "\n";
    text += config_echo(params.config()).dump() + "\n";
    text += "params " + std::to_string(params.size()) + "\n";
    for (double v : params.values()) {
        text += csv::format_double(v);
        text += '\n';
    }
    return text;
}

ModelParams checkpoint_from_string(const std::string& text, const std::string& where) {
    std::istringstream in(text);
    std::string line;

    if (!std::getline(in, line)) {
        throw DataError(where + ": empty checkpoint");
    }
    std::istringstream head(line);
    std::string tag;
    int version = 0;
    if (!(head >> tag >> version) || tag != magic) {
        throw DataError(where + ": not a cytocoset checkpoint");
    }
    if (version != format_version) {
        throw DataError(where + ": unsupported checkpoint version " + std::to_string(version));
    }

    if (!std::getline(in, line)) {
        throw DataError(where + ": missing config line");
    }
    SetEncoderConfig cfg;
    try {
        auto j = nlohmann::json::parse(line);
        cfg.input_dim = j.at("input_dim").get<int>();
        cfg.block_widths = j.at("block_widths").get<std::vector<int>>();
        cfg.embed_dim = j.at("embed_dim").get<int>();
        cfg.set_size = j.at("set_size").get<int>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(where + ": malformed config line: " + e.what());
    }
    ModelParams params(cfg);

    if (!std::getline(in, line)) {
        throw DataError(where + ": missing parameter count");
    }
    std::istringstream count_line(line);
    std::string word;
    std::size_t count = 0;
    if (!(count_line >> word >> count) || word != "params" || count != params.size()) {
        throw DataError(where + ": parameter count does not match the config");
    }
    auto values = params.values();
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line) || !csv::parse_double(line, values[i])) {
            throw DataError(where + ": bad parameter value at index " + std::to_string(i));
        }
    }
    return params;
}

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
    csv::write_text(path, checkpoint_to_string(params));
}

ModelParams read_checkpoint(const std::filesystem::path& path) {
    auto lines = csv::read_lines(path);
    std::string text;
    for (const auto& l : lines) {
        text += l;
        text += '\n';
    }
    return checkpoint_from_string(text, "'" + path.string() + "'");
}

}
