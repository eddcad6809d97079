#ifndef CYTOCOSET_SETNET_HPP
#define CYTOCOSET_SETNET_HPP

#include "common.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

/**
 * @file setnet.hpp
 *
 * @brief Permutation-invariant set encoder with manual reverse-mode gradients.
 *
 * Architecture, for a set `X` of cells (rows) with `n` markers:
 *
 *     H_1 = relu(X W_1 + b_1), ..., H_L = relu(H_{L-1} W_L + b_L)     (per cell)
 *     p   = column-wise max of H_L over cells
 *     e   = relu(p W_h + b_h)                                          (embedding)
 *     z   = e W_o + b_o                                                (logit)
 *
 * The embedding `e` is the second-to-last activation and is what triplet distances
 * and downstream analyses use. Max pooling breaks ties in favour of the lowest cell index.
 */

namespace cytocoset {

struct SetEncoderConfig {
    int input_dim = 0;
    std::vector<int> block_widths{64, 64};
    int embed_dim = 32;
    /// Cells per set instance.
    int set_size = 128;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const SetEncoderConfig&) const = default;
};

/// Weight of a dense layer is `in x out`, row-major; bias has `out` entries.
struct LayerShape {
    int in = 0;
    int out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
};

/**
 * All weights and biases in one contiguous buffer. Layers `0 .. L-1` are the per-cell blocks,
 * layer `L` is the embedding head and layer `L+1` the scalar output. The same type holds gradients.
 */
class ModelParams {
public:
    ModelParams() = default;

    /// Zero-initialized parameters for `cfg`.
    explicit ModelParams(const SetEncoderConfig& cfg);

    const SetEncoderConfig& config() const { return config_; }

    std::size_t num_layers() const { return shapes_.size(); }
    std::size_t num_cell_layers() const { return shapes_.size() - 2; }
    std::size_t head_layer() const { return shapes_.size() - 2; }
    std::size_t output_layer() const { return shapes_.size() - 1; }
    const LayerShape& shape(std::size_t layer) const { return shapes_.at(layer); }

    std::span<double> weight(std::size_t layer);
    std::span<const double> weight(std::size_t layer) const;
    std::span<double> bias(std::size_t layer);
    std::span<const double> bias(std::size_t layer) const;

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }

    void set_zero();
    bool same_shape(const ModelParams& other) const;

    bool operator==(const ModelParams& other) const {
        return config_ == other.config_ && values_ == other.values_;
    }

private:
    SetEncoderConfig config_;
    std::vector<LayerShape> shapes_;
    std::vector<double> values_;
};

using Gradients = ModelParams;

/// Weights uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` from a generator seeded with `cfg.seed`; biases zero.
ModelParams init_params(const SetEncoderConfig& cfg);

/// Everything `backward()` needs from a forward pass.
struct ForwardTrace {
    /// Post-rectifier activations of each per-cell layer, `set_size x width`.
    std::vector<RowMatrix> activations;
    std::vector<double> pooled;
    /// Winning cell per pooled column.
    std::vector<Eigen::Index> argmax;
    std::vector<double> embedding;
    double logit = 0;
};

struct ForwardResult {
    double logit = 0;
    std::vector<double> embedding;
    ForwardTrace trace;

    double probability() const;
};

double logistic(double z);

/**
 * Run the encoder on one set instance. Throws `DataError` if `X` does not have `input_dim`
 * columns and `NumericError` if the logit or embedding is non-finite.
 */
ForwardResult forward(const ModelParams& params, const RowMatrix& X);

/**
 * Accumulate into `grads` the gradient of a loss whose partial derivatives with respect to this
 * instance's logit and embedding are `dlogit` and `dembedding` (empty span means zero).
 */
void backward(const ModelParams& params, const RowMatrix& X, const ForwardTrace& trace, double dlogit,
              std::span<const double> dembedding, Gradients& grads);

/**
 * Checkpoint text format: a version line, a one-line JSON echo of the encoder config,
 * a parameter count line, then one value per line in shortest round-trip form.
 */
void write_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams read_checkpoint(const std::filesystem::path& path);

std::string checkpoint_to_string(const ModelParams& params);
ModelParams checkpoint_from_string(const std::string& text, const std::string& where = "checkpoint");

}

#endif
