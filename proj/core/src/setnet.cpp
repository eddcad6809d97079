#include "cytocoset/setnet.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace cytocoset {

void SetEncoderConfig::validate() const {
    if (input_dim < 1) {
        throw DataError("encoder input_dim must be >= 1");
    }
    if (block_widths.empty()) {
        throw DataError("encoder needs at least one per-cell block");
    }
    for (int w : block_widths) {
        if (w < 1) {
            throw DataError("encoder block widths must be >= 1");
        }
    }
    if (embed_dim < 1) {
        throw DataError("encoder embed_dim must be >= 1");
    }
    if (set_size < 1) {
        throw DataError("encoder set_size must be >= 1");
    }
}

ModelParams::ModelParams(const SetEncoderConfig& cfg) : config_(cfg) {
    cfg.validate();
    std::vector<int> dims{cfg.input_dim};
    dims.insert(dims.end(), cfg.block_widths.begin(), cfg.block_widths.end());
    dims.push_back(cfg.embed_dim);
    dims.push_back(1);

    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        LayerShape s;
        s.in = dims[l];
        s.out = dims[l + 1];
        s.weight_offset = offset;
        offset += static_cast<std::size_t>(s.in) * s.out;
        s.bias_offset = offset;
        offset += s.out;
        shapes_.push_back(s);
    }
    values_.assign(offset, 0.0);
}

std::span<double> ModelParams::weight(std::size_t layer) {
    const auto& s = shapes_.at(layer);
    return std::span<double>(values_).subspan(s.weight_offset, static_cast<std::size_t>(s.in) * s.out);
}

std::span<const double> ModelParams::weight(std::size_t layer) const {
    const auto& s = shapes_.at(layer);
    return std::span<const double>(values_).subspan(s.weight_offset, static_cast<std::size_t>(s.in) * s.out);
}

std::span<double> ModelParams::bias(std::size_t layer) {
    const auto& s = shapes_.at(layer);
    return std::span<double>(values_).subspan(s.bias_offset, s.out);
}

std::span<const double> ModelParams::bias(std::size_t layer) const {
    const auto& s = shapes_.at(layer);
    return std::span<const double>(values_).subspan(s.bias_offset, s.out);
}

void ModelParams::set_zero() {
    std::fill(values_.begin(), values_.end(), 0.0);
}

bool ModelParams::same_shape(const ModelParams& other) const {
    if (shapes_.size() != other.shapes_.size() || values_.size() != other.values_.size()) {
        return false;
    }
    for (std::size_t l = 0; l < shapes_.size(); ++l) {
        if (shapes_[l].in != other.shapes_[l].in || shapes_[l].out != other.shapes_[l].out) {
            return false;
        }
    }
    return true;
}

ModelParams init_params(const SetEncoderConfig& cfg) {
    ModelParams params(cfg);
    std::mt19937_64 rng(cfg.seed);
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(params.shape(l).in));
        std::uniform_real_distribution<double> unif(-bound, bound);
        for (double& w : params.weight(l)) {
            w = unif(rng);
        }
    }
    return params;
}

double logistic(double z) {
    if (z >= 0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double ez = std::exp(z);
    return ez / (1.0 + ez);
}

double ForwardResult::probability() const {
    return logistic(logit);
}

namespace {

// out = relu(in W + b), one row at a time so each row's arithmetic is independent of its position.
void dense_relu_rows(const RowMatrix& in, std::span<const double> W, std::span<const double> b, RowMatrix& out) {
    const auto rows = in.rows();
    const auto n_in = in.cols();
    const auto n_out = static_cast<Eigen::Index>(b.size());
    out.resize(rows, n_out);
    for (Eigen::Index r = 0; r < rows; ++r) {
        double* o = out.data() + r * n_out;
        std::copy(b.begin(), b.end(), o);
        const double* x = in.data() + r * n_in;
        for (Eigen::Index i = 0; i < n_in; ++i) {
            const double xi = x[i];
            if (xi == 0.0) {
                continue;
            }
            const double* w = W.data() + i * n_out;
            for (Eigen::Index j = 0; j < n_out; ++j) {
                o[j] += xi * w[j];
            }
        }
        for (Eigen::Index j = 0; j < n_out; ++j) {
            o[j] = o[j] > 0.0 ? o[j] : 0.0;
        }
    }
}

}

ForwardResult forward(const ModelParams& params, const RowMatrix& X) {
    const auto& cfg = params.config();
    if (X.cols() != cfg.input_dim) {
        throw DataError("set instance has " + std::to_string(X.cols()) + " markers, encoder expects " +
                        std::to_string(cfg.input_dim));
    }
    if (X.rows() < 1) {
        throw DataError("set instance has no cells");
    }

    ForwardResult result;
    auto& trace = result.trace;
    const auto L = params.num_cell_layers();
    trace.activations.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        const RowMatrix& in = l == 0 ? X : trace.activations[l - 1];
        dense_relu_rows(in, params.weight(l), params.bias(l), trace.activations[l]);
    }

    const RowMatrix& top = trace.activations.back();
    const auto width = top.cols();
    trace.pooled.assign(width, 0.0);
    trace.argmax.assign(width, 0);
    for (Eigen::Index j = 0; j < width; ++j) {
        double best = top(0, j);
        Eigen::Index arg = 0;
        for (Eigen::Index r = 1; r < top.rows(); ++r) {
            if (top(r, j) > best) {
                best = top(r, j);
                arg = r;
            }
        }
        trace.pooled[j] = best;
        trace.argmax[j] = arg;
    }

    const auto head = params.head_layer();
    const auto Wh = params.weight(head);
    const auto bh = params.bias(head);
    const auto E = static_cast<std::size_t>(params.shape(head).out);
    trace.embedding.assign(bh.begin(), bh.end());
    for (Eigen::Index i = 0; i < width; ++i) {
        const double pi = trace.pooled[i];
        for (std::size_t j = 0; j < E; ++j) {
            trace.embedding[j] += pi * Wh[i * E + j];
        }
    }
    for (auto& v : trace.embedding) {
        v = v > 0.0 ? v : 0.0;
    }

    const auto outl = params.output_layer();
    const auto Wo = params.weight(outl);
    double z = params.bias(outl)[0];
    for (std::size_t j = 0; j < E; ++j) {
        z += trace.embedding[j] * Wo[j];
    }
    trace.logit = z;
    if (!std::isfinite(z)) {
        throw NumericError("non-finite logit in encoder forward pass");
    }

    result.logit = z;
    result.embedding = trace.embedding;
    return result;
}

void backward(const ModelParams& params, const RowMatrix& X, const ForwardTrace& trace, double dlogit,
              std::span<const double> dembedding, Gradients& grads) {
    if (!params.same_shape(grads)) {
        throw DataError("gradient buffer does not match parameter shapes");
    }
    const auto L = params.num_cell_layers();
    if (trace.activations.size() != L || trace.activations.back().rows() != X.rows() ||
        trace.embedding.size() != static_cast<std::size_t>(params.config().embed_dim)) {
        throw DataError("forward trace does not match parameter shapes");
    }
    const auto E = trace.embedding.size();
    if (!dembedding.empty() && dembedding.size() != E) {
        throw DataError("embedding gradient has the wrong length");
    }

    // Output layer.
    const auto outl = params.output_layer();
    const auto Wo = params.weight(outl);
    auto gWo = grads.weight(outl);
    grads.bias(outl)[0] += dlogit;
    std::vector<double> de(E);
    for (std::size_t j = 0; j < E; ++j) {
        gWo[j] += trace.embedding[j] * dlogit;
        double g = Wo[j] * dlogit;
        if (!dembedding.empty()) {
            g += dembedding[j];
        }
        de[j] = trace.embedding[j] > 0.0 ? g : 0.0;
    }

    // Embedding head.
    const auto head = params.head_layer();
    const auto Wh = params.weight(head);
    auto gWh = grads.weight(head);
    auto gbh = grads.bias(head);
    const auto width = trace.pooled.size();
    std::vector<double> dp(width, 0.0);
    for (std::size_t j = 0; j < E; ++j) {
        gbh[j] += de[j];
    }
    for (std::size_t i = 0; i < width; ++i) {
        const double pi = trace.pooled[i];
        double acc = 0;
        for (std::size_t j = 0; j < E; ++j) {
            gWh[i * E + j] += pi * de[j];
            acc += Wh[i * E + j] * de[j];
        }
        dp[i] = acc;
    }

    // Max pool: only winning cells receive gradient, so carry just those rows downward.
    std::vector<Eigen::Index> rows(trace.argmax.begin(), trace.argmax.end());
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    auto local_of = [&rows](Eigen::Index r) {
        return static_cast<Eigen::Index>(std::lower_bound(rows.begin(), rows.end(), r) - rows.begin());
    };
    const auto active = static_cast<Eigen::Index>(rows.size());

    RowMatrix dH = RowMatrix::Zero(active, static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < width; ++i) {
        dH(local_of(trace.argmax[i]), static_cast<Eigen::Index>(i)) += dp[i];
    }

    for (std::size_t l = L; l-- > 0;) {
        const RowMatrix& act = trace.activations[l];
        const RowMatrix& in = l == 0 ? X : trace.activations[l - 1];
        const auto n_in = in.cols();
        const auto n_out = act.cols();
        const auto W = params.weight(l);
        auto gW = grads.weight(l);
        auto gb = grads.bias(l);

        for (Eigen::Index a = 0; a < active; ++a) {
            const auto r = rows[a];
            for (Eigen::Index j = 0; j < n_out; ++j) {
                if (act(r, j) <= 0.0) {
                    dH(a, j) = 0.0;
                }
            }
        }

        RowMatrix dIn;
        if (l > 0) {
            dIn = RowMatrix::Zero(active, n_in);
        }
        for (Eigen::Index a = 0; a < active; ++a) {
            const auto r = rows[a];
            const double* g = dH.data() + a * n_out;
            for (Eigen::Index j = 0; j < n_out; ++j) {
                gb[j] += g[j];
            }
            for (Eigen::Index i = 0; i < n_in; ++i) {
                const double xi = in(r, i);
                double* gw = gW.data() + i * n_out;
                const double* w = W.data() + i * n_out;
                double acc = 0;
                for (Eigen::Index j = 0; j < n_out; ++j) {
                    gw[j] += xi * g[j];
                    acc += w[j] * g[j];
                }
                if (l > 0) {
                    dIn(a, i) = acc;
                }
            }
        }
        if (l > 0) {
            dH = std::move(dIn);
        }
    }
}

}
