#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/matrix.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class Activation { relu, identity };

struct LayerSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    Activation activation = Activation::relu;
};

// Placement of one layer's weights and biases inside the flat value vector.
struct LayerShape {
    LayerSpec spec;
    std::size_t weight_count = 0;  // input_dim * output_dim
    std::size_t bias_count = 0;    // output_dim
    std::size_t offset = 0;        // prefix sum over earlier layers
};

// Flat float32 weight vector plus the shape table that slices it.
// The unit of model exchange between clients and the server.
struct ParamVector {
    std::vector<float> values;
    std::vector<LayerShape> shapes;

    std::size_t size() const { return values.size(); }
    std::size_t num_layers() const { return shapes.size(); }

    std::span<float> layer_slice(std::size_t layer);
    std::span<const float> layer_slice(std::size_t layer) const;

    bool same_shape(const ParamVector& other) const;
};

// Validates dim chaining and builds the offset table.
std::vector<LayerShape> build_shapes(const std::vector<LayerSpec>& arch);

// All-zero parameters for the architecture.
ParamVector zero_params(const std::vector<LayerSpec>& arch);

// Per-layer uniform init in [-s, s] with s = sqrt(6 / (fan_in + fan_out));
// biases start at zero.
ParamVector init_params(const std::vector<LayerSpec>& arch, Rng& rng);

// Model size in bytes as exchanged on the wire: 4 bytes per parameter.
inline std::uint64_t model_bytes(const ParamVector& p) {
    return static_cast<std::uint64_t>(p.size()) * 4u;
}

struct Batch {
    MatF features;                 // batch_size x input_dim
    std::vector<std::int32_t> labels;

    std::size_t size() const { return labels.size(); }
};

Batch gather_batch(const DatasetView& view, std::span<const std::int32_t> positions);

// Dense forward pass; math in double, logits returned in double.
MatD forward(const ParamVector& params, const Batch& batch);

struct LossGrad {
    double loss = 0.0;   // mean softmax cross-entropy
    ParamVector grad;    // same shape table as the input params
};

LossGrad loss_and_grad(const ParamVector& params, const Batch& batch);

// Loss without the backward pass; the score source.
double batch_loss(const ParamVector& params, const Batch& batch);

// E epochs of minibatch SGD over the view. The view is reshuffled once per
// epoch from rng; a short final batch is kept. Returns the updated params,
// leaving the input untouched. lr may be 0 (no-op pass); negative lr is an error.
ParamVector train_epochs(const ParamVector& params, const DatasetView& shard,
                         std::size_t epochs, double lr, std::size_t batch_size, Rng& rng);

struct EvalResult {
    double accuracy = 0.0;  // argmax, ties broken toward the lowest class index
    double loss = 0.0;
};

EvalResult evaluate(const ParamVector& params, const DatasetView& dataset);

// Mean loss over a view; evaluate() without the accuracy column.
double view_loss(const ParamVector& params, const DatasetView& dataset);

} // namespace fedsim
