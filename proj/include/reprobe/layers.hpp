#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "reprobe/tensor.hpp"

namespace reprobe {

struct Layer;

struct DenseLayer {
    Tensor weights;                // [out, in]
    std::optional<Tensor> bias;    // [out]
};

struct Conv2dLayer {
    Tensor kernels;                // [outC, inC, kH, kW]
    std::optional<Tensor> bias;    // [outC]
    std::size_t stride = 1;
    std::size_t padding = 0;       // symmetric zero padding
};

struct MaxPoolLayer {
    std::size_t window = 2;
    std::size_t stride = 2;
};

struct AvgPoolLayer {
    std::size_t window = 2;
    std::size_t stride = 2;
};

struct ReluLayer {};

struct FlattenLayer {};

// Element-wise add of the block input and the inner stack's output; the
// inner stack must preserve shape.
struct ResidualLayer {
    std::vector<Layer> inner;
};

struct Layer {
    std::variant<DenseLayer, Conv2dLayer, MaxPoolLayer, AvgPoolLayer,
                 ReluLayer, FlattenLayer, ResidualLayer> kind;
};

// Immutable layer stack. Layer index l addresses the output of layer l,
// with l = 0 meaning the input itself; shapes are validated once at
// construction.
class Model {
public:
    Model(std::vector<std::size_t> input_shape, std::vector<Layer> layers,
          Precision prec, std::uint64_t init_seed = 0,
          std::vector<std::size_t> group_ends = {});

    const std::vector<Layer>& layers() const { return layers_; }
    std::size_t layer_count() const { return layers_.size(); }
    const std::vector<std::size_t>& input_shape() const { return input_shape_; }
    Precision precision() const { return prec_; }
    std::uint64_t init_seed() const { return init_seed_; }

    // Output shape of layer l (l in [0, layer_count]).
    const std::vector<std::size_t>& layer_shape(std::size_t l) const;

    // True when some layer has fewer elements than its predecessor, which
    // rules out unique recovery of the input from that layer on.
    bool shrinks_information() const { return shrinks_information_; }

    // Block-boundary layer indices for convnets (empty for plain stacks).
    const std::vector<std::size_t>& group_ends() const { return group_ends_; }

private:
    std::vector<std::size_t> input_shape_;
    std::vector<Layer> layers_;
    Precision prec_;
    std::uint64_t init_seed_;
    std::vector<std::size_t> group_ends_;
    std::vector<std::vector<std::size_t>> shapes_;  // index 0 = input
    bool shrinks_information_ = false;
};

// Shape of a layer's output given its input shape; throws on mismatch.
std::vector<std::size_t> layer_output_shape(const Layer& layer,
                                            const std::vector<std::size_t>& in_shape);

// Dense stack with the given hidden widths. Weights are Kaiming-uniform,
// U(-b, b) with b = sqrt(6 / fan_in); biases start at zero. With use_relu,
// a ReLU follows every Dense layer except the last.
Model build_mlp(std::size_t input_elems, const std::vector<std::size_t>& hidden_widths,
                bool use_bias, bool use_relu, SeededRng& rng,
                Precision prec = Precision::f32);

// Stack of [Conv2d(stride 2, 3x3, pad 1) -> ReLU -> optional residual
// block] groups. channels[i] is the output channel count of group i.
Model build_small_convnet(const std::vector<std::size_t>& input_shape,
                          std::size_t blocks, const std::vector<std::size_t>& channels,
                          bool with_residual, SeededRng& rng,
                          Precision prec = Precision::f32);

// Embedding at layer l: runs layers 1..l on input a.
Tensor forward_to_layer(const Model& model, const Tensor& a, std::size_t l);

// Runs layers from+1..to on a stored embedding (shape of layer `from`).
Tensor forward_between_layers(const Model& model, const Tensor& embedding,
                              std::size_t from, std::size_t to);

std::size_t count_layer_elements(const Model& model, std::size_t l);

// Kernels of the first Conv2d (or the weight matrix of the first Dense)
// layer; used to dump learned first-layer filters.
Tensor first_layer_filters(const Model& model);

// Inputs of every ReLU layer (outer-to-inner traversal order) for one
// forward pass; empty when the model has no ReLU.
std::vector<Tensor> relu_preactivations(const Model& model, const Tensor& a);

// Copy of the model with every parameter tensor cast to the target width.
Model precision_cast_model(const Model& model, Precision target);

}  // namespace reprobe
