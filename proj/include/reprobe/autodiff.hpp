#pragma once

#include <vector>

#include "reprobe/layers.hpp"
#include "reprobe/tensor.hpp"

namespace reprobe {

// Gradient tensors aligned with a model's layer list; tensors are empty
// for layers without parameters.
struct LayerGrads {
    Tensor weights;
    Tensor bias;
    std::vector<LayerGrads> inner;
};

struct InputGradientEval {
    Tensor gradient;    // same shape as the probed input
    Tensor output;      // O_l(a_n)
    double l1_value;    // sum_i |O_l(a_n)_i - y_hat_i|
};

// Gradient of sum_i |O_l(a_n)_i - y_hat_i| with respect to a_n, with the
// subgradient convention sign(0) = 0. Layers past l are never evaluated.
Tensor input_gradient(const Model& model, std::size_t l, const Tensor& a_n,
                      const Tensor& y_hat);

// Same, also exposing the forward value so callers do not pay for a second
// forward pass per iteration.
InputGradientEval input_gradient_eval(const Model& model, std::size_t l,
                                      const Tensor& a_n, const Tensor& y_hat);

struct ParamGradients {
    std::vector<LayerGrads> layers;
    double mean_loss = 0.0;
};

// Gradients of mean softmax cross-entropy over the batch with respect to
// every weight and bias. The model must end in a Dense layer emitting one
// logit per class.
ParamGradients param_gradients(const Model& model,
                               const std::vector<Tensor>& batch_inputs,
                               const std::vector<int>& batch_labels);

// Per-example softmax cross-entropy loss of a logit vector.
double cross_entropy(const Tensor& logits, int label);

}  // namespace reprobe
