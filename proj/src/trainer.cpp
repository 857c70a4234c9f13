#include "reprobe/trainer.hpp"

#include <cmath>
#include <variant>

#include "reprobe/autodiff.hpp"
#include "reprobe/rng.hpp"

namespace reprobe {

namespace {

constexpr std::size_t kPatternFamilies = 8;

double pattern_value(std::size_t family, std::size_t y, std::size_t x,
                     std::size_t h, std::size_t w) {
    const double hi = 0.8, lo = 0.2;
    const double cy = (static_cast<double>(h) - 1.0) / 2.0;
    const double cx = (static_cast<double>(w) - 1.0) / 2.0;
    switch (family) {
        case 0:  // horizontal bars
            return (y / 2) % 2 == 0 ? hi : lo;
        case 1:  // vertical bars
            return (x / 2) % 2 == 0 ? hi : lo;
        case 2: {  // filled disk
            const double dy = static_cast<double>(y) - cy;
            const double dx = static_cast<double>(x) - cx;
            return dy * dy + dx * dx <= (static_cast<double>(h) / 3.0) *
                                            (static_cast<double>(w) / 3.0)
                       ? hi
                       : lo;
        }
        case 3:  // diagonal stripes
            return ((x + y) / 2) % 2 == 0 ? hi : lo;
        case 4:  // checkerboard, phase 0
            return ((x / 2) + (y / 2)) % 2 == 0 ? hi : lo;
        case 5: {  // square outline
            const std::size_t m = std::min(std::min(x, y), std::min(w - 1 - x, h - 1 - y));
            return m >= h / 4 && m <= h / 3 ? hi : lo;
        }
        case 6: {  // plus sign
            const bool on = (x >= w / 2 - w / 8 && x <= w / 2 + w / 8) ||
                            (y >= h / 2 - h / 8 && y <= h / 2 + h / 8);
            return on ? hi : lo;
        }
        default: {  // corner block
            return x < w / 2 && y < h / 2 ? hi : lo;
        }
    }
}

void update_layer(Layer& layer, const LayerGrads& grads, double lr) {
    std::visit(
        [&](auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, DenseLayer>) {
                if (!grads.weights.empty()) l.weights.axpy(-lr, grads.weights);
                if (l.bias && !grads.bias.empty()) l.bias->axpy(-lr, grads.bias);
            } else if constexpr (std::is_same_v<L, Conv2dLayer>) {
                if (!grads.weights.empty()) l.kernels.axpy(-lr, grads.weights);
                if (l.bias && !grads.bias.empty()) l.bias->axpy(-lr, grads.bias);
            } else if constexpr (std::is_same_v<L, ResidualLayer>) {
                for (std::size_t i = 0; i < grads.inner.size() && i < l.inner.size(); ++i)
                    update_layer(l.inner[i], grads.inner[i], lr);
            }
        },
        layer.kind);
}

}  // namespace

Dataset make_noise_dataset(std::size_t count, std::size_t classes, double mu,
                           double sigma, const std::vector<std::size_t>& shape,
                           std::uint64_t seed, Precision prec) {
    if (classes == 0 || count < classes)
        throw std::invalid_argument("make_noise_dataset: count must be >= classes >= 1");
    SeededRng rng = SeededRng(seed).split(rng_stream::kDataset);
    Dataset ds;
    ds.num_classes = classes;
    for (std::size_t i = 0; i < count; ++i) {
        ds.inputs.push_back(gaussian_draw(rng, shape, mu, sigma, prec));
        const double u = rng.next_uniform();
        int label = static_cast<int>(u * static_cast<double>(classes));
        if (label >= static_cast<int>(classes)) label = static_cast<int>(classes) - 1;
        ds.labels.push_back(label);
    }
    return ds;
}

std::size_t structured_pattern_family_count() { return kPatternFamilies; }

Dataset make_structured_dataset(std::size_t count, std::size_t classes,
                                const std::vector<std::size_t>& shape, std::uint64_t seed,
                                bool stratified, Precision prec) {
    if (shape.size() != 3)
        throw std::invalid_argument("make_structured_dataset: shape must be [C,H,W]");
    if (classes == 0 || classes > kPatternFamilies)
        throw std::invalid_argument("make_structured_dataset: only " +
                                    std::to_string(kPatternFamilies) +
                                    " pattern families are implemented");
    if (count < classes)
        throw std::invalid_argument("make_structured_dataset: count must be >= classes");
    SeededRng rng = SeededRng(seed).split(rng_stream::kDataset);
    const std::size_t channels = shape[0], h = shape[1], w = shape[2];
    Dataset ds;
    ds.num_classes = classes;
    for (std::size_t i = 0; i < count; ++i) {
        int label;
        if (stratified) {
            label = static_cast<int>(i % classes);
        } else {
            const double u = rng.next_uniform();
            label = static_cast<int>(u * static_cast<double>(classes));
            if (label >= static_cast<int>(classes)) label = static_cast<int>(classes) - 1;
        }
        Tensor img(shape, prec);
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    double v = pattern_value(static_cast<std::size_t>(label), y, x, h, w) +
                               0.05 * rng.next_gaussian();
                    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                    img.set((c * h + y) * w + x, v);
                }
        ds.inputs.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    return ds;
}

double evaluate_accuracy(const Model& model, const Dataset& dataset) {
    std::size_t correct = 0;
    const std::size_t last = model.layer_count();
    for (std::size_t i = 0; i < dataset.inputs.size(); ++i) {
        const Tensor logits = forward_to_layer(model, dataset.inputs[i], last);
        std::size_t best = 0;
        for (std::size_t k = 1; k < logits.size(); ++k)
            if (logits.at(k) > logits.at(best)) best = k;
        if (static_cast<int>(best) == dataset.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.inputs.size());
}

TrainResult train(const Model& model, const Dataset& dataset, std::size_t epochs,
                  double lr, std::size_t batch, std::uint64_t seed) {
    if (dataset.inputs.empty() || dataset.inputs.size() != dataset.labels.size())
        throw std::invalid_argument("train: dataset inputs and labels must align");
    if (batch == 0) throw std::invalid_argument("train: batch size must be positive");
    if (shape_elems(model.layer_shape(model.layer_count())) != dataset.num_classes)
        throw std::invalid_argument("train: model output width must equal num_classes");

    std::vector<Layer> layers = model.layers();
    SeededRng shuffle_rng = SeededRng(seed).split(rng_stream::kShuffle);
    const std::size_t n = dataset.inputs.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    TrainResult result{model, {}};
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        // Fisher-Yates with the seeded stream
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng.next_u64() % (i + 1));
            std::swap(order[i], order[j]);
        }
        double loss_sum = 0.0;
        for (std::size_t start = 0, batch_idx = 0; start < n; start += batch, ++batch_idx) {
            const std::size_t stop = std::min(start + batch, n);
            std::vector<Tensor> inputs;
            std::vector<int> labels;
            for (std::size_t i = start; i < stop; ++i) {
                inputs.push_back(dataset.inputs[order[i]]);
                labels.push_back(dataset.labels[order[i]]);
            }
            const Model working(model.input_shape(), layers, model.precision(),
                                model.init_seed(), model.group_ends());
            const ParamGradients grads = param_gradients(working, inputs, labels);
            if (!std::isfinite(grads.mean_loss))
                throw TrainingDivergedError(
                    epoch, batch_idx,
                    "training loss became non-finite at epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(batch_idx));
            loss_sum += grads.mean_loss * static_cast<double>(stop - start);
            if (lr != 0.0) {
                for (std::size_t k = 0; k < layers.size(); ++k)
                    update_layer(layers[k], grads.layers[k], lr);
            }
        }
        const Model snapshot(model.input_shape(), layers, model.precision(),
                             model.init_seed(), model.group_ends());
        result.history.push_back({epoch, loss_sum / static_cast<double>(n),
                                  evaluate_accuracy(snapshot, dataset)});
    }
    result.model = Model(model.input_shape(), std::move(layers), model.precision(),
                         model.init_seed(), model.group_ends());
    return result;
}

}  // namespace reprobe
