#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "reprobe/layers.hpp"
#include "reprobe/tensor.hpp"

namespace reprobe {

struct Dataset {
    std::vector<Tensor> inputs;
    std::vector<int> labels;
    std::size_t num_classes = 0;
};

// count i.i.d. Gaussian images with uniformly random labels.
Dataset make_noise_dataset(std::size_t count, std::size_t classes, double mu,
                           double sigma, const std::vector<std::size_t>& shape,
                           std::uint64_t seed, Precision prec = Precision::f32);

// Deterministic class-distinct geometric patterns (bars, disk, stripes,
// checker phases, outline, cross) plus small pixel noise, clamped to [0,1].
// classes may not exceed the number of pattern families.
Dataset make_structured_dataset(std::size_t count, std::size_t classes,
                                const std::vector<std::size_t>& shape, std::uint64_t seed,
                                bool stratified = false, Precision prec = Precision::f32);

std::size_t structured_pattern_family_count();

struct EpochStats {
    std::size_t epoch;
    double loss;      // mean per-example cross-entropy over the epoch
    double accuracy;  // full-dataset accuracy after the epoch
};

class TrainingDivergedError : public std::runtime_error {
public:
    TrainingDivergedError(std::size_t epoch, std::size_t batch, const std::string& what)
        : std::runtime_error(what), epoch_(epoch), batch_(batch) {}
    std::size_t epoch() const { return epoch_; }
    std::size_t batch() const { return batch_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
};

struct TrainResult {
    Model model;
    std::vector<EpochStats> history;
};

// Plain SGD on mean cross-entropy; batches are processed sequentially and
// the per-epoch shuffle is seeded, so training is bit-deterministic. The
// input model is left untouched.
TrainResult train(const Model& model, const Dataset& dataset, std::size_t epochs,
                  double lr, std::size_t batch, std::uint64_t seed);

double evaluate_accuracy(const Model& model, const Dataset& dataset);

}  // namespace reprobe
