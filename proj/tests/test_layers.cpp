#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "reprobe/layers.hpp"

using namespace reprobe;

namespace {

Model identity_dense_model(std::size_t n, Precision prec = Precision::f64) {
    DenseLayer dense;
    dense.weights = Tensor::zeros({n, n}, prec);
    for (std::size_t i = 0; i < n; ++i) dense.weights.set(i * n + i, 1.0);
    dense.bias = Tensor::zeros({n}, prec);
    std::vector<Layer> layers;
    layers.push_back(Layer{std::move(dense)});
    return Model({n}, std::move(layers), prec);
}

}  // namespace

TEST_CASE("build_mlp shapes at the width-threshold scale") {
    SeededRng rng(1);
    Model m = build_mlp(2523, {2523, 2523, 2523}, true, false, rng, Precision::f32);
    CHECK(m.layer_count() == 3);
    CHECK(count_layer_elements(m, 0) == 2523);
    for (std::size_t l = 1; l <= 3; ++l) CHECK(count_layer_elements(m, l) == 2523);
    CHECK_FALSE(m.shrinks_information());
}

TEST_CASE("identity dense model computes identity") {
    Model m = identity_dense_model(4);
    Tensor a = Tensor::from_values({4}, {0.5, -1.0, 2.0, 0.0});
    Tensor out = forward_to_layer(m, a, 1);
    for (std::size_t i = 0; i < 4; ++i) CHECK(out.at(i) == a.at(i));
}

TEST_CASE("undercomplete mlp is flagged as information-shrinking") {
    SeededRng rng(2);
    Model m = build_mlp(192, {96}, true, false, rng);
    CHECK(m.layer_count() == 1);
    CHECK(count_layer_elements(m, 1) == 96);
    CHECK(m.shrinks_information());
}

TEST_CASE("shrink flag matches an exhaustive element-count scan") {
    SeededRng rng(3);
    const std::vector<std::vector<std::size_t>> width_sets = {
        {64, 64, 64}, {32, 64, 128}, {64, 32, 64}, {128, 64}, {16}};
    for (const auto& widths : width_sets) {
        Model m = build_mlp(64, widths, true, true, rng);
        bool scan = false;
        for (std::size_t l = 1; l <= m.layer_count(); ++l)
            if (count_layer_elements(m, l) < count_layer_elements(m, l - 1)) scan = true;
        CHECK(m.shrinks_information() == scan);
    }
}

TEST_CASE("build_small_convnet group output shapes") {
    SeededRng rng(4);
    Model m = build_small_convnet({3, 32, 32}, 3, {8, 16, 32}, false, rng);
    REQUIRE(m.group_ends().size() == 3);
    CHECK(m.layer_shape(m.group_ends()[0]) == std::vector<std::size_t>{8, 16, 16});
    CHECK(m.layer_shape(m.group_ends()[1]) == std::vector<std::size_t>{16, 8, 8});
    CHECK(m.layer_shape(m.group_ends()[2]) == std::vector<std::size_t>{32, 4, 4});
    CHECK(count_layer_elements(m, m.group_ends()[1]) == 1024);
}

TEST_CASE("identity 3x3 convolution reproduces its input") {
    Conv2dLayer conv;
    conv.kernels = Tensor::zeros({3, 3, 3, 3}, Precision::f64);
    for (std::size_t c = 0; c < 3; ++c)
        conv.kernels.set(((c * 3 + c) * 3 + 1) * 3 + 1, 1.0);  // center tap, same channel
    conv.bias = Tensor::zeros({3}, Precision::f64);
    conv.stride = 1;
    conv.padding = 1;
    std::vector<Layer> layers;
    layers.push_back(Layer{std::move(conv)});
    Model m({3, 5, 5}, std::move(layers), Precision::f64);
    SeededRng rng(5);
    Tensor a = gaussian_draw(rng, {3, 5, 5}, 0.0, 1.0);
    Tensor out = forward_to_layer(m, a, 1);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(out.at(i) == doctest::Approx(a.at(i)));
}

TEST_CASE("residual block with zero inner weights is the identity") {
    ResidualLayer res;
    Conv2dLayer conv;
    conv.kernels = Tensor::zeros({2, 2, 3, 3}, Precision::f64);
    conv.bias = Tensor::zeros({2}, Precision::f64);
    conv.stride = 1;
    conv.padding = 1;
    res.inner.push_back(Layer{conv});
    res.inner.push_back(Layer{ReluLayer{}});
    res.inner.push_back(Layer{conv});
    std::vector<Layer> layers;
    layers.push_back(Layer{std::move(res)});
    Model m({2, 4, 4}, std::move(layers), Precision::f64);
    SeededRng rng(6);
    Tensor a = gaussian_draw(rng, {2, 4, 4}, 0.0, 1.0);
    Tensor out = forward_to_layer(m, a, 1);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(out.at(i) == doctest::Approx(a.at(i)));
}

TEST_CASE("two-layer forward matches hand arithmetic") {
    DenseLayer d1;
    d1.weights = Tensor::from_values({2, 2}, {1, 2, 3, 4});
    DenseLayer d2;
    d2.weights = Tensor::from_values({2, 2}, {0, 1, 1, 0});
    std::vector<Layer> layers;
    layers.push_back(Layer{std::move(d1)});
    layers.push_back(Layer{std::move(d2)});
    Model m({2}, std::move(layers), Precision::f64);
    Tensor a = Tensor::from_values({2}, {1, 1});
    Tensor h1 = forward_to_layer(m, a, 1);
    CHECK(h1.at(0) == 3);
    CHECK(h1.at(1) == 7);
    Tensor out = forward_to_layer(m, a, 2);
    CHECK(out.at(0) == 7);
    CHECK(out.at(1) == 3);
}

TEST_CASE("forward respects splicing through any intermediate layer") {
    SeededRng rng(7);
    Model m = build_small_convnet({3, 16, 16}, 2, {4, 8}, true, rng, Precision::f64);
    Tensor a = gaussian_draw(rng, {3, 16, 16}, 0.5, 0.2);
    const std::size_t last = m.layer_count();
    Tensor full = forward_to_layer(m, a, last);
    for (std::size_t l = 1; l < last; ++l) {
        Tensor mid = forward_to_layer(m, a, l);
        Tensor spliced = forward_between_layers(m, mid, l, last);
        REQUIRE(spliced.size() == full.size());
        for (std::size_t i = 0; i < full.size(); ++i) CHECK(spliced.at(i) == full.at(i));
    }
}

TEST_CASE("count_layer_elements at the downsampled-image scale") {
    std::vector<Layer> layers;
    layers.push_back(Layer{FlattenLayer{}});
    Model m({3, 299, 299}, std::move(layers), Precision::f32);
    CHECK(count_layer_elements(m, 0) == 268203);
    CHECK(count_layer_elements(m, 1) == 268203);
    CHECK_THROWS_AS(count_layer_elements(m, 2), std::invalid_argument);
}

TEST_CASE("kaiming init is bit-reproducible for a fixed seed") {
    SeededRng r1(99), r2(99);
    Model a = build_mlp(32, {16, 8}, true, true, r1, Precision::f64);
    Model b = build_mlp(32, {16, 8}, true, true, r2, Precision::f64);
    const auto& wa = std::get<DenseLayer>(a.layers()[0].kind).weights;
    const auto& wb = std::get<DenseLayer>(b.layers()[0].kind).weights;
    for (std::size_t i = 0; i < wa.size(); ++i) CHECK(wa.at(i) == wb.at(i));
}

TEST_CASE("kaiming bound is sqrt(6/fan_in)") {
    SeededRng rng(123);
    Model m = build_mlp(96, {4096}, false, false, rng, Precision::f64);
    const auto& w = std::get<DenseLayer>(m.layers()[0].kind).weights;
    const double bound = std::sqrt(6.0 / 96.0);
    double max_abs = 0;
    for (std::size_t i = 0; i < w.size(); ++i) max_abs = std::max(max_abs, std::abs(w.at(i)));
    CHECK(max_abs <= bound);
    CHECK(max_abs > 0.95 * bound);  // the bound is tight over 400k draws
}

TEST_CASE("model construction rejects inconsistent shapes") {
    DenseLayer bad;
    bad.weights = Tensor::zeros({4, 5}, Precision::f64);
    std::vector<Layer> layers;
    layers.push_back(Layer{std::move(bad)});
    CHECK_THROWS_AS(Model({4}, std::move(layers), Precision::f64), std::invalid_argument);
}

TEST_CASE("forward_to_layer validates input shape and layer index") {
    Model m = identity_dense_model(4);
    Tensor wrong = Tensor::zeros({5}, Precision::f64);
    CHECK_THROWS_AS(forward_to_layer(m, wrong, 1), std::invalid_argument);
    Tensor a = Tensor::zeros({4}, Precision::f64);
    CHECK_THROWS_AS(forward_to_layer(m, a, 0), std::invalid_argument);
    CHECK_THROWS_AS(forward_to_layer(m, a, 2), std::invalid_argument);
}

TEST_CASE("relu_preactivations collects inputs of each relu") {
    SeededRng rng(8);
    Model m = build_mlp(8, {6, 4, 2}, true, true, rng, Precision::f64);
    Tensor a = gaussian_draw(rng, {8}, 0.0, 1.0);
    const auto pres = relu_preactivations(m, a);
    REQUIRE(pres.size() == 2);  // relu after the first two dense layers only
    CHECK(pres[0].size() == 6);
    CHECK(pres[1].size() == 4);
    // the collected tensor is the dense output feeding the relu
    Tensor h1 = forward_to_layer(m, a, 1);
    for (std::size_t i = 0; i < h1.size(); ++i) CHECK(pres[0].at(i) == h1.at(i));
}

TEST_CASE("precision_cast_model converts every parameter") {
    SeededRng rng(10);
    Model m64 = build_mlp(8, {4}, true, false, rng, Precision::f64);
    Model m32 = precision_cast_model(m64, Precision::f32);
    CHECK(m32.precision() == Precision::f32);
    const auto& w64 = std::get<DenseLayer>(m64.layers()[0].kind).weights;
    const auto& w32 = std::get<DenseLayer>(m32.layers()[0].kind).weights;
    for (std::size_t i = 0; i < w64.size(); ++i)
        CHECK(w32.at(i) == doctest::Approx(w64.at(i)).epsilon(1e-6));
}
