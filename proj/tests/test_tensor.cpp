#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <limits>

#include "reprobe/tensor.hpp"

using namespace reprobe;

namespace {

// independent reference convolution for the blur oracle: naive 3x3 with
// replicate padding, all in double
std::vector<double> reference_blur(const std::vector<double>& plane, std::size_t h,
                                   std::size_t w, double sigma) {
    double k[9];
    double total = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            k[(dy + 1) * 3 + dx + 1] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            total += k[(dy + 1) * 3 + dx + 1];
        }
    for (double& v : k) v /= total;
    std::vector<double> out(h * w, 0.0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    long sy = std::clamp<long>(static_cast<long>(y) + dy, 0, h - 1);
                    long sx = std::clamp<long>(static_cast<long>(x) + dx, 0, w - 1);
                    acc += k[(dy + 1) * 3 + dx + 1] * plane[sy * w + sx];
                }
            out[y * w + x] = acc;
        }
    return out;
}

}  // namespace

TEST_CASE("gaussian_draw zero sigma is constant") {
    SeededRng rng(1);
    Tensor t = gaussian_draw(rng, {4}, 0.7, 0.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(t.at(i) == 0.7);
}

TEST_CASE("gaussian_draw sample mean approaches mu over seeds") {
    // law-of-large-numbers check on the paper-sized init draw
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SeededRng rng(seed);
        Tensor t = gaussian_draw(rng, {3, 29, 29}, 0.7, 0.05);
        double mean = 0;
        for (std::size_t i = 0; i < t.size(); ++i) mean += t.at(i);
        mean /= static_cast<double>(t.size());
        CHECK(std::abs(mean - 0.7) < 0.01);
    }
}

TEST_CASE("gaussian_draw is bit-deterministic") {
    SeededRng a(42), b(42);
    Tensor ta = gaussian_draw(a, {64}, 0.0, 1.0);
    Tensor tb = gaussian_draw(b, {64}, 0.0, 1.0);
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(ta.at(i) == tb.at(i));
}

TEST_CASE("gaussian_draw rejects negative sigma") {
    SeededRng rng(0);
    CHECK_THROWS_AS(gaussian_draw(rng, {2}, 0.0, -1.0), std::invalid_argument);
}

TEST_CASE("gaussian_kernel_3x3 flat limit") {
    Tensor k = gaussian_kernel_3x3(1000.0);
    for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(k.at(i) - 1.0 / 9.0) < 1e-6);
}

TEST_CASE("gaussian_kernel_3x3 normalization and symmetry") {
    for (double sigma : {0.4, 1.0, 2.4, 17.0}) {
        Tensor k = gaussian_kernel_3x3(sigma);
        double sum = 0;
        for (std::size_t i = 0; i < 9; ++i) sum += k.at(i);
        CHECK(std::abs(sum - 1.0) < 1e-12);
        // symmetric under 90-degree rotation and reflection
        CHECK(k.at(0) == k.at(2));
        CHECK(k.at(0) == k.at(6));
        CHECK(k.at(0) == k.at(8));
        CHECK(k.at(1) == k.at(3));
        CHECK(k.at(1) == k.at(5));
        CHECK(k.at(1) == k.at(7));
    }
}

TEST_CASE("gaussian_kernel_3x3 sigma 0.4 matches direct evaluation") {
    const double sigma = 0.4;
    const double e1 = std::exp(-1.0 / (2 * sigma * sigma));
    const double e2 = std::exp(-2.0 / (2 * sigma * sigma));
    const double total = 1.0 + 4 * e1 + 4 * e2;
    Tensor k = gaussian_kernel_3x3(sigma);
    CHECK(k.at(4) == doctest::Approx(1.0 / total).epsilon(1e-12));
    CHECK(k.at(0) == doctest::Approx(e2 / total).epsilon(1e-12));
    CHECK(k.at(1) == doctest::Approx(e1 / total).epsilon(1e-12));
}

TEST_CASE("gaussian_kernel_3x3 rejects non-positive sigma") {
    CHECK_THROWS_AS(gaussian_kernel_3x3(0.0), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_kernel_3x3(-0.4), std::invalid_argument);
}

TEST_CASE("blur keeps constant images") {
    Tensor img = Tensor::full({2, 5, 5}, 0.37, Precision::f64);
    Tensor b = blur(img, 1.3);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(std::abs(b.at(i) - 0.37) < 1e-12);
}

TEST_CASE("blur of an interior impulse stamps the kernel") {
    Tensor img = Tensor::zeros({1, 5, 5}, Precision::f64);
    img.set(2 * 5 + 2, 1.0);
    Tensor b = blur(img, 0.4);
    Tensor k = gaussian_kernel_3x3(0.4);
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
            CHECK(b.at((2 + dy) * 5 + (2 + dx)) ==
                  doctest::Approx(k.at((dy + 1) * 3 + dx + 1)).epsilon(1e-12));
    CHECK(b.at(0) == 0.0);
}

TEST_CASE("blur matches the reference convolution on a checkerboard") {
    std::vector<double> plane(16);
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) plane[y * 4 + x] = (x + y) % 2 ? 1.0 : 0.0;
    Tensor img = Tensor::from_values({1, 4, 4}, plane);
    Tensor b = blur(img, 2.4);
    const std::vector<double> expected = reference_blur(plane, 4, 4, 2.4);
    for (std::size_t i = 0; i < 16; ++i) CHECK(b.at(i) == doctest::Approx(expected[i]).epsilon(1e-12));
    // interior values move toward the checkerboard mean
    for (std::size_t y = 1; y < 3; ++y)
        for (std::size_t x = 1; x < 3; ++x) {
            const double before = std::abs(plane[y * 4 + x] - 0.5);
            const double after = std::abs(b.at(y * 4 + x) - 0.5);
            CHECK(after < before);
        }
}

TEST_CASE("blur rejects wrong rank") {
    Tensor flat = Tensor::zeros({16}, Precision::f64);
    CHECK_THROWS_AS(blur(flat, 1.0), std::invalid_argument);
}

TEST_CASE("blur is linear") {
    SeededRng rng(5);
    Tensor x = gaussian_draw(rng, {2, 6, 6}, 0.0, 1.0);
    Tensor y = gaussian_draw(rng, {2, 6, 6}, 0.0, 1.0);
    const double alpha = 1.7, beta = -0.4;
    Tensor lhs = blur(add(scalar_multiply(x, alpha), scalar_multiply(y, beta)), 0.9);
    Tensor rhs = add(scalar_multiply(blur(x, 0.9), alpha), scalar_multiply(blur(y, 0.9), beta));
    for (std::size_t i = 0; i < lhs.size(); ++i)
        CHECK(lhs.at(i) == doctest::Approx(rhs.at(i)).epsilon(1e-9));
}

TEST_CASE("matmul hand case and identity") {
    Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_values({2, 2}, {5, 6, 7, 8});
    Tensor c = matmul(a, b);
    CHECK(c.at(0) == 19);
    CHECK(c.at(1) == 22);
    CHECK(c.at(2) == 43);
    CHECK(c.at(3) == 50);
    Tensor eye = Tensor::from_values({2, 2}, {1, 0, 0, 1});
    Tensor d = matmul(eye, a);
    for (std::size_t i = 0; i < 4; ++i) CHECK(d.at(i) == a.at(i));
}

TEST_CASE("add/subtract/scalar_multiply basics") {
    Tensor a = Tensor::from_values({3}, {1, -2, 3});
    Tensor z = Tensor::zeros({3}, Precision::f64);
    Tensor s = add(a, z);
    for (std::size_t i = 0; i < 3; ++i) CHECK(s.at(i) == a.at(i));
    Tensor d = subtract(a, a);
    for (std::size_t i = 0; i < 3; ++i) CHECK(d.at(i) == 0.0);
    Tensor m = scalar_multiply(a, -2.0);
    CHECK(m.at(0) == -2);
    CHECK(m.at(1) == 4);
    CHECK(m.at(2) == -6);
    Tensor other = Tensor::zeros({4}, Precision::f64);
    CHECK_THROWS_AS(add(a, other), std::invalid_argument);
}

TEST_CASE("l1_sum and l2_norm hand cases") {
    Tensor a = Tensor::from_values({3}, {1, -2, 3});
    CHECK(l1_sum(a) == 6.0);
    Tensor b = Tensor::from_values({2}, {3, 4});
    CHECK(l2_norm(b) == 5.0);
    CHECK(l2_norm(subtract(a, a)) == 0.0);
}

TEST_CASE("l2_norm triangle inequality on random triples") {
    SeededRng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = gaussian_draw(rng, {17}, 0.0, 2.0);
        Tensor y = gaussian_draw(rng, {17}, 0.5, 1.0);
        const double lhs = l2_norm(add(x, y));
        const double rhs = l2_norm(x) + l2_norm(y);
        CHECK(lhs <= rhs * (1 + 1e-9));
    }
}

TEST_CASE("clamp basics") {
    Tensor a = Tensor::from_values({4}, {-1.0, 0.25, 0.5, 2.0});
    Tensor c = clamp(a, 0.0, 1.0);
    CHECK(c.at(0) == 0.0);
    CHECK(c.at(1) == 0.25);
    CHECK(c.at(2) == 0.5);
    CHECK(c.at(3) == 1.0);
    CHECK_THROWS_AS(clamp(a, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("reshape preserves row-major order") {
    Tensor a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor r = reshape(a, {3, 2});
    for (std::size_t i = 0; i < 6; ++i) CHECK(r.at(i) == a.at(i));
    CHECK(r.shape() == std::vector<std::size_t>{3, 2});
    CHECK_THROWS_AS(reshape(a, {4, 2}), std::invalid_argument);
}

TEST_CASE("precision_cast round trip stays within float epsilon") {
    SeededRng rng(3);
    Tensor a = gaussian_draw(rng, {256}, 0.0, 10.0);
    Tensor round_trip = precision_cast(precision_cast(a, Precision::f32), Precision::f64);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double rel = std::abs(round_trip.at(i) - a.at(i)) /
                           std::max(1e-30, std::abs(a.at(i)));
        CHECK(rel <= std::numeric_limits<float>::epsilon());
    }
}

TEST_CASE("bilinear_downsample averages a 2x2 block to its mean") {
    Tensor img = Tensor::from_values({1, 2, 2}, {0, 1, 2, 3});
    Tensor d = bilinear_downsample(img, 1, 1);
    CHECK(d.at(0) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("bilinear_downsample hand case 4x4 to 2x2") {
    std::vector<double> vals(16);
    for (std::size_t i = 0; i < 16; ++i) vals[i] = static_cast<double>(i);
    Tensor img = Tensor::from_values({1, 4, 4}, vals);
    Tensor d = bilinear_downsample(img, 2, 2);
    // center sampling at (0.5, 0.5): mean of each 2x2 block
    CHECK(d.at(0) == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
    CHECK(d.at(1) == doctest::Approx((2 + 3 + 6 + 7) / 4.0));
    CHECK(d.at(2) == doctest::Approx((8 + 9 + 12 + 13) / 4.0));
    CHECK(d.at(3) == doctest::Approx((10 + 11 + 14 + 15) / 4.0));
}

TEST_CASE("bilinear_downsample identity when sizes match") {
    SeededRng rng(9);
    Tensor img = gaussian_draw(rng, {2, 3, 3}, 0.0, 1.0);
    Tensor d = bilinear_downsample(img, 3, 3);
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(d.at(i) == doctest::Approx(img.at(i)));
}

TEST_CASE("tensor rejects zero dimensions and mismatched values") {
    CHECK_THROWS_AS(Tensor::zeros({0}, Precision::f64), std::invalid_argument);
    CHECK_THROWS_AS(Tensor::from_values({2}, {1.0}), std::invalid_argument);
}
