#include <doctest.h>

#include <cmath>

#include "reprobe/rng.hpp"

using namespace reprobe;

TEST_CASE("identical seeds give identical streams") {
    SeededRng a(123456789), b(123456789);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    for (int i = 0; i < 1000; ++i) CHECK(a.next_gaussian() == b.next_gaussian());
}

TEST_CASE("different seeds give different streams") {
    SeededRng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("split substreams are deterministic and independent") {
    SeededRng base(77);
    SeededRng s1 = base.split(rng_stream::kInputInit);
    SeededRng s1_again = SeededRng(77).split(rng_stream::kInputInit);
    SeededRng s2 = base.split(rng_stream::kShiftNoise);
    CHECK(s1.next_u64() == s1_again.next_u64());
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (s1.next_u64() == s2.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("uniforms lie in [0,1)") {
    SeededRng rng(5);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("gaussian moments are sane") {
    SeededRng rng(9);
    const int n = 200000;
    double sum = 0, sumsq = 0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.next_gaussian();
        sum += z;
        sumsq += z * z;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}
