#include <doctest.h>

#include <stdexcept>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "reprobe/pnm.hpp"
#include "reprobe/rng.hpp"

using namespace reprobe;

namespace {

std::filesystem::path work_dir() {
    const char* env = std::getenv("REPROBE_WORK");
    std::filesystem::path dir = env ? env : std::filesystem::temp_directory_path();
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("quantized color values round-trip through P3") {
    Tensor img = Tensor::zeros({3, 2, 2}, Precision::f64);
    for (std::size_t i = 0; i < img.size(); ++i)
        img.set(i, static_cast<double>((i * 13) % 256) / 255.0);
    const auto path = (work_dir() / "roundtrip.ppm").string();
    write_pnm(img, path);
    Tensor back = read_pnm(path);
    REQUIRE(back.shape() == img.shape());
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(back.at(i) == doctest::Approx(img.at(i)).epsilon(1e-12));
}

TEST_CASE("grayscale images use P2") {
    Tensor img = Tensor::from_values({1, 1, 3}, {0.0, 0.5, 1.0});
    const std::string text = pnm_to_string(img);
    CHECK(text.rfind("P2\n3 1\n255\n", 0) == 0);
    CHECK(text.find("0 128 255") != std::string::npos);
}

TEST_CASE("values are clamped before quantization") {
    Tensor img = Tensor::from_values({1, 1, 2}, {-0.5, 1.5});
    const std::string text = pnm_to_string(img);
    CHECK(text.find("0 255") != std::string::npos);
}

TEST_CASE("binary P5 and P6 are readable") {
    const auto dir = work_dir();
    {
        std::ofstream out(dir / "gray.pgm", std::ios::binary);
        out << "P5\n2 2\n255\n";
        const unsigned char data[4] = {0, 64, 128, 255};
        out.write(reinterpret_cast<const char*>(data), 4);
    }
    Tensor gray = read_pnm((dir / "gray.pgm").string());
    CHECK(gray.shape() == std::vector<std::size_t>{1, 2, 2});
    CHECK(gray.at(0) == doctest::Approx(0.0));
    CHECK(gray.at(3) == doctest::Approx(1.0));
    {
        std::ofstream out(dir / "color.ppm", std::ios::binary);
        out << "P6\n1 2\n255\n";
        const unsigned char data[6] = {255, 0, 0, 0, 0, 255};
        out.write(reinterpret_cast<const char*>(data), 6);
    }
    Tensor color = read_pnm((dir / "color.ppm").string());
    CHECK(color.shape() == std::vector<std::size_t>{3, 2, 1});
    CHECK(color.at(0) == doctest::Approx(1.0));   // R plane, first pixel
    CHECK(color.at(5) == doctest::Approx(1.0));   // B plane, second pixel
}

TEST_CASE("plain readers skip comments") {
    const auto dir = work_dir();
    {
        std::ofstream out(dir / "comment.pgm");
        out << "P2\n# a comment line\n2 1\n# another\n255\n7 250\n";
    }
    Tensor img = read_pnm((dir / "comment.pgm").string());
    CHECK(img.at(0) == doctest::Approx(7.0 / 255.0));
    CHECK(img.at(1) == doctest::Approx(250.0 / 255.0));
}

TEST_CASE("writer rejects unsupported channel counts and reader bad magic") {
    Tensor bad = Tensor::zeros({2, 2, 2}, Precision::f64);
    CHECK_THROWS_AS(pnm_to_string(bad), std::invalid_argument);
    const auto dir = work_dir();
    {
        std::ofstream out(dir / "bad.pbm");
        out << "P1\n1 1\n1\n";
    }
    CHECK_THROWS_AS(read_pnm((dir / "bad.pbm").string()), std::runtime_error);
    CHECK_THROWS_AS(read_pnm((dir / "missing_file.ppm").string()), std::runtime_error);
}
