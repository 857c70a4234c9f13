#include "reprobe/pnm.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reprobe {

namespace {

// Skips whitespace and '#' comments, then reads one unsigned token.
long read_token(std::istream& in) {
    while (true) {
        const int c = in.peek();
        if (c == EOF) throw std::runtime_error("pnm: unexpected end of header");
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    long value;
    if (!(in >> value)) throw std::runtime_error("pnm: malformed header token");
    return value;
}

}  // namespace

Tensor read_pnm(const std::string& path, Precision prec) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read image: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6")
        throw std::runtime_error("pnm: unsupported format '" + magic + "' in " + path);
    const bool color = magic == "P3" || magic == "P6";
    const bool binary = magic == "P5" || magic == "P6";
    const long width = read_token(in);
    const long height = read_token(in);
    const long maxval = read_token(in);
    if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255)
        throw std::runtime_error("pnm: unsupported dimensions or maxval in " + path);
    const std::size_t channels = color ? 3 : 1;
    const std::size_t pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    Tensor image({channels, static_cast<std::size_t>(height), static_cast<std::size_t>(width)},
                 prec);
    if (binary) {
        in.get();  // single whitespace after maxval
        std::vector<char> raw(pixels * channels);
        in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw std::runtime_error("pnm: truncated pixel data in " + path);
        for (std::size_t p = 0; p < pixels; ++p)
            for (std::size_t c = 0; c < channels; ++c) {
                const double v = static_cast<unsigned char>(raw[p * channels + c]);
                image.set(c * pixels + p, v / static_cast<double>(maxval));
            }
    } else {
        for (std::size_t p = 0; p < pixels; ++p)
            for (std::size_t c = 0; c < channels; ++c) {
                long v;
                if (!(in >> v)) throw std::runtime_error("pnm: truncated pixel data in " + path);
                image.set(c * pixels + p, static_cast<double>(v) / static_cast<double>(maxval));
            }
    }
    return image;
}

std::string pnm_to_string(const Tensor& image) {
    if (image.rank() != 3 || (image.shape()[0] != 1 && image.shape()[0] != 3))
        throw std::invalid_argument("pnm: image must be [1,H,W] or [3,H,W]");
    const std::size_t channels = image.shape()[0];
    const std::size_t height = image.shape()[1];
    const std::size_t width = image.shape()[2];
    const std::size_t pixels = height * width;
    std::ostringstream out;
    out << (channels == 3 ? "P3" : "P2") << "\n" << width << " " << height << "\n255\n";
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            for (std::size_t c = 0; c < channels; ++c) {
                double v = image.at(c * pixels + y * width + x);
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                if (x != 0 || c != 0) out << " ";
                out << static_cast<int>(std::lround(v * 255.0));
            }
        }
        out << "\n";
    }
    return out.str();
}

void write_pnm(const Tensor& image, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image: " + path);
    out << pnm_to_string(image);
}

}  // namespace reprobe
