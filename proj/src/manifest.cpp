#include "reprobe/manifest.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <variant>

namespace reprobe {

static_assert(std::endian::native == std::endian::little,
              "parameter blobs are defined little-endian");

namespace {

void emit_layer(const Layer& layer, std::ostringstream& out, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    std::visit(
        [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, DenseLayer>) {
                out << pad << "dense out=" << l.weights.shape()[0]
                    << " bias=" << (l.bias ? 1 : 0) << "\n";
            } else if constexpr (std::is_same_v<L, Conv2dLayer>) {
                out << pad << "conv2d out=" << l.kernels.shape()[0]
                    << " kh=" << l.kernels.shape()[2] << " kw=" << l.kernels.shape()[3]
                    << " stride=" << l.stride << " pad=" << l.padding
                    << " bias=" << (l.bias ? 1 : 0) << "\n";
            } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
                out << pad << "maxpool window=" << l.window << " stride=" << l.stride << "\n";
            } else if constexpr (std::is_same_v<L, AvgPoolLayer>) {
                out << pad << "avgpool window=" << l.window << " stride=" << l.stride << "\n";
            } else if constexpr (std::is_same_v<L, ReluLayer>) {
                out << pad << "relu\n";
            } else if constexpr (std::is_same_v<L, FlattenLayer>) {
                out << pad << "flatten\n";
            } else {
                out << pad << "residual begin\n";
                for (const Layer& inner : l.inner) emit_layer(inner, out, indent + 1);
                out << pad << "residual end\n";
            }
        },
        layer.kind);
}

std::size_t parse_field(const std::string& token, const std::string& key) {
    if (token.rfind(key + "=", 0) != 0)
        throw std::invalid_argument("manifest: expected " + key + "=..., got '" + token + "'");
    return static_cast<std::size_t>(std::stoull(token.substr(key.size() + 1)));
}

struct ParseState {
    std::vector<std::string> lines;
    std::size_t pos = 0;

    bool done() const { return pos >= lines.size(); }
    const std::string& peek() const { return lines[pos]; }
    std::string next() { return lines[pos++]; }
};

Tensor kaiming(SeededRng& rng, std::vector<std::size_t> shape, std::size_t fan_in,
               Precision prec) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t(std::move(shape), prec);
    for (std::size_t i = 0; i < t.size(); ++i)
        t.set(i, bound * (2.0 * rng.next_uniform() - 1.0));
    return t;
}

std::vector<Layer> parse_layers(ParseState& state, std::vector<std::size_t>& shape,
                                SeededRng& rng, Precision prec, bool inside_residual) {
    std::vector<Layer> layers;
    while (!state.done()) {
        std::istringstream line(state.peek());
        std::string kind;
        line >> kind;
        if (kind == "residual") {
            std::string marker;
            line >> marker;
            if (marker == "end") {
                if (!inside_residual)
                    throw std::invalid_argument("manifest: 'residual end' without begin");
                state.next();
                return layers;
            }
            if (marker != "begin")
                throw std::invalid_argument("manifest: expected 'residual begin' or 'residual end'");
            state.next();
            std::vector<std::size_t> inner_shape = shape;
            ResidualLayer res;
            res.inner = parse_layers(state, inner_shape, rng, prec, true);
            if (inner_shape != shape)
                throw std::invalid_argument("manifest: residual inner stack changes shape");
            layers.push_back(Layer{std::move(res)});
            continue;
        }
        state.next();
        std::vector<std::string> tokens;
        std::string tok;
        while (line >> tok) tokens.push_back(tok);
        if (kind == "dense") {
            if (shape.size() != 1)
                throw std::invalid_argument("manifest: dense layer needs a flattened input");
            const std::size_t out = parse_field(tokens.at(0), "out");
            const std::size_t with_bias = parse_field(tokens.at(1), "bias");
            DenseLayer dense;
            dense.weights = kaiming(rng, {out, shape[0]}, shape[0], prec);
            if (with_bias) dense.bias = Tensor::zeros({out}, prec);
            shape = {out};
            layers.push_back(Layer{std::move(dense)});
        } else if (kind == "conv2d") {
            if (shape.size() != 3)
                throw std::invalid_argument("manifest: conv2d layer needs a [C,H,W] input");
            const std::size_t out = parse_field(tokens.at(0), "out");
            const std::size_t kh = parse_field(tokens.at(1), "kh");
            const std::size_t kw = parse_field(tokens.at(2), "kw");
            const std::size_t stride = parse_field(tokens.at(3), "stride");
            const std::size_t padding = parse_field(tokens.at(4), "pad");
            const std::size_t with_bias = parse_field(tokens.at(5), "bias");
            Conv2dLayer conv;
            conv.kernels = kaiming(rng, {out, shape[0], kh, kw}, shape[0] * kh * kw, prec);
            if (with_bias) conv.bias = Tensor::zeros({out}, prec);
            conv.stride = stride;
            conv.padding = padding;
            shape = layer_output_shape(Layer{conv}, shape);
            layers.push_back(Layer{std::move(conv)});
        } else if (kind == "maxpool" || kind == "avgpool") {
            const std::size_t window = parse_field(tokens.at(0), "window");
            const std::size_t stride = parse_field(tokens.at(1), "stride");
            Layer layer = kind == "maxpool" ? Layer{MaxPoolLayer{window, stride}}
                                            : Layer{AvgPoolLayer{window, stride}};
            shape = layer_output_shape(layer, shape);
            layers.push_back(std::move(layer));
        } else if (kind == "relu") {
            layers.push_back(Layer{ReluLayer{}});
        } else if (kind == "flatten") {
            shape = {shape_elems(shape)};
            layers.push_back(Layer{FlattenLayer{}});
        } else {
            throw std::invalid_argument("manifest: unknown layer kind '" + kind + "'");
        }
    }
    if (inside_residual)
        throw std::invalid_argument("manifest: unterminated residual block");
    return layers;
}

template <typename Fn>
void visit_params(const std::vector<Layer>& layers, Fn&& fn) {
    for (const Layer& layer : layers) {
        std::visit(
            [&](const auto& l) {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, DenseLayer>) {
                    fn(l.weights);
                    if (l.bias) fn(*l.bias);
                } else if constexpr (std::is_same_v<L, Conv2dLayer>) {
                    fn(l.kernels);
                    if (l.bias) fn(*l.bias);
                } else if constexpr (std::is_same_v<L, ResidualLayer>) {
                    visit_params(l.inner, fn);
                }
            },
            layer.kind);
    }
}

template <typename Fn>
void visit_params_mut(std::vector<Layer>& layers, Fn&& fn) {
    for (Layer& layer : layers) {
        std::visit(
            [&](auto& l) {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, DenseLayer>) {
                    fn(l.weights);
                    if (l.bias) fn(*l.bias);
                } else if constexpr (std::is_same_v<L, Conv2dLayer>) {
                    fn(l.kernels);
                    if (l.bias) fn(*l.bias);
                } else if constexpr (std::is_same_v<L, ResidualLayer>) {
                    visit_params_mut(l.inner, fn);
                }
            },
            layer.kind);
    }
}

}  // namespace

std::string model_to_manifest(const Model& model) {
    std::ostringstream out;
    out << "model reprobe/1\n";
    out << "precision " << precision_name(model.precision()) << "\n";
    out << "input";
    for (std::size_t d : model.input_shape()) out << " " << d;
    out << "\n";
    out << "seed " << model.init_seed() << "\n";
    if (!model.group_ends().empty()) {
        out << "groups";
        for (std::size_t g : model.group_ends()) out << " " << g;
        out << "\n";
    }
    for (const Layer& layer : model.layers()) emit_layer(layer, out, 0);
    return out.str();
}

void save_model_manifest(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model manifest: " + path);
    out << model_to_manifest(model);
}

Model model_from_manifest_text(const std::string& text) {
    ParseState state;
    std::istringstream stream(text);
    std::string raw;
    while (std::getline(stream, raw)) {
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        std::size_t begin = raw.find_first_not_of(" \t\r");
        if (begin == std::string::npos) continue;
        std::size_t end = raw.find_last_not_of(" \t\r");
        state.lines.push_back(raw.substr(begin, end - begin + 1));
    }
    if (state.done() || state.next() != "model reprobe/1")
        throw std::invalid_argument("manifest: missing 'model reprobe/1' header");

    Precision prec = Precision::f32;
    std::vector<std::size_t> input_shape;
    std::uint64_t seed = 0;
    std::vector<std::size_t> group_ends;
    while (!state.done()) {
        std::istringstream line(state.peek());
        std::string key;
        line >> key;
        if (key == "precision") {
            int bits;
            line >> bits;
            prec = precision_from_bits(bits);
        } else if (key == "input") {
            std::size_t d;
            while (line >> d) input_shape.push_back(d);
        } else if (key == "seed") {
            line >> seed;
        } else if (key == "groups") {
            std::size_t g;
            while (line >> g) group_ends.push_back(g);
        } else {
            break;
        }
        state.next();
    }
    if (input_shape.empty()) throw std::invalid_argument("manifest: missing input shape");

    SeededRng rng(seed);
    std::vector<std::size_t> shape = input_shape;
    std::vector<Layer> layers = parse_layers(state, shape, rng, prec, false);
    if (layers.empty()) throw std::invalid_argument("manifest: no layers");
    return Model(input_shape, std::move(layers), prec, seed, group_ends);
}

Model load_model_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read model manifest: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return model_from_manifest_text(buffer.str());
}

std::size_t model_param_count(const Model& model) {
    std::size_t count = 0;
    visit_params(model.layers(), [&](const Tensor& t) { count += t.size(); });
    return count;
}

void save_model_params(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model params: " + path);
    visit_params(model.layers(), [&](const Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double v = t.at(i);
            char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof(double));
            out.write(bytes, sizeof(double));
        }
    });
}

Model load_model(const std::string& manifest_path, const std::string& params_path) {
    Model model = load_model_manifest(manifest_path);
    if (params_path.empty()) return model;
    std::ifstream in(params_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read model params: " + params_path);
    std::vector<char> blob((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    const std::size_t expected = model_param_count(model) * sizeof(double);
    if (blob.size() != expected)
        throw std::runtime_error("model params blob has " + std::to_string(blob.size()) +
                                 " bytes, expected " + std::to_string(expected));
    std::size_t offset = 0;
    std::vector<Layer> layers = model.layers();
    visit_params_mut(layers, [&](Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            double v;
            std::memcpy(&v, blob.data() + offset, sizeof(double));
            offset += sizeof(double);
            t.set(i, v);
        }
    });
    return Model(model.input_shape(), std::move(layers), model.precision(),
                 model.init_seed(), model.group_ends());
}

}  // namespace reprobe
