// reprobe: desk-scale experiments on how much input information survives in
// hidden-layer representations. Subcommands drive gradient-descent
// inversion, analytic layer inversion, the relu width calculator, and small
// training runs; every output file is deterministic under --seed.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "reprobe/analytic.hpp"
#include "reprobe/autodiff.hpp"
#include "reprobe/inversion.hpp"
#include "reprobe/manifest.hpp"
#include "reprobe/pnm.hpp"
#include "reprobe/trainer.hpp"

namespace fs = std::filesystem;
using namespace reprobe;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitBadArgs = 2;
constexpr int kExitDiverged = 3;

std::string g_command_line;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// one-line header carried by every output file: version, command, seed and
// the fully resolved option values of the subcommand
std::string file_header(const CLI::App& sub, std::uint64_t seed) {
    std::string cfg = sub.config_to_str(true, false);
    for (char& c : cfg)
        if (c == '\n') c = ' ';
    while (!cfg.empty() && cfg.back() == ' ') cfg.pop_back();
    return "# reprobe " + std::string(kVersion) + " | cmd: " + g_command_line +
           " | seed: " + std::to_string(seed) + " | config: " + cfg + "\n";
}

std::ofstream open_output(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write output file: " + path.string());
    return out;
}

void require_set(const std::string& value, const char* flag) {
    if (value.empty())
        throw std::runtime_error(std::string(flag) + " is required (flag or config file)");
}

// Line-oriented `key = value` config. Values fill only options the command
// line left untouched, so precedence is flag > config file > default.
void apply_config_file(CLI::App& sub, const std::string& path) {
    if (path.empty()) return;
    if (!fs::exists(path)) throw std::runtime_error("config file not found: " + path);
    std::ifstream in(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::size_t eq = line.find('=');
        auto trim = [](std::string s) {
            const std::size_t b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const std::size_t e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        if (eq == std::string::npos) {
            if (!trim(line).empty())
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": expected 'key = value'");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        CLI::Option* opt = sub.get_option_no_throw("--" + key);
        if (opt == nullptr)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": unknown option '" + key + "'");
        if (opt->count() > 0) continue;  // explicit flag wins
        std::stringstream values(value);
        std::string piece;
        while (values >> piece) opt->add_result(piece);
        opt->run_callback();
    }
}

EpsilonSchedule parse_epsilon(const std::string& text) {
    if (text.rfind("decay:", 0) == 0)
        return EpsilonSchedule::linear_decay(std::stod(text.substr(6)));
    return EpsilonSchedule::constant(std::stod(text));
}

BlurSchedule parse_blur(const std::string& text) {
    if (text == "off") return BlurSchedule::off();
    const std::size_t colon = text.find(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("--blur", "expected 'off' or '<start>:<end>'");
    return BlurSchedule::linear(std::stod(text.substr(0, colon)),
                                std::stod(text.substr(colon + 1)));
}

Model load_model_checked(const std::string& manifest_path, const std::string& params_path,
                         int precision_bits_flag) {
    if (!fs::exists(manifest_path))
        throw std::runtime_error("model manifest not found: " + manifest_path);
    if (!params_path.empty() && !fs::exists(params_path))
        throw std::runtime_error("model params not found: " + params_path);
    Model model = load_model(manifest_path, params_path);
    if (precision_bits_flag != 0)
        return precision_cast_model(model, precision_from_bits(precision_bits_flag));
    return model;
}

// Fits a [C,H,W] image to the model input: channel averaging/replication
// and bilinear downsampling as needed, then flattening for rank-1 inputs.
Tensor fit_target(const Tensor& image, const Model& model) {
    const auto& want = model.input_shape();
    Tensor img = image;
    if (want.size() == 3) {
        if (img.shape()[0] != want[0]) {
            Tensor remapped({want[0], img.shape()[1], img.shape()[2]}, img.precision());
            const std::size_t plane = img.shape()[1] * img.shape()[2];
            for (std::size_t c = 0; c < want[0]; ++c)
                for (std::size_t p = 0; p < plane; ++p) {
                    double v = 0;
                    if (img.shape()[0] == 1) {
                        v = img.at(p);
                    } else {
                        for (std::size_t ic = 0; ic < img.shape()[0]; ++ic)
                            v += img.at(ic * plane + p);
                        v /= static_cast<double>(img.shape()[0]);
                    }
                    remapped.set(c * plane + p, v);
                }
            std::cerr << "warning: remapped target channels " << image.shape()[0] << " -> "
                      << want[0] << "\n";
            img = std::move(remapped);
        }
        if (img.shape() != want) {
            std::cerr << "warning: downsampling target to " << want[1] << "x" << want[2]
                      << "\n";
            img = bilinear_downsample(img, want[1], want[2]);
        }
        return precision_cast(img, model.precision());
    }
    if (want.size() == 1) {
        if (img.size() != want[0])
            throw std::runtime_error(
                "target has " + std::to_string(img.size()) +
                " elements but the model expects a flat input of " +
                std::to_string(want[0]) +
                "; provide an image whose element count matches");
        return precision_cast(reshape(img, want), model.precision());
    }
    throw std::runtime_error("unsupported model input rank");
}

Tensor as_image(const Tensor& flat_or_image, const std::vector<std::size_t>& input_shape) {
    if (input_shape.size() == 3) return reshape(flat_or_image, input_shape);
    return reshape(flat_or_image, {1, 1, flat_or_image.size()});
}

void write_trace_csv(const fs::path& path, const std::string& header,
                     const std::vector<TraceRow>& trace) {
    auto out = open_output(path);
    out << header << "n,l1_objective,m_g,m_i\n";
    for (const TraceRow& row : trace)
        out << row.n << "," << fmt(row.l1_objective) << "," << fmt(row.m_g) << ","
            << fmt(row.m_i) << "\n";
}

void write_metrics_csv(const fs::path& path, const std::string& header,
                       const MetricsRecord& rec) {
    auto out = open_output(path);
    out << header << "m_g,m_s,m_i,seed,layer\n";
    out << fmt(rec.m_g) << "," << fmt(rec.m_s) << "," << fmt(rec.m_i) << "," << rec.seed
        << "," << rec.layer << "\n";
}

// ---- invert ---------------------------------------------------------------

struct InvertArgs {
    std::string model_path, params_path, target_path, out_dir;
    std::size_t layer = 0;  // 0 = last layer
    std::size_t iters = 500;
    std::string eps = "decay:0.1";
    std::string blur = "off";
    bool clamp = false;
    int precision = 0;
    std::uint64_t seed = 0;
};

int cmd_invert(const CLI::App& sub, const InvertArgs& args) {
    require_set(args.model_path, "--model");
    require_set(args.target_path, "--target");
    require_set(args.out_dir, "--out");
    Model model = load_model_checked(args.model_path, args.params_path, args.precision);
    if (!fs::exists(args.target_path))
        throw std::runtime_error("target image not found: " + args.target_path);
    Tensor target = fit_target(read_pnm(args.target_path), model);

    InversionConfig cfg;
    cfg.layer = args.layer == 0 ? model.layer_count() : args.layer;
    cfg.iterations = args.iters;
    cfg.epsilon = parse_epsilon(args.eps);
    cfg.blur = parse_blur(args.blur);
    cfg.clamp_input = args.clamp;
    cfg.precision = model.precision();
    cfg.seed = args.seed;

    const InversionResult run = invert(model, target, cfg);
    const MetricsRecord rec = compute_metrics(model, cfg.layer, target, run.a_g,
                                              1.0 / 20.0, args.seed);
    const std::string header = file_header(sub, args.seed);
    const fs::path out_dir = args.out_dir;
    fs::create_directories(out_dir);
    write_trace_csv(out_dir / "trace.csv", header, run.trace);
    write_metrics_csv(out_dir / "metrics.csv", header, rec);
    write_pnm(as_image(clamp(run.a_g, 0.0, 1.0), model.input_shape()),
              (out_dir / "a_g.ppm").string());
    std::cout << "m_g=" << fmt(rec.m_g) << " m_s=" << fmt(rec.m_s)
              << " m_i=" << fmt(rec.m_i) << "\n";
    return kExitOk;
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
    std::string kind;  // width | depth | iterations
    std::vector<std::size_t> grid;
    std::string target_path, out_dir;
    std::size_t iters = 400;
    std::size_t candidates = 24;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    int precision = 32;
};

struct SweepRow {
    std::size_t value = 0;
    double epsilon = 0, final_m_g = 0, final_m_i = 0;
    bool ok = false;
    std::string error;
};

SweepRow sweep_point(const SweepArgs& args, const Tensor& flat_target, std::size_t index) {
    SweepRow row;
    row.value = args.grid[index];
    try {
        const std::size_t n = flat_target.size();
        const Precision prec = precision_from_bits(args.precision);
        SeededRng model_rng = SeededRng(args.seed).split(1000 + index);
        std::vector<std::size_t> widths;
        std::size_t f = args.iters;
        if (args.kind == "width") {
            widths = {row.value, n, n};
        } else if (args.kind == "depth") {
            widths.assign(row.value, n);
        } else {  // iterations
            widths = {n, n, n};
            f = row.value;
            model_rng = SeededRng(args.seed).split(1000);  // same model across budgets
        }
        Model model = build_mlp(n, widths, true, false, model_rng, prec);
        Tensor target = precision_cast(flat_target, prec);

        InversionConfig tmpl;
        tmpl.layer = model.layer_count();
        tmpl.epsilon = EpsilonSchedule::linear_decay(0.1);
        tmpl.precision = prec;
        tmpl.seed = args.seed;
        const LineSearchResult search =
            epsilon_line_search(model, target, tmpl, args.candidates, args.seed);

        InversionConfig cfg = tmpl;
        cfg.iterations = f;
        cfg.epsilon.c = search.best_c;
        const InversionResult run = invert(model, target, cfg);
        row.epsilon = search.best_c;
        row.final_m_g = run.trace.back().m_g;
        row.final_m_i = run.trace.back().m_i;
        row.ok = true;
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

int cmd_sweep(const CLI::App& sub, const SweepArgs& args) {
    require_set(args.kind, "--kind");
    require_set(args.target_path, "--target");
    require_set(args.out_dir, "--out");
    if (args.grid.empty()) throw std::runtime_error("--grid is required");
    if (!fs::exists(args.target_path))
        throw std::runtime_error("target image not found: " + args.target_path);
    Tensor image = read_pnm(args.target_path);
    Tensor flat_target = reshape(image, {image.size()});

    std::vector<SweepRow> rows(args.grid.size());
    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::max<std::size_t>(1, std::min(args.jobs, args.grid.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= rows.size()) return;
                rows[i] = sweep_point(args, flat_target, i);
            }
        });
    for (std::thread& t : pool) t.join();

    auto out = open_output(fs::path(args.out_dir) / "summary.csv");
    out << file_header(sub, args.seed) << "kind,value,epsilon,final_m_g,final_m_i,status\n";
    std::size_t ok_count = 0;
    for (const SweepRow& row : rows) {
        if (row.ok) {
            ++ok_count;
            out << args.kind << "," << row.value << "," << fmt(row.epsilon) << ","
                << fmt(row.final_m_g) << "," << fmt(row.final_m_i) << ",ok\n";
        } else {
            std::string reason = row.error;
            for (char& ch : reason)
                if (ch == ',' || ch == '\n') ch = ';';
            out << args.kind << "," << row.value << ",nan,nan,nan,failed:" << reason << "\n";
        }
    }
    return ok_count == 0 ? kExitFailure : kExitOk;
}

// ---- analytic -------------------------------------------------------------

struct AnalyticArgs {
    std::size_t width = 192, depth = 3, probe_seeds = 10;
    double sigma_out = 1.0 / 1000.0, sigma_in = 1.0 / 20.0;
    std::uint64_t seed = 0;
    std::string out_dir;
};

int cmd_analytic(const CLI::App& sub, const AnalyticArgs& args) {
    require_set(args.out_dir, "--out");
    SeededRng rng(args.seed);
    LinearModel model = build_linear_model(args.width, args.depth, rng, Precision::f64);
    SeededRng input_rng = SeededRng(args.seed).split(rng_stream::kInputInit);
    Tensor a = gaussian_draw(input_rng, {args.width}, 0.5, 0.2, Precision::f64);

    const Tensor o = linear_forward(model, a);
    const LinearInverseResult back = invert_linear(model, o);
    const double rel64 = l2_distance(a, back.x) / l2_norm(a);

    LinearModel model32 = precision_cast_linear(model, Precision::f32);
    Tensor a32 = precision_cast(a, Precision::f32);
    const LinearInverseResult back32 = invert_linear(model32, linear_forward(model32, a32));
    const double rel32 = l2_distance(a, precision_cast(back32.x, Precision::f64)) / l2_norm(a);

    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < args.probe_seeds; ++s) seeds.push_back(args.seed + s);
    const ConditioningResult probe =
        conditioning_probe(model, a, args.sigma_out, args.sigma_in, seeds);

    auto out = open_output(fs::path(args.out_dir) / "probe.csv");
    out << file_header(sub, args.seed) << "seed,dist_a_app,dist_a_ap,ratio\n";
    for (const ConditioningRow& row : probe.rows)
        out << row.seed << "," << fmt(row.dist_a_app) << "," << fmt(row.dist_a_ap) << ","
            << fmt(row.ratio) << "\n";

    std::cout << "roundtrip relative error: f64=" << fmt(rel64) << " f32=" << fmt(rel32)
              << "\n";
    std::cout << "conditioning median ratio over " << args.probe_seeds
              << " seeds: " << fmt(probe.median_ratio) << "\n";
    return rel64 < 1e-6 ? kExitOk : kExitFailure;
}

// ---- capacity ---------------------------------------------------------------

int cmd_capacity(std::size_t m, double p, std::size_t n) {
    std::cout << relu_capacity({m, p, n}) << "\n";
    return kExitOk;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
    std::string dataset = "structured";
    std::size_t count = 200, classes = 4;
    std::vector<std::size_t> shape{3, 16, 16};
    std::string arch = "convnet:8,16";
    bool residual = false;
    std::size_t epochs = 30, batch = 16;
    double lr = 0.05;
    int precision = 32;
    std::uint64_t seed = 0;
    std::string out_dir;
};

std::vector<std::size_t> parse_widths(const std::string& list) {
    std::vector<std::size_t> widths;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) widths.push_back(std::stoull(item));
    return widths;
}

Model build_classifier(const TrainArgs& args, Precision prec) {
    SeededRng rng(args.seed);
    const std::size_t colon = args.arch.find(':');
    if (colon == std::string::npos)
        throw std::runtime_error("--arch must look like mlp:256,128 or convnet:8,16");
    const std::string family = args.arch.substr(0, colon);
    const std::vector<std::size_t> widths = parse_widths(args.arch.substr(colon + 1));
    if (family == "mlp") {
        std::vector<std::size_t> full = widths;
        full.push_back(args.classes);
        return build_mlp(shape_elems(args.shape), full, true, true, rng, prec);
    }
    if (family != "convnet")
        throw std::runtime_error("unknown architecture family: " + family);
    Model trunk = build_small_convnet(args.shape, widths.size(), widths, args.residual,
                                      rng, prec);
    std::vector<Layer> layers = trunk.layers();
    layers.push_back(Layer{FlattenLayer{}});
    const std::size_t feat = shape_elems(trunk.layer_shape(trunk.layer_count()));
    DenseLayer head;
    const double bound = std::sqrt(6.0 / static_cast<double>(feat));
    head.weights = Tensor({args.classes, feat}, prec);
    for (std::size_t i = 0; i < head.weights.size(); ++i)
        head.weights.set(i, bound * (2.0 * rng.next_uniform() - 1.0));
    head.bias = Tensor::zeros({args.classes}, prec);
    layers.push_back(Layer{std::move(head)});
    return Model(args.shape, std::move(layers), prec, args.seed, trunk.group_ends());
}

Dataset build_dataset(const TrainArgs& args, bool flatten_inputs, Precision prec) {
    Dataset ds = args.dataset == "noise"
                     ? make_noise_dataset(args.count, args.classes, 0.5, 1.0 / 3.0,
                                          args.shape, args.seed, prec)
                     : make_structured_dataset(args.count, args.classes, args.shape,
                                               args.seed, false, prec);
    if (flatten_inputs) {
        for (Tensor& t : ds.inputs) t = reshape(t, {t.size()});
    }
    return ds;
}

Tensor filter_grid(const Tensor& filters, const std::vector<std::size_t>& input_shape) {
    // [outC, inC, kh, kw] conv kernels tile horizontally; dense rows are
    // reshaped to the input geometry first
    Tensor tiles = filters;
    if (filters.rank() == 2) {
        const std::size_t show = std::min<std::size_t>(filters.shape()[0], 8);
        if (input_shape.size() == 3) {
            Tensor grid({input_shape[0], input_shape[1], show * input_shape[2]},
                        Precision::f64);
            const std::size_t plane = input_shape[1] * input_shape[2];
            for (std::size_t f = 0; f < show; ++f)
                for (std::size_t c = 0; c < input_shape[0]; ++c)
                    for (std::size_t y = 0; y < input_shape[1]; ++y)
                        for (std::size_t x = 0; x < input_shape[2]; ++x)
                            grid.set((c * input_shape[1] + y) * (show * input_shape[2]) +
                                         f * input_shape[2] + x,
                                     filters.at(f * filters.shape()[1] + c * plane +
                                                y * input_shape[2] + x));
            tiles = grid;
        } else {
            tiles = reshape(filters, {1, filters.shape()[0], filters.shape()[1]});
        }
    } else {
        const std::size_t out_c = filters.shape()[0], in_c = filters.shape()[1];
        const std::size_t kh = filters.shape()[2], kw = filters.shape()[3];
        const std::size_t show_c = in_c == 3 ? 3 : 1;
        Tensor grid({show_c, kh, out_c * kw}, Precision::f64);
        for (std::size_t f = 0; f < out_c; ++f)
            for (std::size_t c = 0; c < show_c; ++c)
                for (std::size_t y = 0; y < kh; ++y)
                    for (std::size_t x = 0; x < kw; ++x)
                        grid.set((c * kh + y) * (out_c * kw) + f * kw + x,
                                 filters.at(((f * in_c + c) * kh + y) * kw + x));
        tiles = grid;
    }
    double lo = tiles.at(0), hi = tiles.at(0);
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        lo = std::min(lo, tiles.at(i));
        hi = std::max(hi, tiles.at(i));
    }
    const double span = hi > lo ? hi - lo : 1.0;
    Tensor norm(tiles.shape(), Precision::f64);
    for (std::size_t i = 0; i < tiles.size(); ++i)
        norm.set(i, (tiles.at(i) - lo) / span);
    return norm;
}

int cmd_train(const CLI::App& sub, const TrainArgs& args) {
    require_set(args.out_dir, "--out");
    const Precision prec = precision_from_bits(args.precision);
    Model model = build_classifier(args, prec);
    const bool flat = model.input_shape().size() == 1;
    Dataset ds = build_dataset(args, flat, prec);
    const TrainResult result = train(model, ds, args.epochs, args.lr, args.batch, args.seed);

    const std::string header = file_header(sub, args.seed);
    const fs::path out_dir = args.out_dir;
    auto out = open_output(out_dir / "history.csv");
    out << header << "epoch,loss,accuracy\n";
    for (const EpochStats& e : result.history)
        out << e.epoch << "," << fmt(e.loss) << "," << fmt(e.accuracy) << "\n";
    save_model_manifest(result.model, (out_dir / "model.manifest").string());
    save_model_params(result.model, (out_dir / "model.params").string());
    write_pnm(filter_grid(first_layer_filters(result.model), args.shape),
              (out_dir / "filters.pgm").string());
    std::cout << "final accuracy: " << fmt(result.history.back().accuracy) << "\n";
    return kExitOk;
}

// ---- noise-compare ----------------------------------------------------------

struct CompareArgs {
    std::string target_path, out_dir;
    std::size_t iters = 400, candidates = 16, epochs = 20, count = 160, classes = 4;
    std::size_t batch = 16;
    double lr = 0.05;
    std::uint64_t seed = 0;
};

int cmd_noise_compare(const CLI::App& sub, const CompareArgs& args) {
    require_set(args.target_path, "--target");
    require_set(args.out_dir, "--out");
    if (!fs::exists(args.target_path))
        throw std::runtime_error("target image not found: " + args.target_path);
    TrainArgs base;
    base.seed = args.seed;
    base.classes = args.classes;
    base.count = args.count;
    base.epochs = args.epochs;
    base.lr = args.lr;
    base.batch = args.batch;
    Model untrained = build_classifier(base, Precision::f32);
    Tensor target = fit_target(read_pnm(args.target_path), untrained);

    TrainArgs structured = base;
    structured.dataset = "structured";
    TrainArgs noise = base;
    noise.dataset = "noise";

    std::vector<std::pair<std::string, Model>> variants;
    variants.emplace_back("untrained", untrained);
    variants.emplace_back("structured-trained",
                          train(untrained, build_dataset(structured, false, Precision::f32),
                                args.epochs, args.lr, args.batch, args.seed)
                              .model);
    variants.emplace_back("noise-trained",
                          train(untrained, build_dataset(noise, false, Precision::f32),
                                args.epochs, args.lr, args.batch, args.seed)
                              .model);

    auto out = open_output(fs::path(args.out_dir) / "compare.csv");
    out << file_header(sub, args.seed) << "model,m_g,m_s,m_i\n";
    for (const auto& [name, model] : variants) {
        const std::size_t layer = model.group_ends().back();
        InversionConfig tmpl;
        tmpl.layer = layer;
        tmpl.precision = Precision::f32;
        tmpl.seed = args.seed;
        const LineSearchResult search =
            epsilon_line_search(model, target, tmpl, args.candidates, args.seed);
        InversionConfig cfg = tmpl;
        cfg.iterations = args.iters;
        cfg.epsilon = EpsilonSchedule::linear_decay(search.best_c);
        const InversionResult run = invert(model, target, cfg);
        const MetricsRecord rec =
            compute_metrics(model, layer, target, run.a_g, 1.0 / 20.0, args.seed);
        out << name << "," << fmt(rec.m_g) << "," << fmt(rec.m_s) << "," << fmt(rec.m_i)
            << "\n";
    }
    return kExitOk;
}

// ---- epsilon-search -----------------------------------------------------------

struct SearchArgs {
    std::string model_path, params_path, target_path, out_dir;
    std::size_t layer = 0, candidates = 20, f_search = 80;
    double c_lo = 1e-4, c_hi = 1.0;
    int precision = 0;
    std::uint64_t seed = 0;
};

int cmd_epsilon_search(const CLI::App& sub, const SearchArgs& args) {
    require_set(args.model_path, "--model");
    require_set(args.target_path, "--target");
    require_set(args.out_dir, "--out");
    Model model = load_model_checked(args.model_path, args.params_path, args.precision);
    if (!fs::exists(args.target_path))
        throw std::runtime_error("target image not found: " + args.target_path);
    Tensor target = fit_target(read_pnm(args.target_path), model);
    InversionConfig tmpl;
    tmpl.layer = args.layer == 0 ? model.layer_count() : args.layer;
    tmpl.precision = model.precision();
    tmpl.seed = args.seed;
    const LineSearchResult res = epsilon_line_search(
        model, target, tmpl, args.candidates, args.seed, args.c_lo, args.c_hi, args.f_search);
    auto out = open_output(fs::path(args.out_dir) / "candidates.csv");
    out << file_header(sub, args.seed) << "candidate,epsilon,final_m_g,status\n";
    for (std::size_t i = 0; i < res.candidates.size(); ++i) {
        const EpsilonCandidate& cand = res.candidates[i];
        out << i << "," << fmt(cand.c) << ","
            << (cand.diverged ? "nan" : fmt(cand.final_m_g)) << ","
            << (cand.diverged ? "diverged" : "ok") << "\n";
    }
    std::cout << "best epsilon: " << fmt(res.best_c) << " (final m_g " << fmt(res.best_m_g)
              << ")\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 0; i < argc; ++i) {
        if (i) g_command_line += " ";
        g_command_line += argv[i];
    }

    CLI::App app{"desk-scale probes of hidden-layer representation content"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string invert_config, sweep_config, analytic_config, capacity_config,
        train_config, compare_config, search_config;
    InvertArgs invert_args;
    CLI::App* invert_cmd = app.add_subcommand("invert", "gradient-descend an input onto a target embedding");
    invert_cmd->add_option("--config", invert_config, "key = value config file");
    invert_cmd->add_option("--model", invert_args.model_path, "model manifest");
    invert_cmd->add_option("--params", invert_args.params_path, "trained parameter blob");
    invert_cmd->add_option("--target", invert_args.target_path, "target image (pnm)");
    invert_cmd->add_option("--layer", invert_args.layer, "embedding layer (0 = last)");
    invert_cmd->add_option("--iters", invert_args.iters, "gradient iterations");
    invert_cmd->add_option("--eps", invert_args.eps, "step size: <c> or decay:<c>");
    invert_cmd->add_option("--blur", invert_args.blur, "off or <sigma_start>:<sigma_end>");
    invert_cmd->add_flag("--clamp", invert_args.clamp, "clip the input to [0,1] each step");
    invert_cmd->add_option("--precision", invert_args.precision, "override precision (32|64)");
    invert_cmd->add_option("--seed", invert_args.seed, "run seed");
    invert_cmd->add_option("--out", invert_args.out_dir, "output directory");

    SweepArgs sweep_args;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "grid experiments over width, depth or iterations");
    sweep_cmd->add_option("--config", sweep_config, "key = value config file");
    sweep_cmd->add_option("--kind", sweep_args.kind, "width | depth | iterations")
        ->check(CLI::IsMember({"width", "depth", "iterations"}));
    sweep_cmd->add_option("--grid", sweep_args.grid, "grid values");
    sweep_cmd->add_option("--target", sweep_args.target_path, "target image");
    sweep_cmd->add_option("--iters", sweep_args.iters, "iterations per run");
    sweep_cmd->add_option("--candidates", sweep_args.candidates, "line-search candidates");
    sweep_cmd->add_option("--seed", sweep_args.seed, "run seed");
    sweep_cmd->add_option("--jobs", sweep_args.jobs, "parallel grid points");
    sweep_cmd->add_option("--precision", sweep_args.precision, "32|64");
    sweep_cmd->add_option("--out", sweep_args.out_dir, "output directory");

    AnalyticArgs analytic_args;
    CLI::App* analytic_cmd = app.add_subcommand("analytic", "exact inversion round trip and conditioning probe");
    analytic_cmd->add_option("--config", analytic_config, "key = value config file");
    analytic_cmd->add_option("--width", analytic_args.width, "layer width");
    analytic_cmd->add_option("--depth", analytic_args.depth, "layer count");
    analytic_cmd->add_option("--sigma-out", analytic_args.sigma_out, "output shift sigma");
    analytic_cmd->add_option("--sigma-in", analytic_args.sigma_in, "input shift sigma");
    analytic_cmd->add_option("--probe-seeds", analytic_args.probe_seeds, "probe repetitions");
    analytic_cmd->add_option("--seed", analytic_args.seed, "model seed");
    analytic_cmd->add_option("--out", analytic_args.out_dir, "output directory");

    std::size_t cap_m = 1, cap_n = 0;
    double cap_p = 0.5;
    CLI::App* capacity_cmd = app.add_subcommand("capacity", "minimum relu layer width m*(1/p)^n");
    capacity_cmd->add_option("--config", capacity_config, "key = value config file");
    capacity_cmd->add_option("--m", cap_m, "input element count");
    capacity_cmd->add_option("--p", cap_p, "probability a unit is zeroed");
    capacity_cmd->add_option("--n", cap_n, "layer depth");

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "train a small classifier and save it");
    train_cmd->add_option("--config", train_config, "key = value config file");
    train_cmd->add_option("--dataset", train_args.dataset, "noise | structured")
        ->check(CLI::IsMember({"noise", "structured"}));
    train_cmd->add_option("--count", train_args.count, "dataset size");
    train_cmd->add_option("--classes", train_args.classes, "class count");
    train_cmd->add_option("--shape", train_args.shape, "input shape C H W");
    train_cmd->add_option("--arch", train_args.arch, "mlp:<widths> or convnet:<channels>");
    train_cmd->add_flag("--residual", train_args.residual, "residual blocks in convnets");
    train_cmd->add_option("--epochs", train_args.epochs, "epochs");
    train_cmd->add_option("--lr", train_args.lr, "learning rate");
    train_cmd->add_option("--batch", train_args.batch, "batch size");
    train_cmd->add_option("--precision", train_args.precision, "32|64");
    train_cmd->add_option("--seed", train_args.seed, "seed");
    train_cmd->add_option("--out", train_args.out_dir, "output directory");

    CompareArgs compare_args;
    CLI::App* compare_cmd = app.add_subcommand("noise-compare", "invert one target through untrained, structured-trained and noise-trained models");
    compare_cmd->add_option("--config", compare_config, "key = value config file");
    compare_cmd->add_option("--target", compare_args.target_path, "target image");
    compare_cmd->add_option("--iters", compare_args.iters, "inversion iterations");
    compare_cmd->add_option("--candidates", compare_args.candidates, "line-search candidates");
    compare_cmd->add_option("--epochs", compare_args.epochs, "training epochs");
    compare_cmd->add_option("--count", compare_args.count, "training set size");
    compare_cmd->add_option("--classes", compare_args.classes, "class count");
    compare_cmd->add_option("--lr", compare_args.lr, "learning rate");
    compare_cmd->add_option("--batch", compare_args.batch, "batch size");
    compare_cmd->add_option("--seed", compare_args.seed, "seed");
    compare_cmd->add_option("--out", compare_args.out_dir, "output directory");

    SearchArgs search_args;
    CLI::App* search_cmd = app.add_subcommand("epsilon-search", "random line search for the step-size constant");
    search_cmd->add_option("--config", search_config, "key = value config file");
    search_cmd->add_option("--model", search_args.model_path, "model manifest");
    search_cmd->add_option("--params", search_args.params_path, "trained parameter blob");
    search_cmd->add_option("--target", search_args.target_path, "target image");
    search_cmd->add_option("--layer", search_args.layer, "embedding layer (0 = last)");
    search_cmd->add_option("--candidates", search_args.candidates, "candidate count");
    search_cmd->add_option("--f-search", search_args.f_search, "pilot iterations");
    search_cmd->add_option("--c-lo", search_args.c_lo, "lower bound");
    search_cmd->add_option("--c-hi", search_args.c_hi, "upper bound");
    search_cmd->add_option("--precision", search_args.precision, "override precision (32|64)");
    search_cmd->add_option("--seed", search_args.seed, "seed");
    search_cmd->add_option("--out", search_args.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitBadArgs;
    }

    try {
        if (invert_cmd->parsed()) {
            apply_config_file(*invert_cmd, invert_config);
            return cmd_invert(*invert_cmd, invert_args);
        }
        if (sweep_cmd->parsed()) {
            apply_config_file(*sweep_cmd, sweep_config);
            return cmd_sweep(*sweep_cmd, sweep_args);
        }
        if (analytic_cmd->parsed()) {
            apply_config_file(*analytic_cmd, analytic_config);
            return cmd_analytic(*analytic_cmd, analytic_args);
        }
        if (capacity_cmd->parsed()) {
            apply_config_file(*capacity_cmd, capacity_config);
            if (capacity_cmd->count("--m") + capacity_cmd->count("--p") +
                    capacity_cmd->count("--n") <
                3)
                throw std::runtime_error("capacity needs --m, --p and --n");
            return cmd_capacity(cap_m, cap_p, cap_n);
        }
        if (train_cmd->parsed()) {
            apply_config_file(*train_cmd, train_config);
            return cmd_train(*train_cmd, train_args);
        }
        if (compare_cmd->parsed()) {
            apply_config_file(*compare_cmd, compare_config);
            return cmd_noise_compare(*compare_cmd, compare_args);
        }
        if (search_cmd->parsed()) {
            apply_config_file(*search_cmd, search_config);
            return cmd_epsilon_search(*search_cmd, search_args);
        }
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const TrainingDivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadArgs;
    }
    return kExitBadArgs;
}
