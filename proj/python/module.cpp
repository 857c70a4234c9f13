// Python bindings for the core operations: model building, forward and
// gradient evaluation, gradient-descent inversion, exact linear inversion,
// the relu capacity calculator and small training runs.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "reprobe/analytic.hpp"
#include "reprobe/autodiff.hpp"
#include "reprobe/inversion.hpp"
#include "reprobe/manifest.hpp"
#include "reprobe/trainer.hpp"

namespace py = pybind11;
using namespace reprobe;

namespace {

Precision precision_arg(int bits) { return precision_from_bits(bits); }

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr,
                         int bits) {
    std::vector<std::size_t> shape;
    for (py::ssize_t i = 0; i < arr.ndim(); ++i)
        shape.push_back(static_cast<std::size_t>(arr.shape(i)));
    std::vector<double> values(arr.data(), arr.data() + arr.size());
    return Tensor::from_values(shape, values, precision_arg(bits));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape;
    for (std::size_t d : t.shape()) shape.push_back(static_cast<py::ssize_t>(d));
    py::array_t<double> arr(shape);
    auto buf = arr.mutable_unchecked();
    double* data = arr.mutable_data();
    (void)buf;
    for (std::size_t i = 0; i < t.size(); ++i) data[i] = t.at(i);
    return arr;
}

InversionConfig config_from_kwargs(std::size_t layer, std::size_t iterations, double eps_c,
                                   bool eps_decay, bool blur_on, double blur_start,
                                   double blur_end, bool clamp, int precision,
                                   std::uint64_t seed) {
    InversionConfig cfg;
    cfg.layer = layer;
    cfg.iterations = iterations;
    cfg.epsilon = eps_decay ? EpsilonSchedule::linear_decay(eps_c)
                            : EpsilonSchedule::constant(eps_c);
    cfg.blur = blur_on ? BlurSchedule::linear(blur_start, blur_end) : BlurSchedule::off();
    cfg.clamp_input = clamp;
    cfg.precision = precision_arg(precision);
    cfg.seed = seed;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "desk-scale probes of hidden-layer representation content";
    m.attr("__version__") = "0.1.0";

    py::class_<Model>(m, "Model")
        .def_property_readonly("layer_count", &Model::layer_count)
        .def_property_readonly("input_shape",
                               [](const Model& model) { return model.input_shape(); })
        .def_property_readonly("precision",
                               [](const Model& model) { return precision_bits(model.precision()); })
        .def_property_readonly("group_ends",
                               [](const Model& model) { return model.group_ends(); })
        .def_property_readonly("shrinks_information", &Model::shrinks_information)
        .def("layer_shape", &Model::layer_shape)
        .def("count_layer_elements",
             [](const Model& model, std::size_t l) { return count_layer_elements(model, l); })
        .def("manifest", &model_to_manifest);

    py::class_<LinearModel>(m, "LinearModel")
        .def_property_readonly("width", [](const LinearModel& lm) { return lm.width; })
        .def_property_readonly("depth",
                               [](const LinearModel& lm) { return lm.weights.size(); });

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("size", [](const Dataset& ds) { return ds.inputs.size(); })
        .def_property_readonly("num_classes",
                               [](const Dataset& ds) { return ds.num_classes; })
        .def_property_readonly("labels", [](const Dataset& ds) { return ds.labels; })
        .def("input",
             [](const Dataset& ds, std::size_t i) { return array_from_tensor(ds.inputs.at(i)); });

    m.def(
        "build_mlp",
        [](std::size_t input_elems, const std::vector<std::size_t>& widths, bool use_bias,
           bool use_relu, std::uint64_t seed, int precision) {
            SeededRng rng(seed);
            return build_mlp(input_elems, widths, use_bias, use_relu, rng,
                             precision_arg(precision));
        },
        py::arg("input_elems"), py::arg("hidden_widths"), py::arg("use_bias") = true,
        py::arg("use_relu") = false, py::arg("seed") = 0, py::arg("precision") = 32);

    m.def(
        "build_small_convnet",
        [](const std::vector<std::size_t>& input_shape, std::size_t blocks,
           const std::vector<std::size_t>& channels, bool with_residual, std::uint64_t seed,
           int precision) {
            SeededRng rng(seed);
            return build_small_convnet(input_shape, blocks, channels, with_residual, rng,
                                       precision_arg(precision));
        },
        py::arg("input_shape"), py::arg("blocks"), py::arg("channels"),
        py::arg("with_residual") = false, py::arg("seed") = 0, py::arg("precision") = 32);

    m.def("load_model", &load_model, py::arg("manifest_path"), py::arg("params_path") = "");
    m.def("save_model_manifest", &save_model_manifest);
    m.def("save_model_params", &save_model_params);

    m.def(
        "forward_to_layer",
        [](const Model& model, const py::array_t<double>& a, std::size_t l) {
            return array_from_tensor(forward_to_layer(
                model, precision_cast(tensor_from_array(a, 64), model.precision()), l));
        },
        py::arg("model"), py::arg("a"), py::arg("layer"));

    m.def(
        "input_gradient",
        [](const Model& model, std::size_t l, const py::array_t<double>& a_n,
           const py::array_t<double>& y_hat) {
            return array_from_tensor(input_gradient(
                model, l, precision_cast(tensor_from_array(a_n, 64), model.precision()),
                precision_cast(tensor_from_array(y_hat, 64), model.precision())));
        },
        py::arg("model"), py::arg("layer"), py::arg("a_n"), py::arg("y_hat"));

    m.def(
        "gaussian_draw",
        [](std::uint64_t seed, const std::vector<std::size_t>& shape, double mu, double sigma) {
            SeededRng rng(seed);
            return array_from_tensor(gaussian_draw(rng, shape, mu, sigma));
        },
        py::arg("seed"), py::arg("shape"), py::arg("mu") = 0.0, py::arg("sigma") = 1.0);

    m.def(
        "blur",
        [](const py::array_t<double>& image, double sigma) {
            return array_from_tensor(blur(tensor_from_array(image, 64), sigma));
        },
        py::arg("image"), py::arg("sigma"));

    m.def(
        "bilinear_downsample",
        [](const py::array_t<double>& image, std::size_t out_h, std::size_t out_w) {
            return array_from_tensor(
                bilinear_downsample(tensor_from_array(image, 64), out_h, out_w));
        },
        py::arg("image"), py::arg("out_h"), py::arg("out_w"));

    m.def(
        "invert",
        [](const Model& model, const py::array_t<double>& target, std::size_t layer,
           std::size_t iterations, double eps_c, bool eps_decay, bool blur_on,
           double blur_start, double blur_end, bool clamp, std::uint64_t seed) {
            const InversionConfig cfg = config_from_kwargs(
                layer == 0 ? model.layer_count() : layer, iterations, eps_c, eps_decay,
                blur_on, blur_start, blur_end, clamp, precision_bits(model.precision()),
                seed);
            const InversionResult run = invert(
                model, precision_cast(tensor_from_array(target, 64), model.precision()), cfg);
            py::dict out;
            out["a_g"] = array_from_tensor(run.a_g);
            py::list trace;
            for (const TraceRow& row : run.trace)
                trace.append(py::make_tuple(row.n, row.l1_objective, row.m_g, row.m_i));
            out["trace"] = trace;
            return out;
        },
        py::arg("model"), py::arg("target"), py::arg("layer") = 0,
        py::arg("iterations") = 200, py::arg("eps_c") = 0.05, py::arg("eps_decay") = true,
        py::arg("blur_on") = false, py::arg("blur_start") = 2.4, py::arg("blur_end") = 0.4,
        py::arg("clamp") = false, py::arg("seed") = 0);

    m.def(
        "compute_metrics",
        [](const Model& model, std::size_t l, const py::array_t<double>& a,
           const py::array_t<double>& a_g, double sigma_ref, std::uint64_t seed) {
            const MetricsRecord rec = compute_metrics(
                model, l, precision_cast(tensor_from_array(a, 64), model.precision()),
                precision_cast(tensor_from_array(a_g, 64), model.precision()), sigma_ref,
                seed);
            py::dict out;
            out["m_g"] = rec.m_g;
            out["m_s"] = rec.m_s;
            out["m_i"] = rec.m_i;
            out["seed"] = rec.seed;
            out["layer"] = rec.layer;
            return out;
        },
        py::arg("model"), py::arg("layer"), py::arg("a"), py::arg("a_g"),
        py::arg("sigma_ref") = 0.05, py::arg("seed") = 0);

    m.def(
        "shifted_input",
        [](const py::array_t<double>& a, double sigma, std::uint64_t seed) {
            return array_from_tensor(shifted_input(tensor_from_array(a, 64), sigma, seed));
        },
        py::arg("a"), py::arg("sigma"), py::arg("seed"));

    m.def(
        "epsilon_line_search",
        [](const Model& model, const py::array_t<double>& target, std::size_t layer,
           std::size_t candidates, std::uint64_t seed, double c_lo, double c_hi,
           std::size_t f_search) {
            InversionConfig tmpl;
            tmpl.layer = layer == 0 ? model.layer_count() : layer;
            tmpl.precision = model.precision();
            tmpl.seed = seed;
            const LineSearchResult res = epsilon_line_search(
                model, precision_cast(tensor_from_array(target, 64), model.precision()),
                tmpl, candidates, seed, c_lo, c_hi, f_search);
            py::dict out;
            out["best_c"] = res.best_c;
            out["best_m_g"] = res.best_m_g;
            return out;
        },
        py::arg("model"), py::arg("target"), py::arg("layer") = 0,
        py::arg("candidates") = 20, py::arg("seed") = 0, py::arg("c_lo") = 1e-4,
        py::arg("c_hi") = 1.0, py::arg("f_search") = 80);

    m.def(
        "build_linear_model",
        [](std::size_t width, std::size_t depth, std::uint64_t seed, int precision) {
            SeededRng rng(seed);
            return build_linear_model(width, depth, rng, precision_arg(precision));
        },
        py::arg("width"), py::arg("depth"), py::arg("seed") = 0, py::arg("precision") = 64);

    m.def(
        "linear_forward",
        [](const LinearModel& lm, const py::array_t<double>& x) {
            return array_from_tensor(
                linear_forward(lm, precision_cast(tensor_from_array(x, 64), lm.precision)));
        },
        py::arg("model"), py::arg("x"));

    m.def(
        "invert_linear",
        [](const LinearModel& lm, const py::array_t<double>& o) {
            const LinearInverseResult res =
                invert_linear(lm, precision_cast(tensor_from_array(o, 64), lm.precision));
            py::dict out;
            out["x"] = array_from_tensor(res.x);
            out["warning"] = res.warning;
            return out;
        },
        py::arg("model"), py::arg("o"));

    m.def(
        "conditioning_probe",
        [](const LinearModel& lm, const py::array_t<double>& a, double sigma_out,
           double sigma_in, const std::vector<std::uint64_t>& seeds) {
            const ConditioningResult res = conditioning_probe(
                lm, precision_cast(tensor_from_array(a, 64), lm.precision), sigma_out,
                sigma_in, seeds);
            py::list rows;
            for (const ConditioningRow& row : res.rows)
                rows.append(py::make_tuple(row.seed, row.dist_a_app, row.dist_a_ap, row.ratio));
            py::dict out;
            out["rows"] = rows;
            out["median_ratio"] = res.median_ratio;
            return out;
        },
        py::arg("model"), py::arg("a"), py::arg("sigma_out") = 1e-3,
        py::arg("sigma_in") = 0.05, py::arg("seeds") = std::vector<std::uint64_t>{0});

    m.def(
        "relu_capacity",
        [](std::size_t m_elems, double p, std::size_t n) {
            return relu_capacity({m_elems, p, n});
        },
        py::arg("m"), py::arg("p"), py::arg("n"));

    m.def(
        "estimate_zero_fraction",
        [](const Model& model, const std::vector<py::array_t<double>>& inputs) {
            std::vector<Tensor> tensors;
            for (const auto& arr : inputs)
                tensors.push_back(precision_cast(tensor_from_array(arr, 64), model.precision()));
            return estimate_zero_fraction(model, tensors);
        },
        py::arg("model"), py::arg("inputs"));

    m.def(
        "make_noise_dataset",
        [](std::size_t count, std::size_t classes, double mu, double sigma,
           const std::vector<std::size_t>& shape, std::uint64_t seed) {
            return make_noise_dataset(count, classes, mu, sigma, shape, seed);
        },
        py::arg("count"), py::arg("classes"), py::arg("mu") = 0.5,
        py::arg("sigma") = 1.0 / 3.0, py::arg("shape") = std::vector<std::size_t>{3, 16, 16},
        py::arg("seed") = 0);

    m.def(
        "make_structured_dataset",
        [](std::size_t count, std::size_t classes, const std::vector<std::size_t>& shape,
           std::uint64_t seed, bool stratified) {
            return make_structured_dataset(count, classes, shape, seed, stratified);
        },
        py::arg("count"), py::arg("classes"),
        py::arg("shape") = std::vector<std::size_t>{3, 16, 16}, py::arg("seed") = 0,
        py::arg("stratified") = false);

    m.def(
        "train",
        [](const Model& model, const Dataset& ds, std::size_t epochs, double lr,
           std::size_t batch, std::uint64_t seed) {
            const TrainResult res = train(model, ds, epochs, lr, batch, seed);
            py::list history;
            for (const EpochStats& e : res.history)
                history.append(py::make_tuple(e.epoch, e.loss, e.accuracy));
            return py::make_tuple(res.model, history);
        },
        py::arg("model"), py::arg("dataset"), py::arg("epochs"), py::arg("lr") = 0.05,
        py::arg("batch") = 32, py::arg("seed") = 0);
}
