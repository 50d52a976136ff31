#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "rarity/core.hpp"
#include "rarity/io.hpp"
#include "rarity/network.hpp"
#include "rarity/oracle.hpp"
#include "rarity/projection.hpp"
#include "rarity/synth.hpp"

namespace py = pybind11;
using namespace rarity;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image to_image(const Array& a) {
    if (a.ndim() != 2) throw std::invalid_argument("image must be a 2-D array");
    const auto h = static_cast<int>(a.shape(0));
    const auto w = static_cast<int>(a.shape(1));
    std::vector<double> data(a.data(), a.data() + a.size());
    if (!std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); }))
        throw std::invalid_argument("image values must be finite");
    return Image(w, h, std::move(data));
}

Array to_array(const std::vector<double>& values, int width, int height) {
    Array out({height, width});
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

Array to_array(const Image& img) {
    return to_array(std::vector<double>(img.data().begin(), img.data().end()), img.width(), img.height());
}

Array vector_array(const std::vector<double>& values) {
    Array out(static_cast<py::ssize_t>(values.size()));
    std::copy(values.begin(), values.end(), out.mutable_data());
    return out;
}

Shape shape_from_mask(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& m) {
    if (m.ndim() != 2) throw std::invalid_argument("mask must be a 2-D array");
    return Shape(static_cast<int>(m.shape(1)), static_cast<int>(m.shape(0)),
                 std::vector<std::uint8_t>(m.data(), m.data() + m.size()));
}

py::tuple origin_tuple(Origin r) { return py::make_tuple(r.x, r.y); }

ScoringParams scoring_params(int passes, double a, std::uint64_t seed, const std::string& mode,
                             bool normalize, const std::string& method, unsigned threads) {
    ScoringParams p;
    p.passes = passes;
    p.a = a;
    p.seed = seed;
    p.mode = parse_mode(mode);
    p.normalize_by_block_dev = normalize;
    p.method = parse_method(method);
    p.threads = threads;
    return p;
}

}  // namespace

PYBIND11_MODULE(_rarity, m) {
    m.doc() = "Rare-block detection in grayscale images";

    py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_IOError);

    py::class_<Shape>(m, "Shape")
        .def(py::init(&shape_from_mask), py::arg("mask"),
             "Shape from a 2-D mask; nonzero entries are support.")
        .def_static("square", &Shape::square, py::arg("side"))
        .def_static("rectangle", &Shape::rectangle, py::arg("width"), py::arg("height"))
        .def_property_readonly("width", &Shape::width)
        .def_property_readonly("height", &Shape::height)
        .def_property_readonly("support_size", &Shape::support_size)
        .def_property_readonly("diameter", &Shape::diameter)
        .def("__repr__", [](const Shape& s) {
            return "Shape(" + std::to_string(s.width()) + "x" + std::to_string(s.height()) + ", " +
                   std::to_string(s.support_size()) + " px)";
        });

    m.def("read_image", [](const std::string& path) { return to_array(io::read_image(path)); },
          py::arg("path"), "Load a PGM or grayscale PNG as a float array in [0, 1].");

    m.def("default_threshold", &default_threshold, py::arg("side"));

    m.def(
        "sample_operator",
        [](const Shape& shape, std::uint64_t seed) { return vector_array(sample_operator(shape, seed).values); },
        py::arg("shape"), py::arg("seed"), "Zero-mean unit-norm operator over the shape support.");

    m.def(
        "project",
        [](const Array& image, const Shape& shape, std::uint64_t seed, const std::string& method) {
            const Image img = to_image(image);
            ProjectionField f;
            {
                py::gil_scoped_release release;
                f = project_all(img, shape, sample_operator(shape, seed), parse_method(method));
            }
            return py::make_tuple(to_array(f.values, f.region.width, f.region.height), f.sigma);
        },
        py::arg("image"), py::arg("shape"), py::arg("seed"), py::arg("method") = "auto",
        "Projection values over the origin region and their standard deviation.");

    m.def(
        "score_image",
        [](const Array& image, const Shape& shape, int passes, double a, std::uint64_t seed,
           const std::string& mode, bool normalize, const std::string& method, unsigned threads) {
            const Image img = to_image(image);
            const auto params = scoring_params(passes, a, seed, mode, normalize, method, threads);
            ScoreMap map;
            {
                py::gil_scoped_release release;
                map = score_image(img, shape, params);
            }
            return to_array(map.values, map.region.width, map.region.height);
        },
        py::arg("image"), py::arg("shape"), py::arg("passes") = 30, py::arg("a") = 12.0,
        py::arg("seed") = 0, py::arg("mode") = "count", py::arg("normalize") = false,
        py::arg("method") = "auto", py::arg("threads") = 1,
        "Per-origin rarity scores from thresholded random projections.");

    m.def(
        "top_candidates",
        [](const Array& scores, const Shape& shape, std::size_t k, const std::string& rule) {
            if (scores.ndim() != 2) throw std::invalid_argument("scores must be a 2-D array");
            const OriginRegion region(static_cast<int>(scores.shape(1)), static_cast<int>(scores.shape(0)));
            const std::span<const double> values(scores.data(), static_cast<std::size_t>(scores.size()));
            py::list out;
            for (const auto& c : top_candidates(region, values, k, shape, parse_separation(rule)))
                out.append(py::make_tuple(c.origin.x, c.origin.y, c.score));
            return out;
        },
        py::arg("scores"), py::arg("shape"), py::arg("k") = 5, py::arg("rule") = "chebyshev",
        "Highest-scoring non-overlapping origins as (x, y, score).");

    m.def(
        "nn_distance_map",
        [](const Array& image, const Shape& shape, const std::string& norm, const std::string& rule,
           unsigned threads) {
            const Image img = to_image(image);
            DistanceMap map;
            {
                py::gil_scoped_release release;
                map = nn_distance_map(img, shape, {parse_norm(norm), parse_separation(rule), threads});
            }
            return to_array(map.values, map.region.width, map.region.height);
        },
        py::arg("image"), py::arg("shape"), py::arg("norm") = "l2", py::arg("rule") = "chebyshev",
        py::arg("threads") = 1, "Distance from each block to its nearest disjoint block.");

    m.def(
        "rarest_block",
        [](const Array& image, const Shape& shape, const std::string& norm, const std::string& rule,
           unsigned threads) {
            const Image img = to_image(image);
            RarestBlock b;
            {
                py::gil_scoped_release release;
                b = rarest_block(img, shape, {parse_norm(norm), parse_separation(rule), threads});
            }
            return py::make_tuple(b.origin.x, b.origin.y, b.distance);
        },
        py::arg("image"), py::arg("shape"), py::arg("norm") = "l2", py::arg("rule") = "chebyshev",
        py::arg("threads") = 1, "Exact rarest block as (x, y, distance).");

    m.def(
        "projection_histogram",
        [](const Array& image, const Shape& shape, int passes, std::size_t bins, std::uint64_t seed) {
            const Image img = to_image(image);
            Histogram h;
            {
                py::gil_scoped_release release;
                h = projection_histogram(img, shape, passes, bins, seed);
            }
            py::dict out;
            out["centers"] = vector_array(h.centers);
            out["counts"] = h.counts;
            out["total"] = h.total;
            out["mean"] = h.moments.mean;
            out["sd"] = h.moments.sd;
            out["excess_kurtosis"] = h.moments.excess_kurtosis;
            return out;
        },
        py::arg("image"), py::arg("shape"), py::arg("passes") = 30, py::arg("bins") = 257,
        py::arg("seed") = 0, "Pooled histogram and moments of projection values.");

    m.def(
        "run_network",
        [](const Array& image, const Shape& shape, int passes, std::uint64_t seed, double a,
           double delta, std::optional<double> beta, std::optional<double> h0, double fraction,
           std::size_t weight_cap, const std::string& activation, unsigned threads) {
            const Image img = to_image(image);
            ScoringParams scoring;
            scoring.passes = passes;
            scoring.seed = seed;
            scoring.threads = threads;
            NetworkParams params;
            params.a = a;
            params.delta = delta;
            params.beta = beta;
            params.h0 = h0;
            params.target_fraction = fraction;
            params.weight_cap = weight_cap;
            params.threads = threads;
            if (activation == "logistic")
                params.activation = Activation::Logistic;
            else if (activation == "tanh")
                params.activation = Activation::Tanh;
            else
                throw std::invalid_argument("unknown activation: " + activation);
            NetworkResult r;
            {
                py::gil_scoped_release release;
                r = run_network(img, shape, scoring, params);
            }
            py::dict out;
            out["activity"] = to_array(r.activity, r.region.width, r.region.height);
            out["field"] = to_array(r.field, r.region.width, r.region.height);
            out["h0"] = r.h0;
            out["beta"] = r.beta;
            out["threshold"] = r.calibration.threshold;
            out["active_fraction"] = r.calibration.fraction;
            out["within_tolerance"] = r.calibration.within_tolerance;
            out["status"] = to_string(r.status);
            out["iterations"] = r.iterations;
            out["weight_pairs"] = r.weights.pairs();
            return out;
        },
        py::arg("image"), py::arg("shape"), py::arg("passes") = 30, py::arg("seed") = 0,
        py::arg("a") = 3.0, py::arg("delta") = std::numeric_limits<double>::infinity(),
        py::arg("beta") = py::none(), py::arg("h0") = py::none(), py::arg("fraction") = 0.02,
        py::arg("weight_cap") = 64, py::arg("activation") = "logistic", py::arg("threads") = 1,
        "Inhibitory network refinement; returns activity, field and calibration details.");

    m.def(
        "synthesize",
        [](const std::string& spec_json) {
            const auto g = synth::generate(synth::spec_from_json(nlohmann::json::parse(spec_json)));
            py::list truth;
            for (Origin r : g.truth) truth.append(origin_tuple(r));
            return py::make_tuple(to_array(g.image), truth);
        },
        py::arg("spec_json"), "Generate a synthetic image from a JSON spec string.");
}
