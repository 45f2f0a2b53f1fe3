// Python bindings for the core pipeline operations.

#include <cmath>
#include <cstring>
#include <optional>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "surimi/augmentation.hpp"
#include "surimi/evaluation.hpp"
#include "surimi/positioning.hpp"
#include "surimi/synthgen.hpp"

namespace py = pybind11;
using namespace surimi;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) {
    py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
    std::memcpy(a.mutable_data(), v.data(), v.size() * sizeof(double));
    return a;
}

py::array_t<int> to_array(const std::vector<int>& v) {
    py::array_t<int> a(static_cast<py::ssize_t>(v.size()));
    std::memcpy(a.mutable_data(), v.data(), v.size() * sizeof(int));
    return a;
}

py::array_t<double> matrix_array(const std::vector<double>& v, std::size_t rows,
                                 std::size_t cols) {
    py::array_t<double> a({rows, cols});
    std::memcpy(a.mutable_data(), v.data(), v.size() * sizeof(double));
    return a;
}

// struct-of-arrays view over predictions
struct Predictions {
    std::vector<PredictedLabels> rows;
};

struct CGanSet {
    std::vector<CGan> gans;
    CGanSet() = default;
    CGanSet(CGanSet&&) = default;
    CGanSet& operator=(CGanSet&&) = default;
    CGanSet(const CGanSet&) = delete;  // vector<CGan> holds move-only nets
    CGanSet& operator=(const CGanSet&) = delete;
};

std::vector<double> matrix_from_numpy(const py::array_t<double>& arr,
                                      std::size_t* rows, std::size_t* cols) {
    const auto buf = arr.request();
    if (buf.ndim != 2) throw ShapeError("expected a 2-D array");
    *rows = static_cast<std::size_t>(buf.shape[0]);
    *cols = static_cast<std::size_t>(buf.shape[1]);
    std::vector<double> out(*rows * *cols);
    const auto r = arr.unchecked<2>();
    for (std::size_t i = 0; i < *rows; ++i)
        for (std::size_t j = 0; j < *cols; ++j)
            out[i * *cols + j] =
                r(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(j));
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Radio-map augmentation pipeline: data model, CNN-LSTM "
              "positioning, conditional GAN augmentation, evaluation.";
    m.attr("__version__") = kVersion;
    m.attr("E") = M_E;

    py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<InvalidStateError>(m, "InvalidStateError",
                                              PyExc_RuntimeError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_RuntimeError);
    py::register_exception<ProvenanceError>(m, "ProvenanceError",
                                            PyExc_RuntimeError);

    py::class_<RadioMap>(m, "RadioMap")
        .def_property_readonly("m", &RadioMap::m)
        .def_property_readonly("n", &RadioMap::n)
        .def_property_readonly("rss",
                               [](const RadioMap& rm) {
                                   return matrix_array(rm.rss, rm.m(), rm.n());
                               })
        .def_property_readonly(
            "x", [](const RadioMap& rm) { return to_array(rm.labels.x); })
        .def_property_readonly(
            "y", [](const RadioMap& rm) { return to_array(rm.labels.y); })
        .def_property_readonly(
            "z", [](const RadioMap& rm) { return to_array(rm.labels.z); })
        .def_property_readonly(
            "floor",
            [](const RadioMap& rm) { return to_array(rm.labels.floor); })
        .def_property_readonly(
            "building",
            [](const RadioMap& rm) { return to_array(rm.labels.building); })
        .def_property_readonly("ap_ids",
                               [](const RadioMap& rm) { return rm.ap_ids; })
        .def_property_readonly(
            "num_floors",
            [](const RadioMap& rm) { return rm.labels.num_floors(); })
        .def_property_readonly(
            "num_buildings",
            [](const RadioMap& rm) { return rm.labels.num_buildings(); })
        .def_property_readonly("representation",
                               [](const RadioMap& rm) {
                                   return std::string(
                                       to_string(rm.representation));
                               })
        .def_property_readonly("synthetic_count", &RadioMap::synthetic_count)
        .def("__repr__", [](const RadioMap& rm) {
            return "<RadioMap " + std::to_string(rm.m()) + "x" +
                   std::to_string(rm.n()) + " " + to_string(rm.representation) +
                   ">";
        });

    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("n_aps", &SynthConfig::n_aps)
        .def_readwrite("floors", &SynthConfig::floors)
        .def_readwrite("buildings", &SynthConfig::buildings)
        .def_readwrite("area_x", &SynthConfig::area_x)
        .def_readwrite("area_y", &SynthConfig::area_y)
        .def_readwrite("floor_height", &SynthConfig::floor_height)
        .def_readwrite("train_points", &SynthConfig::train_points)
        .def_readwrite("test_points", &SynthConfig::test_points)
        .def_readwrite("tx_power_dbm", &SynthConfig::tx_power_dbm)
        .def_readwrite("path_loss_exponent", &SynthConfig::path_loss_exponent)
        .def_readwrite("floor_attenuation_db",
                       &SynthConfig::floor_attenuation_db)
        .def_readwrite("noise_std_db", &SynthConfig::noise_std_db)
        .def_readwrite("detection_threshold_dbm",
                       &SynthConfig::detection_threshold_dbm)
        .def_readwrite("seed", &SynthConfig::seed);

    m.def("synth_generate", [](const SynthConfig& cfg) {
        auto [train, test] = synth_generate(cfg);
        return py::make_tuple(std::move(train), std::move(test));
    });

    m.def(
        "load_dataset",
        [](const std::string& path, const std::string& schema_json) {
            const DatasetSchema schema =
                schema_json.empty() ? DatasetSchema{}
                                    : DatasetSchema::from_json_text(schema_json);
            return load_dataset(path, schema);
        },
        py::arg("path"), py::arg("schema_json") = "");
    m.def("save_dataset", &save_dataset, py::arg("radiomap"), py::arg("path"));
    m.def("to_powed", &to_powed, py::arg("radiomap"), py::arg("beta") = M_E);
    m.def("one_hot", &one_hot, py::arg("index"), py::arg("num_classes"));

    py::class_<Predictions>(m, "Predictions")
        .def("__len__", [](const Predictions& p) { return p.rows.size(); })
        .def_property_readonly("x",
                               [](const Predictions& p) {
                                   std::vector<double> v;
                                   for (const auto& r : p.rows) v.push_back(r.x);
                                   return to_array(v);
                               })
        .def_property_readonly("y",
                               [](const Predictions& p) {
                                   std::vector<double> v;
                                   for (const auto& r : p.rows) v.push_back(r.y);
                                   return to_array(v);
                               })
        .def_property_readonly("z",
                               [](const Predictions& p) {
                                   std::vector<double> v;
                                   for (const auto& r : p.rows) v.push_back(r.z);
                                   return to_array(v);
                               })
        .def_property_readonly("floor",
                               [](const Predictions& p) {
                                   std::vector<int> v;
                                   for (const auto& r : p.rows)
                                       v.push_back(r.floor);
                                   return to_array(v);
                               })
        .def_property_readonly("building",
                               [](const Predictions& p) {
                                   std::vector<int> v;
                                   for (const auto& r : p.rows)
                                       v.push_back(r.building);
                                   return to_array(v);
                               })
        .def("floor_probs", [](const Predictions& p, std::size_t i) {
            return to_array(p.rows.at(i).floor_probs);
        });

    py::class_<PositioningModel>(m, "PositioningModel")
        .def_property_readonly("cf",
                               [](const PositioningModel& pm) { return pm.cf; })
        .def_property_readonly("cb",
                               [](const PositioningModel& pm) { return pm.cb; })
        .def(
            "predict",
            [](PositioningModel& model, const RadioMap& rm) {
                return Predictions{predict(model, rm)};
            },
            py::arg("radiomap"))
        .def(
            "predict_matrix",
            [](PositioningModel& model, const py::array_t<double>& arr) {
                std::size_t rows, cols;
                auto flat = matrix_from_numpy(arr, &rows, &cols);
                if (cols != static_cast<std::size_t>(model.input_width()))
                    throw ShapeError("matrix width does not match the model");
                return Predictions{predict(model, flat, rows)};
            },
            py::arg("fingerprints"));

    m.def(
        "train_positioning",
        [](const RadioMap& rm, std::uint64_t seed, std::optional<int> epochs,
           std::optional<int> batch_size, std::optional<double> learning_rate,
           std::optional<int> patience) {
            TrainOverrides ov;
            ov.epochs = epochs;
            ov.batch_size = batch_size;
            ov.learning_rate = learning_rate;
            ov.patience = patience;
            return train_positioning(rm, seed, ov);
        },
        py::arg("radiomap"), py::arg("seed"), py::kw_only(),
        py::arg("epochs") = std::nullopt, py::arg("batch_size") = std::nullopt,
        py::arg("learning_rate") = std::nullopt,
        py::arg("patience") = std::nullopt);
    m.def("save_bundle", &save_bundle, py::arg("model"), py::arg("directory"));
    m.def("load_bundle", &load_bundle, py::arg("directory"));

    m.def(
        "knn_predict",
        [](const RadioMap& train, const RadioMap& test, int k) {
            return Predictions{knn_predict(train, test, k)};
        },
        py::arg("train"), py::arg("test"), py::arg("k") = 1);

    m.def(
        "positioning_errors",
        [](const Predictions& preds, const RadioMap& truth) {
            const auto e = positioning_errors(preds.rows, truth.labels);
            py::dict d;
            d["e2d"] = e.e2d;
            d["e3d"] = e.e3d;
            d["floor_hit"] = e.floor_hit;
            d["building_hit"] = e.building_hit;
            return d;
        },
        py::arg("predictions"), py::arg("truth"));

    py::class_<CGanSet>(m, "CGanSet")
        .def("__len__", [](const CGanSet& s) { return s.gans.size(); })
        .def_property_readonly("d_loss",
                               [](const CGanSet& s) {
                                   std::vector<std::vector<double>> out;
                                   for (const auto& g : s.gans)
                                       out.push_back(g.d_loss_history);
                                   return out;
                               })
        .def_property_readonly("g_loss",
                               [](const CGanSet& s) {
                                   std::vector<std::vector<double>> out;
                                   for (const auto& g : s.gans)
                                       out.push_back(g.g_loss_history);
                                   return out;
                               })
        .def(
            "generate",
            [](CGanSet& s, std::size_t index, int count, std::uint64_t seed) {
                CGan& g = s.gans.at(index);
                Latent lat =
                    sample_latent(count, g.n, g.conditional_classes, seed);
                const auto fp =
                    g.generator.forward({&lat.z, &lat.labels}, false, nullptr);
                return matrix_array(fp.data, static_cast<std::size_t>(count),
                                    static_cast<std::size_t>(g.n));
            },
            py::arg("index"), py::arg("count"), py::arg("seed"));

    m.def(
        "train_cgan",
        [](const RadioMap& rm, const std::string& method, int epochs,
           int batch_size, double learning_rate, std::uint64_t seed) {
            GanTrainOptions opts;
            opts.epochs = epochs;
            opts.batch_size = batch_size;
            opts.learning_rate = learning_rate;
            CGanSet out;
            out.gans =
                train_cgan(rm, gan_method_from_string(method), opts, seed);
            return out;
        },
        py::arg("radiomap"), py::arg("method") = "M3", py::kw_only(),
        py::arg("epochs") = 14, py::arg("batch_size") = 64,
        py::arg("learning_rate") = 0.0002, py::arg("seed") = 1);

    py::class_<AugmentedSet>(m, "AugmentedSet")
        .def_property_readonly("phi",
                               [](const AugmentedSet& a) { return a.size(); })
        .def_property_readonly(
            "candidates_evaluated",
            [](const AugmentedSet& a) { return a.candidates_evaluated; })
        .def_property_readonly("fingerprints",
                               [](const AugmentedSet& a) {
                                   return matrix_array(
                                       a.fingerprints, a.size(),
                                       static_cast<std::size_t>(a.n));
                               })
        .def_property_readonly(
            "x", [](const AugmentedSet& a) { return to_array(a.labels.x); })
        .def_property_readonly(
            "y", [](const AugmentedSet& a) { return to_array(a.labels.y); })
        .def_property_readonly(
            "z", [](const AugmentedSet& a) { return to_array(a.labels.z); })
        .def_property_readonly(
            "floor",
            [](const AugmentedSet& a) { return to_array(a.labels.floor); })
        .def_property_readonly("accepted_distance",
                               [](const AugmentedSet& a) {
                                   return to_array(a.accepted_distance);
                               })
        .def_property_readonly("seed_fingerprint_index",
                               [](const AugmentedSet& a) {
                                   std::vector<int> v;
                                   for (auto i : a.seed_fingerprint_index)
                                       v.push_back(static_cast<int>(i));
                                   return to_array(v);
                               });

    m.def(
        "select_fingerprints",
        [](CGanSet& gans, PositioningModel& model, const RadioMap& rm,
           const std::vector<double>& distances, int candidates_per_iteration,
           int iterations, bool dedupe, bool fresh_per_distance,
           bool compare_whole_dataset, std::uint64_t seed) {
            SelectionConfig cfg;
            cfg.distances = distances;
            cfg.candidates_per_iteration = candidates_per_iteration;
            cfg.iterations = iterations;
            cfg.dedupe = dedupe;
            cfg.fresh_per_distance = fresh_per_distance;
            cfg.compare_whole_dataset = compare_whole_dataset;
            return select_fingerprints(gans.gans, model, rm, cfg, seed);
        },
        py::arg("cgans"), py::arg("model"), py::arg("radiomap"), py::kw_only(),
        py::arg("distances") = std::vector<double>{1, 2, 3, 4, 5},
        py::arg("candidates_per_iteration") = 200, py::arg("iterations") = 10,
        py::arg("dedupe") = true, py::arg("fresh_per_distance") = true,
        py::arg("compare_whole_dataset") = false, py::arg("seed") = 1);

    m.def("augment_radiomap", &augment_radiomap, py::arg("radiomap"),
          py::arg("augmented_set"));
    m.def("save_augmented_csv", &save_augmented_csv, py::arg("radiomap"),
          py::arg("augmented_set"), py::arg("path"));
}
