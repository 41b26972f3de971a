#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "hygnn/checkpoint.hpp"
#include "hygnn/config.hpp"
#include "hygnn/data.hpp"
#include "hygnn/gradcheck.hpp"
#include "hygnn/train.hpp"

namespace py = pybind11;
using namespace hygnn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array points_array(const std::vector<PointAnnotation>& points) {
  Array out({static_cast<py::ssize_t>(points.size()), py::ssize_t{2}});
  auto* p = out.mutable_data();
  for (const auto& pt : points) {
    *p++ = pt.x;
    *p++ = pt.y;
  }
  return out;
}

std::vector<PointAnnotation> points_from(const Array& a) {
  if (a.size() == 0) return {};
  if (a.ndim() != 2 || a.shape(1) != 2) throw std::invalid_argument("points must have shape (n, 2)");
  std::vector<PointAnnotation> out;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out.push_back({a.at(i, 0), a.at(i, 1)});
  return out;
}

Checkpoint checkpoint_from_bytes(const py::bytes& b) {
  const std::string s = b;
  return deserialize_checkpoint(std::vector<std::uint8_t>(s.begin(), s.end()));
}

py::bytes checkpoint_to_bytes(const Checkpoint& c) {
  const auto v = serialize_checkpoint(c);
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

py::dict as_dict(const LossRecord& r) {
  py::dict d;
  d["step"] = r.step;
  d["total"] = r.total;
  d["density"] = r.density;
  d["localization"] = r.localization;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hybrid graph network for joint crowd counting and localization";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<Scene>(m, "Scene")
      .def(py::init([](const Array& image, const Array& points) {
             Scene s{to_tensor(image), points_from(points)};
             if (s.image.rank() != 3 || s.image.dim(0) != 3)
               throw std::invalid_argument("image must have shape (3, H, W)");
             return s;
           }),
           py::arg("image"), py::arg("points"))
      .def_property_readonly("image", [](const Scene& s) { return to_array(s.image); })
      .def_property_readonly("points", [](const Scene& s) { return points_array(s.points); })
      .def_property_readonly("count", &Scene::count)
      .def("__repr__", [](const Scene& s) {
        return "<Scene " + std::to_string(s.height()) + "x" + std::to_string(s.width()) + ", " +
               std::to_string(s.count()) + " points>";
      });

  m.def(
      "synth_scene",
      [](std::uint64_t seed, std::size_t height, std::size_t width) {
        SynthConfig c;
        c.height = height;
        c.width = width;
        return synth_scene(seed, c);
      },
      py::arg("seed"), py::arg("height") = 64, py::arg("width") = 64);
  m.def("flip_horizontal", &flip_horizontal);
  m.def(
      "density_map", [](const Scene& s, double sigma) { return to_array(generate_density_gt(s, sigma).grid); },
      py::arg("scene"), py::arg("sigma") = 4.0, "Ground-truth density on the stride-8 grid; sums to the count.");
  m.def(
      "localization_map",
      [](const Scene& s, double sigma) { return to_array(generate_localization_gt(s, sigma).grid); },
      py::arg("scene"), py::arg("sigma") = 1.0);
  m.def("load_scene", &load_scene, py::arg("annotation_path"));
  m.def("save_scene", &save_scene, py::arg("scene"), py::arg("base"));
  m.def("load_dataset", &load_dataset, py::arg("directory"));

  py::enum_<LossReduction>(m, "LossReduction").value("mean", LossReduction::mean).value("sum", LossReduction::sum);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("beta1", &TrainConfig::beta1)
      .def_readwrite("beta2", &TrainConfig::beta2)
      .def_readwrite("epsilon", &TrainConfig::epsilon)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("batch", &TrainConfig::batch)
      .def_readwrite("crop", &TrainConfig::crop)
      .def_readwrite("lambda_", &TrainConfig::lambda)
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("scales", &TrainConfig::scales)
      .def_readwrite("mp_iterations", &TrainConfig::mp_iterations)
      .def_readwrite("width_multiplier", &TrainConfig::width_multiplier)
      .def_readwrite("node_channels", &TrainConfig::node_channels)
      .def_readwrite("back_end_dilation", &TrainConfig::back_end_dilation)
      .def_readwrite("sigma", &TrainConfig::sigma)
      .def_readwrite("sigma_loc", &TrainConfig::sigma_loc)
      .def_readwrite("reduction", &TrainConfig::reduction)
      .def_readwrite("cross_domain", &TrainConfig::cross_domain)
      .def_readwrite("adapter", &TrainConfig::adapter)
      .def_readwrite("flip", &TrainConfig::flip)
      .def_readwrite("checkpoint_every", &TrainConfig::checkpoint_every)
      .def("validate", &TrainConfig::validate)
      .def("snapshot", &config_snapshot);
  m.def(
      "parse_config", [](const std::string& text) { return parse_config(text); }, py::arg("text"));
  m.def(
      "load_config", [](const std::filesystem::path& p) { return load_config(p); }, py::arg("path"));

  py::class_<Trainer>(m, "Trainer")
      .def(py::init<TrainConfig, std::vector<Scene>>(), py::arg("config"), py::arg("scenes"))
      .def(py::init([](const py::bytes& ckpt, std::vector<Scene> scenes) {
             return Trainer(checkpoint_from_bytes(ckpt), std::move(scenes));
           }),
           py::arg("checkpoint"), py::arg("scenes"))
      .def("step", [](Trainer& t) { return as_dict(t.step()); })
      .def("run",
           [](Trainer& t, std::uint64_t steps) {
             py::list out;
             for (const auto& r : t.run(steps)) out.append(as_dict(r));
             return out;
           })
      .def("checkpoint", [](const Trainer& t) { return checkpoint_to_bytes(t.checkpoint()); })
      .def_property_readonly("steps_done", &Trainer::steps_done)
      .def_property_readonly("config", &Trainer::config);

  py::class_<HyGnnModel>(m, "Model")
      .def_static(
          "from_checkpoint", [](const py::bytes& b) { return model_from_checkpoint(checkpoint_from_bytes(b)); },
          py::arg("checkpoint"))
      .def_static(
          "load", [](const std::filesystem::path& p) { return model_from_checkpoint(load_checkpoint(p)); },
          py::arg("path"))
      .def(
          "infer",
          [](const HyGnnModel& model, const Array& image) {
            const auto r = infer(model, to_tensor(image));
            return py::make_tuple(to_array(r.density), to_array(r.localization), r.count);
          },
          py::arg("image"), "Returns (density, localization, count) for a (3, H, W) image.")
      .def(
          "evaluate",
          [](const HyGnnModel& model, const std::vector<Scene>& scenes) {
            const auto r = evaluate(model, scenes);
            return py::make_tuple(r.mae, r.mse);
          },
          py::arg("scenes"))
      .def_property_readonly("parameter_count", [](const HyGnnModel& model) {
        std::size_t n = 0;
        for (const auto& p : model.parameters()) n += p.tensor.numel();
        return n;
      });

  m.def(
      "save_checkpoint",
      [](const py::bytes& b, const std::filesystem::path& p) { save_checkpoint(checkpoint_from_bytes(b), p); },
      py::arg("checkpoint"), py::arg("path"));
  m.def(
      "load_checkpoint", [](const std::filesystem::path& p) { return checkpoint_to_bytes(load_checkpoint(p)); },
      py::arg("path"));

  m.def(
      "metrics",
      [](const std::vector<double>& predicted, const std::vector<double>& truth) {
        const auto r = compute_metrics(predicted, truth);
        return py::make_tuple(r.mae, r.mse);
      },
      py::arg("predicted"), py::arg("ground_truth"), "(MAE, root mean squared error) of two count lists.");

  m.def(
      "grad_check",
      [](bool full) {
        const auto r = grad_check(full ? GradCheckOptions::full() : GradCheckOptions{});
        return py::make_tuple(r.passed(), r.max_rel_error(), r.rows.size());
      },
      py::arg("full") = false, "Returns (passed, max relative error, rows checked).");
}
