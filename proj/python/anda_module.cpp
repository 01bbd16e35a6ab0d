// Python bindings: numpy arrays in and out, float64 throughout.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "anda/attack.hpp"
#include "anda/augment.hpp"
#include "anda/error.hpp"
#include "anda/eval.hpp"
#include "anda/io.hpp"
#include "anda/zoo.hpp"

namespace py = pybind11;
using namespace anda;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Array to_array(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

// Stacks equally shaped tensors along a new leading axis.
Array stack(const std::vector<ImageTensor>& ts, const Shape& fallback) {
  const Shape& s = ts.empty() ? fallback : ts.front().shape();
  std::vector<py::ssize_t> dims{static_cast<py::ssize_t>(ts.size())};
  dims.insert(dims.end(), s.begin(), s.end());
  Array out(dims);
  double* p = out.mutable_data();
  for (const auto& t : ts) p = std::copy(t.values().begin(), t.values().end(), p);
  return out;
}

std::vector<ImageTensor> unstack(const Array& a) {
  if (a.ndim() < 2) throw ShapeError("expected a batch of images (N, ...)");
  const Shape s(a.shape() + 1, a.shape() + a.ndim());
  const std::size_t n = shape_size(s);
  std::vector<ImageTensor> out;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    const double* p = a.data() + static_cast<std::size_t>(i) * n;
    out.emplace_back(s, std::vector<double>(p, p + n));
  }
  return out;
}

py::dict posterior_dict(const PerturbationPosterior& p) {
  Array dev({static_cast<py::ssize_t>(p.count), static_cast<py::ssize_t>(p.dim)});
  std::copy(p.deviations.begin(), p.deviations.end(), dev.mutable_data());
  py::dict d;
  d["mean"] = to_array(p.mean);
  d["deviations"] = dev;
  d["anchor"] = to_array(p.anchor);
  return d;
}

PerturbationPosterior posterior_from(const Array& mean, const Array& deviations) {
  if (deviations.ndim() != 2 || deviations.shape(1) != mean.size()) {
    throw ShapeError("deviations must have shape (count, dim) matching the mean");
  }
  PerturbationPosterior p;
  p.dim = static_cast<std::size_t>(mean.size());
  p.count = static_cast<std::size_t>(deviations.shape(0));
  p.mean.assign(mean.data(), mean.data() + mean.size());
  p.deviations.assign(deviations.data(), deviations.data() + deviations.size());
  return p;
}

}  // namespace

PYBIND11_MODULE(_anda, m) {
  m.doc() = "ANDA / MultiANDA transfer attacks on small classifiers";

  auto base = py::register_exception<Error>(m, "AndaError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<DataError>(m, "DataError", base);
  py::register_exception<InvariantError>(m, "InvariantError", base);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", base);

  py::class_<AttackConfig>(m, "AttackConfig")
      .def(py::init<>())
      .def_readwrite("epsilon", &AttackConfig::epsilon)
      .def_readwrite("steps", &AttackConfig::steps)
      .def_readwrite("step_size", &AttackConfig::step_size)
      .def_readwrite("aug_count", &AttackConfig::aug_count)
      .def_readwrite("augmax", &AttackConfig::augmax)
      .def_readwrite("include_identity", &AttackConfig::include_identity)
      .def_readwrite("ensemble_k", &AttackConfig::ensemble_k)
      .def_readwrite("init_radius", &AttackConfig::init_radius)
      .def_readwrite("sample_count", &AttackConfig::sample_count)
      .def_readwrite("seed", &AttackConfig::seed)
      .def_readwrite("accumulate", &AttackConfig::accumulate)
      .def_property(
          "strategy", [](const AttackConfig& c) { return to_string(c.strategy); },
          [](AttackConfig& c, const std::string& s) { c.strategy = parse_strategy(s); })
      .def("validate", &AttackConfig::validate);

  m.def(
      "translation_offsets",
      [](std::size_t n, double augmax, bool include_identity) {
        std::vector<std::pair<double, double>> out;
        for (const auto& o : translation_offsets(n, augmax, include_identity).offsets) out.emplace_back(o.tx, o.ty);
        return out;
      },
      py::arg("n"), py::arg("augmax"), py::arg("include_identity") = false);
  m.def(
      "translate", [](const Array& x, double tx, double ty) { return to_array(translate(to_tensor(x), tx, ty)); },
      py::arg("x"), py::arg("tx"), py::arg("ty"));
  m.def(
      "translate_adjoint",
      [](const Array& g, double tx, double ty) { return to_array(translate_adjoint(to_tensor(g), tx, ty)); },
      py::arg("g"), py::arg("tx"), py::arg("ty"));

  m.def(
      "generate_synthetic",
      [](const std::string& kind, std::size_t count, std::size_t side, std::size_t classes, std::uint64_t seed) {
        SyntheticSpec spec;
        spec.kind = parse_synthetic_kind(kind);
        spec.count = count;
        spec.side = side;
        spec.classes = classes;
        spec.seed = seed;
        const Dataset ds = generate_synthetic(spec);
        return py::make_tuple(stack(ds.images, {}), ds.labels);
      },
      py::arg("kind") = "gauss_blobs", py::arg("count"), py::arg("side") = 16, py::arg("classes") = 8,
      py::arg("seed") = 0);

  py::class_<Checkpoint>(m, "Model")
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def_static(
          "train",
          [](const std::string& arch, const std::vector<std::size_t>& layers, const Array& images,
             const std::vector<std::size_t>& labels, std::size_t classes, std::size_t epochs, double lr,
             std::uint64_t seed) {
            Dataset train;
            train.classes = classes;
            train.images = unstack(images);
            train.labels = labels;
            const Architecture a{parse_arch_kind(arch), train.image_shape(), classes, layers};
            TrainOptions opt;
            opt.epochs = epochs;
            opt.learning_rate = lr;
            opt.seed = seed;
            return train_classifier(train, Dataset{}, a, opt).checkpoint;
          },
          py::arg("arch"), py::arg("layers"), py::arg("images"), py::arg("labels"), py::arg("classes"),
          py::arg("epochs") = 10, py::arg("lr") = 0.05, py::arg("seed") = 0)
      .def("save", [](const Checkpoint& c, const std::string& path) { save_checkpoint(c, path); })
      .def_property_readonly("arch", [](const Checkpoint& c) { return to_string(c.arch.kind); })
      .def_property_readonly("input_shape", [](const Checkpoint& c) { return c.arch.input_shape; })
      .def_property_readonly("classes", [](const Checkpoint& c) { return c.arch.classes; })
      .def_property_readonly("train_accuracy", [](const Checkpoint& c) { return c.meta.train_accuracy; })
      .def("logits", [](const Checkpoint& c, const Array& x) { return to_array(forward(c.graph(), to_tensor(x))); })
      .def("predict", [](const Checkpoint& c, const Array& x) { return predict(c, to_tensor(x)); })
      .def("input_gradient", [](const Checkpoint& c, const Array& x,
                                std::size_t label) { return to_array(input_gradient(c.graph(), to_tensor(x), label)); })
      .def("accuracy", [](const Checkpoint& c, const Array& images, const std::vector<std::size_t>& labels) {
        const Graph g = c.graph();
        const auto xs = unstack(images);
        if (xs.size() != labels.size()) throw ShapeError("image and label counts differ");
        std::size_t correct = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) correct += predict(g, xs[i]) == labels[i];
        return xs.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(xs.size());
      });

  m.def(
      "bim",
      [](const Checkpoint& c, const Array& x, std::size_t label, const AttackConfig& cfg) {
        return to_array(bim_attack(c.graph(), to_tensor(x), label, cfg));
      },
      py::arg("model"), py::arg("x"), py::arg("label"), py::arg("config") = AttackConfig{});
  m.def(
      "anda",
      [](const Checkpoint& c, const Array& x, std::size_t label, const AttackConfig& cfg) {
        const AndaResult r = anda_attack(c.graph(), to_tensor(x), label, cfg);
        return py::make_tuple(to_array(r.adversary), posterior_dict(r.posterior));
      },
      py::arg("model"), py::arg("x"), py::arg("label"), py::arg("config") = AttackConfig{});
  m.def(
      "multianda",
      [](const Checkpoint& c, const Array& x, std::size_t label, const AttackConfig& cfg) {
        const MultiAndaResult r = multianda_attack(c.graph(), to_tensor(x), label, cfg);
        py::list components;
        for (const auto& p : r.mixture.components) components.append(posterior_dict(p));
        return py::make_tuple(to_array(r.adversary), components);
      },
      py::arg("model"), py::arg("x"), py::arg("label"), py::arg("config") = AttackConfig{});
  m.def(
      "sample_perturbation",
      [](const Array& mean, const Array& deviations, std::uint64_t seed) {
        Rng rng = make_rng(seed);
        return to_array(sample_perturbation(posterior_from(mean, deviations), rng));
      },
      py::arg("mean"), py::arg("deviations"), py::arg("seed") = 0);
  m.def(
      "attack_batch",
      [](const Checkpoint& c, const Array& images, const std::vector<std::size_t>& labels, const std::string& kind,
         const AttackConfig& cfg) {
        const AdversaryBatch b = craft_batch(c.graph(), unstack(images), labels, parse_attack_kind(kind), cfg);
        std::vector<ImageTensor> adv;
        for (const auto& r : b.records) adv.push_back(r.adversary);
        return stack(adv, c.arch.input_shape);
      },
      py::arg("model"), py::arg("images"), py::arg("labels"), py::arg("kind") = "anda",
      py::arg("config") = AttackConfig{});

  m.def(
      "read_archive",
      [](const std::string& path) {
        const AdversaryBatch b = read_adversary_archive(path);
        std::vector<ImageTensor> orig, adv;
        std::vector<std::size_t> labels;
        py::list samples;
        for (const auto& r : b.records) {
          orig.push_back(r.original);
          adv.push_back(r.adversary);
          labels.push_back(r.label);
          samples.append(stack(r.samples, r.original.shape()));
        }
        py::dict d;
        d["config"] = py::module_::import("json").attr("loads")(archive_config_json(b).dump());
        d["originals"] = stack(orig, {});
        d["adversaries"] = stack(adv, {});
        d["labels"] = labels;
        d["samples"] = samples;
        return d;
      },
      py::arg("path"));
}
