#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dcnn/arch.hpp"
#include "dcnn/conv.hpp"
#include "dcnn/correlation.hpp"
#include "dcnn/double_conv.hpp"
#include "dcnn/train.hpp"

namespace py = pybind11;
using namespace dcnn;

namespace {

template <typename Real>
using Array = py::array_t<Real, py::array::c_style | py::array::forcecast>;

template <typename Real>
BasicTensor<Real> to_tensor(const Array<Real>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return BasicTensor<Real>(std::move(shape), std::vector<Real>(a.data(), a.data() + a.size()));
}

template <typename Real>
py::array_t<Real> to_numpy(const BasicTensor<Real>& t) {
  py::array_t<Real> out(t.shape());
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

bool is_float32(const py::array& a) { return a.dtype().is(py::dtype::of<float>()); }

PadSpec parse_pad(const py::object& pad) {
  if (py::isinstance<py::int_>(pad)) return PadSpec::explicit_pad(pad.cast<std::size_t>());
  const auto s = pad.cast<std::string>();
  if (s == "valid") return PadSpec::valid();
  if (s == "same") return PadSpec::same();
  throw ParameterError("padding must be 'valid', 'same' or an integer, got '" + s + "'");
}

PoolKind parse_pool(const std::string& s) {
  if (s == "max") return PoolKind::Max;
  if (s == "avg" || s == "average") return PoolKind::Average;
  throw ParameterError("pool must be 'max' or 'avg', got '" + s + "'");
}

nn::DoubleConvPath parse_path(const std::string& s) {
  if (s == "twostep") return nn::DoubleConvPath::TwoStep;
  if (s == "reference") return nn::DoubleConvPath::Reference;
  throw ParameterError("path must be 'twostep' or 'reference', got '" + s + "'");
}

template <typename Real>
py::array run_double_conv(const py::array& x, const py::array& meta, std::size_t z,
                          std::size_t s, PoolKind pool, PadSpec pad,
                          nn::DoubleConvPath path) {
  const BasicTensor<Real> w = to_tensor<Real>(meta);
  const MetaFilterBank<Real> bank({w.dim(0), w.dim(2), z, s, pool}, w);
  const BasicTensor<Real> in = to_tensor<Real>(x);
  return to_numpy(path == nn::DoubleConvPath::TwoStep ? double_conv_twostep(in, bank, pad)
                                                      : double_conv_reference(in, bank, pad));
}

py::tuple ratio(const Rational& r) { return py::make_tuple(r.num(), r.den()); }

py::dict stats_dict(const correlation::LayerStats& s) {
  py::dict d;
  d["mean"] = s.mean;
  d["std"] = s.std;
  d["maxima"] = s.maxima;
  return d;
}

py::dict metrics_dict(const train::EpochMetrics& m) {
  py::dict d;
  d["epoch"] = m.epoch;
  d["train_loss"] = m.train_loss;
  d["train_err"] = m.train_err;
  d["test_err"] = m.test_err;
  d["seconds"] = m.seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_dcnn, m) {
  m.doc() = "Doubly convolutional networks: kernels, layers, notation and training.";

  // Module-lifetime exception types; the translator looks them up by name.
  auto make = [&m](const char* name, py::handle parent) {
    return py::exception<Error>(m, name, parent.ptr()).release();
  };
  const py::handle base = make("DcnnError", PyExc_RuntimeError);
  for (const char* name : {"ShapeError", "SpecError", "ParameterError", "NumericError",
                           "DegenerateError", "IoError", "FormatError", "ParseError"}) {
    make(name, base);
  }
  py::register_exception_translator([](std::exception_ptr p) {
    const py::module_ mod = py::module_::import("dcnn._dcnn");
    auto raise = [&](const char* name, const std::exception& e) {
      py::set_error(mod.attr(name), e.what());
    };
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      const py::object type = mod.attr("ParseError");
      py::object err = type(e.what());
      err.attr("line") = e.line();
      err.attr("column") = e.column();
      err.attr("reason") = e.reason();
      py::set_error(type, err);
    } catch (const ShapeError& e) {
      raise("ShapeError", e);
    } catch (const SpecError& e) {
      raise("SpecError", e);
    } catch (const ParameterError& e) {
      raise("ParameterError", e);
    } catch (const NumericError& e) {
      raise("NumericError", e);
    } catch (const DegenerateError& e) {
      raise("DegenerateError", e);
    } catch (const IoError& e) {
      raise("IoError", e);
    } catch (const FormatError& e) {
      raise("FormatError", e);
    } catch (const Error& e) {
      raise("DcnnError", e);
    }
  });

  m.def(
      "conv2d",
      [](const py::array& x, const py::array& w, const py::object& padding) {
        const PadSpec pad = parse_pad(padding);
        if (is_float32(x)) {
          return py::array(to_numpy(
              conv2d(to_tensor<float>(x), ConvFilterBank<float>(to_tensor<float>(w)), pad)));
        }
        return py::array(to_numpy(
            conv2d(to_tensor<double>(x), ConvFilterBank<double>(to_tensor<double>(w)), pad)));
      },
      py::arg("x"), py::arg("w"), py::arg("padding") = "valid",
      "Cross-correlation of [c_in,h,w] with filters [c_out,c_in,z,z], no bias.");

  m.def(
      "double_conv",
      [](const py::array& x, const py::array& meta, std::size_t z, std::size_t s,
         const std::string& pool, const py::object& padding, const std::string& path) {
        const PoolKind kind = parse_pool(pool);
        const PadSpec pad = parse_pad(padding);
        const auto p = parse_path(path);
        return is_float32(x) ? run_double_conv<float>(x, meta, z, s, kind, pad, p)
                             : run_double_conv<double>(x, meta, z, s, kind, pad, p);
      },
      py::arg("x"), py::arg("meta"), py::arg("z"), py::arg("s"), py::arg("pool") = "max",
      py::arg("padding") = "same", py::arg("path") = "twostep",
      "Doubly convolutional layer forward pass over meta filters [c_out,c_in,z',z'].");

  m.def(
      "expand_meta_filters",
      [](const Array<double>& meta, std::size_t z) {
        const Tensor w = to_tensor<double>(meta);
        const MetaFilterBank<double> bank({w.dim(0), w.dim(2), z, 1, PoolKind::Max}, w);
        return to_numpy(expand_meta_filters(bank).weights());
      },
      py::arg("meta"), py::arg("z"),
      "Every z x z window of every meta filter, grouped per meta filter.");

  m.def(
      "classify_variant",
      [](std::size_t meta_size, std::size_t z, std::size_t s) {
        return std::string(to_string(classify_variant({1, meta_size, z, s, PoolKind::Max})));
      },
      py::arg("meta_size"), py::arg("z"), py::arg("s"));

  m.def(
      "concat_channel_multiplier",
      [](std::size_t meta_size, std::size_t z) {
        return ratio(concat_channel_multiplier({1, meta_size, z, 1, PoolKind::Max}));
      },
      py::arg("meta_size"), py::arg("z"), "(num, den) of the concatenation multiplier.");

  m.def(
      "translation_correlation",
      [](const Array<double>& a, const Array<double>& b, int k) {
        return correlation::translation_correlation(to_tensor<double>(a), to_tensor<double>(b), k);
      },
      py::arg("a"), py::arg("b"), py::arg("k") = 1);

  m.def(
      "avg_max_translation_correlation",
      [](const Array<double>& bank, int k) {
        return stats_dict(correlation::avg_max_translation_correlation(to_tensor<double>(bank), k));
      },
      py::arg("bank"), py::arg("k") = 1);

  m.def(
      "gaussian_baseline",
      [](const Shape& shape, int k, std::uint64_t seed) {
        return stats_dict(correlation::gaussian_baseline(shape, k, seed));
      },
      py::arg("shape"), py::arg("k") = 1, py::arg("seed") = 0);

  m.def(
      "analyze_checkpoint",
      [](const std::filesystem::path& path, int k, std::uint64_t seed) {
        const auto report = correlation::analyze_checkpoint(path, k, seed);
        py::list records;
        for (const auto& r : report.records) {
          py::dict d;
          d["layer"] = r.layer;
          d["N"] = r.filters;
          d["k"] = r.k;
          d["rho_mean"] = r.rho_mean;
          d["rho_std"] = r.rho_std;
          d["baseline_mean"] = r.baseline_mean;
          d["baseline_std"] = r.baseline_std;
          d["baseline_seed"] = r.baseline_seed;
          records.append(d);
        }
        return py::make_tuple(records, report.warnings, correlation::to_csv(report));
      },
      py::arg("checkpoint"), py::arg("k") = 1, py::arg("seed") = 0,
      "(records, warnings, csv) for every filter tensor of a checkpoint.");

  py::class_<arch::ArchSpec>(m, "Arch")
      .def_readonly("input_shape", &arch::ArchSpec::input_shape)
      .def_property_readonly("tokens", &arch::render)
      .def_property_readonly("output_shapes",
                             [](const arch::ArchSpec& a) {
                               std::vector<Shape> out;
                               for (const auto& l : a.layers) out.push_back(l.output_shape);
                               return out;
                             })
      .def("total_params", &arch::ArchSpec::total_params)
      .def("filter_params", &arch::ArchSpec::filter_params)
      .def("layer_sizes", &arch::ArchSpec::layer_sizes)
      .def("render_config", &arch::render_config)
      .def(
          "inspect",
          [](const arch::ArchSpec& a, const arch::ArchSpec* ref) {
            return arch::inspect_table(a, ref);
          },
          py::arg("reference") = nullptr)
      .def(
          "relative_params",
          [](const arch::ArchSpec& a, const arch::ArchSpec& ref) {
            return ratio(arch::relative_params(a, ref));
          },
          py::arg("reference"))
      .def(py::self == py::self);

  m.def(
      "parse_config",
      [](const std::string& text) { return arch::parse_config(text); }, py::arg("text"));
  m.def("load_config", &arch::load_config, py::arg("path"));
  m.def(
      "parse_network",
      [](const std::vector<std::string>& lines, const Shape& input) {
        return arch::parse_network(lines, input);
      },
      py::arg("tokens"), py::arg("input_shape"));

  m.def(
      "train",
      [](const arch::ArchSpec& spec, const std::filesystem::path& out, const std::string& data,
         std::uint64_t seed, std::size_t epochs, std::size_t batch_size,
         const std::string& optimizer, double lr, double dropout, bool augment, int precision,
         bool record_time, const std::string& dc_path) {
        train::TrainConfig c;
        c.arch = spec;
        c.data = data;
        c.seed = seed;
        c.epochs = epochs;
        c.batch_size = batch_size;
        c.optimizer = train::parse_optimizer(optimizer);
        c.lr = lr;
        c.dropout = dropout;
        c.augment = augment;
        c.record_time = record_time;
        c.dc_path = parse_path(dc_path);
        std::vector<train::EpochMetrics> history;
        {
          py::gil_scoped_release release;
          history = train::run(c, precision, out);
        }
        py::list rows;
        for (const auto& h : history) rows.append(metrics_dict(h));
        return rows;
      },
      py::arg("arch"), py::arg("out"), py::arg("data") = "synthetic", py::arg("seed") = 0,
      py::arg("epochs") = 1, py::arg("batch_size") = 200, py::arg("optimizer") = "adadelta",
      py::arg("lr") = 0.01, py::arg("dropout") = 0.5, py::arg("augment") = true,
      py::arg("precision") = 32, py::arg("record_time") = true,
      py::arg("dc_path") = "twostep",
      "Trains and writes metrics.csv and checkpoint/ under `out`; returns per-epoch metrics.");

  m.def(
      "evaluate_checkpoint",
      [](const std::filesystem::path& dir, const std::string& data, const std::string& split) {
        if (split != "train" && split != "test") {
          throw ParameterError("split must be 'train' or 'test', got '" + split + "'");
        }
        return train::evaluate_checkpoint(dir, data,
                                          split == "train" ? data::Split::Train : data::Split::Test);
      },
      py::arg("checkpoint"), py::arg("data") = "", py::arg("split") = "test",
      "Classification error of a saved checkpoint on a dataset split.");
}
