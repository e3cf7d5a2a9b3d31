#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pacsr/checkpoint.hpp"
#include "pacsr/errors.hpp"
#include "pacsr/metrics.hpp"
#include "pacsr/network.hpp"
#include "pacsr/prompt.hpp"
#include "pacsr/scene.hpp"
#include "pacsr/service.hpp"
#include "pacsr/wavelet.hpp"

namespace py = pybind11;
using namespace pacsr;

namespace {

using FArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor<float> to_tensor(const FArray& a) {
  Shape s(a.shape(), a.shape() + a.ndim());
  return Tensor<float>(s, std::vector<float>(a.data(), a.data() + a.size()));
}

FArray to_array(const Tensor<float>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  FArray out(shape);
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

// (H,W) and (H,W,C) numpy layouts map onto the (C,H,W) tensors used internally.
Tensor<float> from_hwc(const FArray& a) {
  if (a.ndim() == 2) return to_tensor(a).reshaped({1, static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1))});
  if (a.ndim() != 3) throw DimensionError("expected an (H,W) or (H,W,C) array");
  const int h = a.shape(0), w = a.shape(1), c = a.shape(2);
  Tensor<float> t({c, h, w});
  const float* src = a.data();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) t.at(k, y, x) = src[(static_cast<std::size_t>(y) * w + x) * c + k];
  return t;
}

FArray to_hwc(const Tensor<float>& t) {
  const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
  if (c == 1) return to_array(t.reshaped({h, w}));
  FArray out({h, w, c});
  float* dst = out.mutable_data();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) dst[(static_cast<std::size_t>(y) * w + x) * c + k] = t.at(k, y, x);
  return out;
}

Prompt make_prompt(const std::string& kind, const py::object& data) {
  switch (parse_prompt_kind(kind)) {
    case PromptKind::dot: {
      const auto p = data.cast<std::pair<int, int>>();
      return Prompt::dot({p.first, p.second});
    }
    case PromptKind::line: {
      std::vector<Point> pts;
      for (const auto& [x, y] : data.cast<std::vector<std::pair<int, int>>>()) pts.push_back({x, y});
      return Prompt::line(std::move(pts));
    }
    case PromptKind::subject_mask:
      return Prompt::subject_mask(from_hwc(data.cast<FArray>()));
  }
  throw ArgumentError("unknown prompt kind");
}

class Model {
 public:
  explicit Model(const std::string& path) : params_(load_checkpoint(path)) {}
  static Model fresh(int seed) {
    NetworkConfig cfg;
    cfg.seed = seed;
    return Model(init_params<float>(cfg));
  }

  py::tuple remove(const FArray& image, const std::string& kind, const py::object& data) const {
    const Image x = from_hwc(image);
    const Prompt p = make_prompt(kind, data);
    RemovalResult r;
    {
      py::gil_scoped_release release;
      r = infer_any_size(x, p, params_);
    }
    return py::make_tuple(to_hwc(r.restored), to_hwc(r.mask));
  }

  std::string config_hash() const { return pacsr::config_hash(params_.config); }
  int size_multiple() const { return params_.config.size_multiple(); }

 private:
  explicit Model(ModelParams<float> p) : params_(std::move(p)) {}
  ModelParams<float> params_;
};

}  // namespace

PYBIND11_MODULE(_pacsr, m) {
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def(
      "dwt2",
      [](const FArray& f) {
        const auto w = dwt2(to_tensor(f));
        return py::make_tuple(to_array(w.ll), to_array(w.lh), to_array(w.hl), to_array(w.hh));
      },
      py::arg("f"), "Single-level orthonormal Haar transform over the last two axes.");
  m.def(
      "idwt2",
      [](const FArray& ll, const FArray& lh, const FArray& hl, const FArray& hh) {
        return to_array(idwt2(WaveletCoeffs<float>{to_tensor(ll), to_tensor(lh), to_tensor(hl), to_tensor(hh)}));
      },
      py::arg("ll"), py::arg("lh"), py::arg("hl"), py::arg("hh"));

  m.def(
      "rasterize",
      [](const std::string& kind, const py::object& data, int height, int width) {
        return to_hwc(rasterize(make_prompt(kind, data), height, width));
      },
      py::arg("kind"), py::arg("data"), py::arg("height"), py::arg("width"),
      "Prompt map for a dot (x, y), a line [(x, y), ...] or a subject mask.");

  m.def(
      "psnr",
      [](const FArray& a, const FArray& b, std::optional<FArray> region) {
        const auto r = region ? std::optional(from_hwc(*region)) : std::nullopt;
        return psnr(from_hwc(a), from_hwc(b), r ? &*r : nullptr);
      },
      py::arg("a"), py::arg("b"), py::arg("region") = py::none());
  m.def(
      "ssim",
      [](const FArray& a, const FArray& b, std::optional<FArray> region) {
        const auto r = region ? std::optional(from_hwc(*region)) : std::nullopt;
        return ssim(from_hwc(a), from_hwc(b), r ? &*r : nullptr);
      },
      py::arg("a"), py::arg("b"), py::arg("region") = py::none());
  m.def(
      "rmse",
      [](const FArray& a, const FArray& b, std::optional<FArray> region) {
        const auto r = region ? std::optional(from_hwc(*region)) : std::nullopt;
        return rmse(from_hwc(a), from_hwc(b), r ? &*r : nullptr);
      },
      py::arg("a"), py::arg("b"), py::arg("region") = py::none());
  m.def(
      "mask_iou", [](const FArray& p, const FArray& g, double t) { return mask_iou(from_hwc(p), from_hwc(g), t); },
      py::arg("pred"), py::arg("gt"), py::arg("threshold") = 0.5);

  m.def(
      "synth_scene",
      [](int size, std::uint64_t seed) {
        SceneConfig cfg;
        cfg.height = cfg.width = size;
        cfg.seed = seed;
        const SampleRecord r = synth_scene(cfg);
        py::list subjects;
        for (const auto& s : r.subjects) {
          py::list line;
          for (const auto& p : s.line.points) line.append(py::make_tuple(p.x, p.y));
          py::dict d;
          d["subject_mask"] = to_hwc(s.subject_mask);
          d["shadow_mask"] = to_hwc(s.shadow_mask);
          d["dot"] = py::make_tuple(s.dot.points[0].x, s.dot.points[0].y);
          d["line"] = line;
          d["darkening"] = s.darkening;
          subjects.append(d);
        }
        py::dict out;
        out["shadow_image"] = to_hwc(r.shadow_image);
        out["shadow_free_image"] = to_hwc(r.shadow_free_image);
        out["subjects"] = subjects;
        return out;
      },
      py::arg("size") = 64, py::arg("seed") = 0);

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def_static("fresh", &Model::fresh, py::arg("seed") = 0, "Untrained default-configuration network.")
      .def("remove", &Model::remove, py::arg("image"), py::arg("kind"), py::arg("prompt"),
           "Returns (restored (H,W,3), mask (H,W)) for an (H,W,3) image in [0,1].")
      .def_property_readonly("config_hash", &Model::config_hash)
      .def_property_readonly("size_multiple", &Model::size_multiple);
}
