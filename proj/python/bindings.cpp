#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "histo/aggregate.hpp"
#include "histo/augment.hpp"
#include "histo/dataset.hpp"
#include "histo/error.hpp"
#include "histo/image_io.hpp"
#include "histo/metrics.hpp"
#include "histo/nn/trainer.hpp"
#include "histo/scaling.hpp"
#include "histo/tiler.hpp"

namespace py = pybind11;
using namespace histo;

namespace {

using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image to_image(const ImageArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("expected an (H, W, 3) uint8 array");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  std::vector<std::uint8_t> data(a.data(), a.data() + a.size());
  return Image(w, h, 3, std::move(data));
}

ImageArray to_array(const Image& img) {
  ImageArray out({img.height(), img.width(), img.channels()});
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

ClassLabel to_label(const std::string& name) {
  const auto l = parse_label(name);
  if (!l) throw Error(ErrorCode::UnknownLabel, name);
  return *l;
}

py::list manifest_rows(const Manifest& m) {
  py::list rows;
  for (const auto& e : m.entries) rows.append(py::make_tuple(e.path, std::string(label_name(e.label))));
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tiling, augmentation, scaling and evaluation primitives.";

  static py::exception<Error> error(m, "HistoError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error(e.what());
    }
  });

  m.def("grid_count", &grid_count, py::arg("dim"), py::arg("window"), py::arg("stride"),
        py::arg("include_tail") = false);

  m.def(
      "tile",
      [](const ImageArray& image, int window, double overlap, bool include_tail) {
        const TilingResult r = extract_patches(to_image(image), {window, overlap, include_tail});
        py::list patches;
        for (const auto& p : r.patches) {
          py::dict d;
          d["row"] = p.row;
          d["col"] = p.col;
          d["x"] = p.origin_x;
          d["y"] = p.origin_y;
          d["pixels"] = to_array(p.pixels);
          patches.append(d);
        }
        py::dict out;
        out["cols"] = r.grid.cols;
        out["rows"] = r.grid.rows;
        out["stride"] = r.grid.stride;
        out["patches"] = patches;
        return out;
      },
      py::arg("image"), py::arg("window") = 512, py::arg("overlap") = 0.5,
      py::arg("include_tail") = false);

  m.def(
      "augment",
      [](const ImageArray& image, std::uint64_t seed, const std::string& params_json) {
        const AugmentParams params =
            params_json.empty() ? AugmentParams{} : augment_params_from_json(params_json);
        return to_array(random_augment(to_image(image), params, seed));
      },
      py::arg("image"), py::arg("seed"), py::arg("params_json") = "");

  m.def(
      "rotate", [](const ImageArray& image, double degrees) { return to_array(rotate(to_image(image), degrees)); },
      py::arg("image"), py::arg("degrees"));

  m.def(
      "compound_scale",
      [](double phi, double alpha, double beta, double gamma) {
        const Multipliers mm = compound_scale({alpha, beta, gamma, phi});
        return py::make_tuple(mm.depth, mm.width, mm.resolution);
      },
      py::arg("phi"), py::arg("alpha") = 1.2, py::arg("beta") = 1.1, py::arg("gamma") = 1.15);

  m.def(
      "check_compute_constraint",
      [](double alpha, double beta, double gamma, double tol) {
        const ConstraintCheck c = check_compute_constraint({alpha, beta, gamma, 0.0}, tol);
        return py::make_tuple(c.pass, c.value);
      },
      py::arg("alpha") = 1.2, py::arg("beta") = 1.1, py::arg("gamma") = 1.15, py::arg("tol") = 0.1);

  m.def(
      "architecture_json",
      [](int phi) { return nlohmann::json(efficientnet_variant(phi)).dump(); }, py::arg("phi"));

  m.def("layer_count", [](int phi) { return count_layers(efficientnet_variant(phi)).total(); },
        py::arg("phi"));

  m.def(
      "step_lr",
      [](int epoch, double lr0, int step_size, double gamma) {
        nn::TrainerConfig cfg;
        cfg.lr0 = lr0;
        cfg.step_size = step_size;
        cfg.gamma = gamma;
        return nn::step_lr(epoch, cfg);
      },
      py::arg("epoch"), py::arg("lr0") = 0.01, py::arg("step_size") = 30, py::arg("gamma") = 0.5);

  m.def(
      "majority_vote",
      [](const std::array<int, kNumClasses>& counts, const std::array<double, kNumClasses>& prob_sums) {
        VoteTally t;
        t.counts = counts;
        t.prob_sums = prob_sums;
        for (int c : counts) t.total_patches += c;
        return std::string(label_name(majority_vote(t)));
      },
      py::arg("counts"), py::arg("prob_sums") = std::array<double, kNumClasses>{});

  m.def(
      "metrics_report_json",
      [](const ConfusionMatrix::Cells& cells) { return metrics_report_json(ConfusionMatrix(cells)); },
      py::arg("matrix"));

  m.def(
      "confusion_matrix",
      [](const std::vector<std::string>& truth, const std::vector<std::string>& pred) {
        std::vector<ClassLabel> t, p;
        for (const auto& s : truth) t.push_back(to_label(s));
        for (const auto& s : pred) p.push_back(to_label(s));
        return confusion_matrix(t, p).cells();
      },
      py::arg("truth"), py::arg("pred"));

  m.def(
      "apportion",
      [](int n, double train, double valid, double test) { return apportion(n, {train, valid, test}); },
      py::arg("n"), py::arg("train") = 0.7, py::arg("valid") = 0.2, py::arg("test") = 0.1);

  m.def(
      "split",
      [](const std::vector<std::pair<std::string, std::string>>& rows, std::uint64_t seed,
         double train, double valid, double test) {
        Manifest mf;
        for (const auto& [path, label] : rows) mf.entries.push_back({path, to_label(label)});
        const SplitResult r = split(mf, {train, valid, test}, seed);
        py::dict out;
        out["train"] = manifest_rows(r.train);
        out["valid"] = manifest_rows(r.valid);
        out["test"] = manifest_rows(r.test);
        return out;
      },
      py::arg("rows"), py::arg("seed"), py::arg("train") = 0.7, py::arg("valid") = 0.2,
      py::arg("test") = 0.1);

  m.def("read_png", [](const std::string& path) { return to_array(read_png(path)); }, py::arg("path"));
  m.def(
      "write_png", [](const std::string& path, const ImageArray& image) { write_png(path, to_image(image)); },
      py::arg("path"), py::arg("image"));
}
