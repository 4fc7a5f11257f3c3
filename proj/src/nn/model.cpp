#include "histo/nn/model.hpp"

#include "histo/error.hpp"

namespace histo::nn {

Model::Model(std::vector<LayerPtr> layers, ParamMap params, int num_classes, int input_resolution,
             nlohmann::json info)
    : layers_(std::move(layers)),
      params_(std::move(params)),
      num_classes_(num_classes),
      input_resolution_(input_resolution),
      info_(std::move(info)) {
  if (layers_.empty()) throw Error(ErrorCode::ShapeMismatch, "model has no layers");
  if (num_classes_ < 1 || input_resolution_ < 1) {
    throw Error(ErrorCode::ShapeMismatch, "model needs classes and a resolution");
  }
  Shape s = {1, 3, input_resolution_, input_resolution_};
  for (const auto& layer : layers_) s = layer->output_shape(s);
  if (s != Shape{1, num_classes_}) {
    throw Error(ErrorCode::ShapeMismatch, "model output " + shape_str(s) + ", expected (1," +
                                              std::to_string(num_classes_) + ")");
  }
  // Shapes are checked lazily on first forward; names are checked here.
  for (const auto& name : trainable_params()) {
    if (!params_.count(name)) throw Error(ErrorCode::ShapeMismatch, "missing parameter " + name);
  }
}

void Model::check_input(const Tensor& batch) const {
  if (empty()) throw Error(ErrorCode::ModelNotLoaded, "empty model");
  const Shape& s = batch.shape();
  if (s.size() != 4 || s[0] < 1 || s[1] != 3 || s[2] != input_resolution_ ||
      s[3] != input_resolution_) {
    throw Error(ErrorCode::ShapeMismatch, "batch " + shape_str(s) + " does not match (N,3," +
                                              std::to_string(input_resolution_) + "," +
                                              std::to_string(input_resolution_) + ")");
  }
}

Tensor Model::logits(const Tensor& batch, Tape* tape) const {
  check_input(batch);
  Tensor h = layers_.front()->forward(batch, params_, tape);
  for (std::size_t i = 1; i < layers_.size(); ++i) h = layers_[i]->forward(h, params_, tape);
  return h;
}

Tensor Model::predict_probs(const Tensor& batch) const { return softmax(logits(batch)); }

void Model::backward(const Tensor& grad_logits, Tape& tape, ParamMap& grads) const {
  Tensor g = grad_logits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = (*it)->backward(g, params_, tape, grads);
  }
}

std::vector<std::string> Model::trainable_params() const {
  std::vector<std::string> out;
  for (const auto& layer : layers_) {
    auto names = layer->trainable_params();
    out.insert(out.end(), names.begin(), names.end());
  }
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

int Model::layer_count() const {
  int n = 0;
  for (const auto& layer : layers_) n += layer->layer_count();
  return n;
}

nlohmann::json Model::graph() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : layers_) layers.push_back(layer->config());
  return {{"format", "histo-graph"},
          {"padding", "same_symmetric_zero"},
          {"num_classes", num_classes_},
          {"input_resolution", input_resolution_},
          {"info", info_},
          {"layers", layers}};
}

Model Model::from_graph(const nlohmann::json& graph, ParamMap params) {
  if (graph.value("padding", std::string()) != "same_symmetric_zero") {
    throw Error(ErrorCode::UnsupportedVersion, "unsupported padding convention");
  }
  std::vector<LayerPtr> layers;
  for (const auto& j : graph.at("layers")) layers.push_back(layer_from_json(j));
  return Model(std::move(layers), std::move(params), graph.at("num_classes").get<int>(),
               graph.at("input_resolution").get<int>(),
               graph.value("info", nlohmann::json::object()));
}

Model make_model(std::vector<LayerPtr> layers, int num_classes, int input_resolution,
                 std::uint64_t init_seed, nlohmann::json info) {
  Rng rng(init_seed);
  ParamMap params;
  for (const auto& layer : layers) layer->init_params(params, rng);
  return Model(std::move(layers), std::move(params), num_classes, input_resolution,
               std::move(info));
}

Model build_model(const ArchSpec& spec, int num_classes, std::uint64_t init_seed) {
  if (const auto problems = check_arch(spec); !problems.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "invalid architecture: " + problems.front());
  }
  std::vector<LayerPtr> layers;
  layers.push_back(std::make_shared<Conv2d>("stem.conv", 3, spec.stem_filters, 3, 2, false));
  layers.push_back(std::make_shared<BatchNorm>("stem.bn", spec.stem_filters));
  layers.push_back(std::make_shared<Swish>("stem.act"));
  int channels = spec.stem_filters;
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& block = spec.blocks[b];
    if (block.filters_in != channels) {
      throw Error(ErrorCode::ShapeMismatch, "block " + std::to_string(b + 1) + " expects " +
                                                std::to_string(block.filters_in) +
                                                " input filters, previous stage gives " +
                                                std::to_string(channels));
    }
    const auto& kinds = spec.sub_block_plan[b];
    for (std::size_t r = 0; r < kinds.size(); ++r) {
      MBConv::Options o;
      o.in_channels = r == 0 ? block.filters_in : block.filters_out;
      o.out_channels = block.filters_out;
      o.kernel = block.kernel;
      o.stride = r == 0 ? block.stride : 1;
      o.expand_ratio = block.expand_ratio;
      o.se_ratio = block.se_ratio;
      o.kind = static_cast<int>(kinds[r]);
      layers.push_back(std::make_shared<MBConv>(
          "block" + std::to_string(b + 1) + "." + std::to_string(r), o));
    }
    channels = block.filters_out;
  }
  layers.push_back(std::make_shared<Conv2d>("head.conv", channels, spec.head_filters, 1, 1, false));
  layers.push_back(std::make_shared<BatchNorm>("head.bn", spec.head_filters));
  layers.push_back(std::make_shared<Swish>("head.act"));
  layers.push_back(std::make_shared<GlobalAvgPool>("head.pool"));
  layers.push_back(std::make_shared<Dense>("classifier", spec.head_filters, num_classes));

  nlohmann::json info = {{"family", "efficientnet"}, {"arch", spec}};
  if (spec.phi >= 0) info["phi"] = spec.phi;
  return make_model(std::move(layers), num_classes, spec.input_resolution, init_seed,
                    std::move(info));
}

Model build_compact_model(int input_resolution, int width, int num_classes,
                          std::uint64_t init_seed) {
  std::vector<LayerPtr> layers;
  layers.push_back(std::make_shared<Conv2d>("stem.conv", 3, width, 3, 2, true));
  layers.push_back(std::make_shared<Swish>("stem.act"));
  MBConv::Options o;
  o.in_channels = width;
  o.out_channels = width;
  o.kernel = 3;
  o.stride = 1;
  o.expand_ratio = 1.0;
  o.se_ratio = 0.25;
  o.kind = 1;
  layers.push_back(std::make_shared<MBConv>("block1.0", o));
  layers.push_back(std::make_shared<GlobalAvgPool>("head.pool"));
  layers.push_back(std::make_shared<Dense>("classifier", width, num_classes));
  return make_model(std::move(layers), num_classes, input_resolution, init_seed,
                    {{"family", "compact"}, {"width", width}});
}

Tensor images_to_tensor(std::span<const Image> images) {
  if (images.empty()) throw Error(ErrorCode::EmptyInput, "no images for batch");
  const int w = images.front().width();
  const int h = images.front().height();
  const int c = images.front().channels();
  Tensor t({static_cast<int>(images.size()), c, h, w});
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = images[n];
    if (img.width() != w || img.height() != h || img.channels() != c) {
      throw Error(ErrorCode::ShapeMismatch, "images in a batch must share one size");
    }
    const auto px = img.data();
    float* dst = t.data() + n * c * plane;
    for (std::size_t i = 0; i < plane; ++i)
      for (int ch = 0; ch < c; ++ch) dst[ch * plane + i] = px[i * c + ch] / 255.0f;
  }
  return t;
}

}  // namespace histo::nn
