#include "histocam/network.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "histocam/errors.hpp"

namespace histocam::network {

using ag::Shape;
using ag::Tensor;

LayerSpec LayerSpec::conv(std::size_t channels, std::size_t kernel, std::size_t stride, std::size_t padding) {
  return {Kind::conv, channels, kernel, stride, padding};
}
LayerSpec LayerSpec::relu() { return {Kind::relu, 0, 0, 1, 0}; }
LayerSpec LayerSpec::max_pool(std::size_t window, std::size_t stride) { return {Kind::max_pool, 0, window, stride, 0}; }
LayerSpec LayerSpec::avg_pool(std::size_t window, std::size_t stride) { return {Kind::avg_pool, 0, window, stride, 0}; }

std::string_view kind_name(LayerSpec::Kind kind) {
  switch (kind) {
    case LayerSpec::Kind::conv: return "conv";
    case LayerSpec::Kind::relu: return "relu";
    case LayerSpec::Kind::max_pool: return "max_pool";
    case LayerSpec::Kind::avg_pool: return "avg_pool";
  }
  return "unknown";
}

ModelConfig ModelConfig::tiny_vgg(InputSize input, std::uint64_t seed, std::vector<std::size_t> widths) {
  ModelConfig config;
  config.input = input;
  config.seed = seed;
  for (auto width : widths) {
    config.backbone.push_back(LayerSpec::conv(width));
    config.backbone.push_back(LayerSpec::relu());
    config.backbone.push_back(LayerSpec::max_pool());
  }
  return config;
}

const Tensor& ForwardPass::activation(std::string_view layer_id) const {
  for (const auto& [id, t] : activations) {
    if (id == layer_id) return t;
  }
  throw LookupError("no activation recorded for layer '" + std::string(layer_id) + "'");
}

namespace {

Tensor he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> values(ag::shape_numel(shape));
  for (auto& v : values) v = (2.0 * ag::ops::uniform01(rng) - 1.0) * limit;
  return Tensor(std::move(shape), std::move(values), true);
}

std::string layer_prefix(LayerSpec::Kind kind) {
  switch (kind) {
    case LayerSpec::Kind::conv: return "conv";
    case LayerSpec::Kind::relu: return "relu";
    case LayerSpec::Kind::max_pool:
    case LayerSpec::Kind::avg_pool: return "pool";
  }
  return "layer";
}

}  // namespace

Model::Model(ModelConfig config) : config_(std::move(config)) {
  const auto& in = config_.input;
  if (in.height == 0 || in.width == 0 || in.channels == 0) throw ConfigError("input size must be positive");
  if (!(config_.dropout_rate >= 0.0 && config_.dropout_rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }

  std::mt19937_64 rng(config_.seed);
  std::map<std::string, int> counters;
  std::size_t c = in.channels, h = in.height, w = in.width;

  for (const auto& spec : config_.backbone) {
    const auto prefix = layer_prefix(spec.kind);
    Layer layer{prefix + std::to_string(++counters[prefix]), spec};
    switch (spec.kind) {
      case LayerSpec::Kind::conv: {
        if (spec.channels == 0 || spec.kernel == 0 || spec.stride == 0) {
          throw ConfigError("layer " + layer.id + ": channels, kernel and stride must be positive");
        }
        if (h + 2 * spec.padding < spec.kernel || w + 2 * spec.padding < spec.kernel) {
          throw ConfigError("layer " + layer.id + ": kernel " + std::to_string(spec.kernel) + " collapses the " +
                            std::to_string(h) + "x" + std::to_string(w) + " feature map below 1x1");
        }
        const std::size_t fan_in = c * spec.kernel * spec.kernel;
        layer.weight = static_cast<int>(parameters_.size());
        parameters_.push_back({layer.id + ".weight", layer.id, he_uniform({spec.channels, c, spec.kernel, spec.kernel}, fan_in, rng)});
        layer.bias = static_cast<int>(parameters_.size());
        parameters_.push_back({layer.id + ".bias", layer.id, Tensor::zeros({spec.channels}, true)});
        h = (h + 2 * spec.padding - spec.kernel) / spec.stride + 1;
        w = (w + 2 * spec.padding - spec.kernel) / spec.stride + 1;
        c = spec.channels;
        break;
      }
      case LayerSpec::Kind::relu:
        break;
      case LayerSpec::Kind::max_pool:
      case LayerSpec::Kind::avg_pool:
        if (spec.kernel == 0 || spec.stride == 0) throw ConfigError("layer " + layer.id + ": window and stride must be positive");
        if (spec.kernel > h || spec.kernel > w) {
          throw ConfigError("layer " + layer.id + ": window " + std::to_string(spec.kernel) + " collapses the " +
                            std::to_string(h) + "x" + std::to_string(w) + " feature map below 1x1");
        }
        h = (h - spec.kernel) / spec.stride + 1;
        w = (w - spec.kernel) / spec.stride + 1;
        break;
    }
    layers_.push_back(std::move(layer));
  }
  feature_shape_ = {c, h, w};

  const std::size_t head_in = head_input_length();
  head_weight_ = static_cast<int>(parameters_.size());
  parameters_.push_back({"head.weight", "head", he_uniform({head_in, 1}, head_in, rng)});
  head_bias_ = static_cast<int>(parameters_.size());
  parameters_.push_back({"head.bias", "head", Tensor::zeros({1}, true)});

  set_frozen(config_.frozen_layers);
}

std::size_t Model::head_input_length() const {
  return feature_shape_[0] * (2 + feature_shape_[1] * feature_shape_[2]);
}

std::string Model::feature_layer() const { return layers_.empty() ? "input" : layers_.back().id; }

std::vector<std::string> Model::layer_ids() const {
  std::vector<std::string> ids;
  for (const auto& l : layers_) ids.push_back(l.id);
  ids.emplace_back("head");
  return ids;
}

std::vector<std::string> Model::backbone_parameter_layers() const {
  std::vector<std::string> ids;
  for (const auto& l : layers_) {
    if (l.weight >= 0) ids.push_back(l.id);
  }
  return ids;
}

const Parameter& Model::parameter(std::string_view id) const {
  for (const auto& p : parameters_) {
    if (p.id == id) return p;
  }
  throw LookupError("no parameter named '" + std::string(id) + "'");
}

void Model::set_frozen(const std::set<std::string>& layer_ids) {
  const auto known = this->layer_ids();
  for (const auto& id : layer_ids) {
    if (std::find(known.begin(), known.end(), id) == known.end()) {
      throw LookupError("cannot freeze unknown layer '" + id + "'");
    }
  }
  config_.frozen_layers = layer_ids;
  for (auto& p : parameters_) p.value.set_requires_grad(!layer_ids.contains(p.layer_id));
}

bool Model::is_frozen(std::string_view layer_id) const {
  return config_.frozen_layers.contains(std::string(layer_id));
}

Tensor Model::apply_layer(ag::Tape& tape, const Layer& layer, const Tensor& x) const {
  const auto& s = layer.spec;
  switch (s.kind) {
    case LayerSpec::Kind::conv:
      return ag::ops::conv2d(tape, x, parameters_[static_cast<std::size_t>(layer.weight)].value,
                             parameters_[static_cast<std::size_t>(layer.bias)].value, s.stride, s.padding);
    case LayerSpec::Kind::relu: return ag::ops::relu(tape, x);
    case LayerSpec::Kind::max_pool: return ag::ops::max_pool2d(tape, x, s.kernel, s.stride);
    case LayerSpec::Kind::avg_pool: return ag::ops::avg_pool2d(tape, x, s.kernel, s.stride);
  }
  throw ContractError("unknown layer kind");
}

ForwardPass Model::forward(ag::Tape& tape, const Tensor& batch, Mode mode, std::mt19937_64* rng) const {
  const auto& in = config_.input;
  if (batch.rank() != 4 || batch.dim(1) != in.channels || batch.dim(2) != in.height || batch.dim(3) != in.width) {
    throw DimensionError("model expects [N," + std::to_string(in.channels) + "," + std::to_string(in.height) + "," +
                         std::to_string(in.width) + "] input, got " + ag::shape_to_string(batch.shape()));
  }
  if (mode == Mode::train && config_.dropout_rate > 0.0 && rng == nullptr) {
    throw ContractError("train-mode forward needs a random engine for dropout");
  }

  ForwardPass pass;
  pass.activations.emplace_back("input", batch);
  Tensor x = batch;
  for (const auto& layer : layers_) {
    x = apply_layer(tape, layer, x);
    pass.activations.emplace_back(layer.id, x);
  }
  pass.activations.emplace_back("features", x);

  const std::array<Tensor, 3> parts{ag::ops::global_max_pool(tape, x), ag::ops::global_avg_pool(tape, x),
                                    ag::ops::flatten(tape, x)};
  Tensor head_in = ag::ops::concat(tape, parts, 1);
  pass.activations.emplace_back("head_input", head_in);

  std::mt19937_64 unused;
  Tensor dropped = ag::ops::dropout(tape, head_in, config_.dropout_rate, mode, rng ? *rng : unused);
  pass.logits = ag::ops::dense(tape, dropped, parameters_[static_cast<std::size_t>(head_weight_)].value,
                               parameters_[static_cast<std::size_t>(head_bias_)].value);
  pass.activations.emplace_back("logits", pass.logits);
  pass.probabilities = ag::ops::sigmoid(tape, pass.logits);
  return pass;
}

Tensor forward_probabilities(const Model& model, const Tensor& batch) {
  ag::Tape tape;
  tape.set_recording(false);
  return model.forward(tape, batch, Mode::eval, nullptr).probabilities;
}

}  // namespace histocam::network
