#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "histocam/ops.hpp"
#include "histocam/tensor.hpp"

namespace histocam::network {

using ag::ops::Mode;

struct InputSize {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t channels = 3;

  friend bool operator==(const InputSize&, const InputSize&) = default;
};

struct LayerSpec {
  enum class Kind { conv, relu, max_pool, avg_pool };

  Kind kind = Kind::conv;
  std::size_t channels = 0;  // conv only
  std::size_t kernel = 3;    // conv kernel extent or pooling window
  std::size_t stride = 1;
  std::size_t padding = 0;

  static LayerSpec conv(std::size_t channels, std::size_t kernel = 3, std::size_t stride = 1, std::size_t padding = 1);
  static LayerSpec relu();
  static LayerSpec max_pool(std::size_t window = 2, std::size_t stride = 2);
  static LayerSpec avg_pool(std::size_t window = 2, std::size_t stride = 2);
};

std::string_view kind_name(LayerSpec::Kind kind);

struct ModelConfig {
  std::string name = "TinyVGG";
  InputSize input;
  std::vector<LayerSpec> backbone;
  std::set<std::string> frozen_layers;
  double dropout_rate = 0.5;
  std::uint64_t seed = 0;

  /// Three conv(3x3, same padding) -> relu -> maxpool(2) blocks with the given widths.
  static ModelConfig tiny_vgg(InputSize input, std::uint64_t seed, std::vector<std::size_t> widths = {8, 16, 32});
};

/// Activations recorded by one forward pass. Tensors stay attached to the tape
/// the pass was recorded on, so their gradients are available after backward.
struct ForwardPass {
  ag::Tensor logits;         // [N,1] pre-sigmoid score
  ag::Tensor probabilities;  // [N,1]
  std::vector<std::pair<std::string, ag::Tensor>> activations;

  const ag::Tensor& activation(std::string_view layer_id) const;
};

/// Anything that maps an image batch to a single binary logit. The explain
/// module works against this interface so it can be exercised with small
/// hand-built models as well as the full network.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual ForwardPass forward(ag::Tape& tape, const ag::Tensor& batch, Mode mode, std::mt19937_64* rng) const = 0;
  /// Layer whose activation feeds the classification head.
  virtual std::string feature_layer() const = 0;
};

struct Parameter {
  std::string id;        // "<layer>.weight" / "<layer>.bias"
  std::string layer_id;  // owning layer
  ag::Tensor value;
};

/// Desk-scale CNN: configurable conv backbone followed by the concat-pool head
///   concat[global_max(F), global_avg(F), flatten(F)] -> dropout -> dense -> sigmoid
/// where F is the last backbone activation.
///
/// Layer ids are assigned per kind in order of appearance (conv1, relu1,
/// pool1, ...); the head's dense layer is "head". The id "features" aliases
/// the last backbone layer in ForwardPass lookups.
class Model final : public Classifier {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }

  ForwardPass forward(ag::Tape& tape, const ag::Tensor& batch, Mode mode, std::mt19937_64* rng) const override;
  std::string feature_layer() const override;

  /// Shape of the last backbone activation for one sample: {K, u, v}.
  ag::Shape feature_shape() const { return feature_shape_; }
  /// K * (2 + u * v).
  std::size_t head_input_length() const;

  std::vector<std::string> layer_ids() const;
  std::vector<std::string> backbone_parameter_layers() const;

  std::vector<Parameter>& parameters() noexcept { return parameters_; }
  const std::vector<Parameter>& parameters() const noexcept { return parameters_; }
  const Parameter& parameter(std::string_view id) const;

  void set_frozen(const std::set<std::string>& layer_ids);
  bool is_frozen(std::string_view layer_id) const;

  void save_weights(const std::filesystem::path& path) const;
  /// All-or-nothing: on any error the current weights are left untouched.
  void load_weights(const std::filesystem::path& path);

 private:
  struct Layer {
    std::string id;
    LayerSpec spec;
    int weight = -1;  // index into parameters_ for conv layers
    int bias = -1;
  };

  ag::Tensor apply_layer(ag::Tape& tape, const Layer& layer, const ag::Tensor& x) const;

  ModelConfig config_;
  std::vector<Layer> layers_;
  std::vector<Parameter> parameters_;
  ag::Shape feature_shape_;
  int head_weight_ = -1;
  int head_bias_ = -1;
};

ag::Tensor forward_probabilities(const Model& model, const ag::Tensor& batch);

}  // namespace histocam::network
