#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "histocam/augment.hpp"
#include "histocam/datakit.hpp"
#include "histocam/metrics.hpp"
#include "histocam/network.hpp"
#include "histocam/trainer.hpp"

namespace histocam::cli {

struct DatasetSection {
  /// LC25000-style root with one directory per class. Empty when synthetic.
  std::filesystem::path root;
  bool synth = false;
  /// Where synthetic images go; defaults to <output_dir>/synth.
  std::filesystem::path synth_dir;
  std::size_t per_class = 200;
  std::size_t size = 64;
};

struct ModelSection {
  std::string name = "TinyVGG";
  std::size_t input_size = 64;
  std::vector<std::size_t> widths = {8, 16, 32};
  std::vector<std::string> frozen_layers;
  double dropout = 0.5;
};

struct ExplainSection {
  std::string layer;  // empty: the model's feature layer
  std::vector<std::string> methods = {"gradcam", "smoothgrad"};
  std::size_t samples = 25;
  double sigma = 0.15;
  double alpha = 0.5;
  std::optional<int> class_index;  // empty: the predicted class
};

/// Everything a run depends on besides the dataset bytes. One seed drives the
/// split, the initial weights, the shuffles, dropout, augmentation and
/// SmoothGrad noise.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "histocam-out";
  datakit::Task task = datakit::Task::colon;
  DatasetSection dataset;
  ModelSection model;
  trainer::TrainConfig train;
  std::vector<augment::Step> augment_steps = augment::Pipeline::lc25000_baseline(0).steps;
  metrics::Averaging averaging = metrics::Averaging::positive_class;
  ExplainSection explain;

  network::ModelConfig model_config() const;
  augment::Pipeline augmenter() const;
  std::filesystem::path dataset_root() const;

  /// Cross-field checks; throws ConfigError.
  void validate() const;
};

/// Parses a config document. Every key is optional, unknown keys are errors.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Fully resolved config (all defaults spelled out) as pretty JSON.
std::string config_to_json(const PipelineConfig& config);

}  // namespace histocam::cli
