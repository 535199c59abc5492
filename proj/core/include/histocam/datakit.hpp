#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "histocam/augment.hpp"
#include "histocam/image.hpp"
#include "histocam/network.hpp"
#include "histocam/tensor.hpp"

namespace histocam::datakit {

enum class TissueClass { lung_aca, lung_scc, lung_n, colon_aca, colon_n };

inline constexpr std::array<TissueClass, 5> kAllClasses = {TissueClass::lung_aca, TissueClass::lung_scc,
                                                           TissueClass::lung_n, TissueClass::colon_aca,
                                                           TissueClass::colon_n};

std::string_view class_dir_name(TissueClass c);
std::optional<TissueClass> parse_class(std::string_view name);

enum class Task { lung, lung_subtype, colon };

std::string_view task_name(Task task);
Task parse_task(std::string_view name);

/// Classes drawn for a task, positive-side classes first.
std::vector<TissueClass> task_classes(Task task);

/// Label 1: lung -> aca and scc; lung_subtype -> aca; colon -> colon_aca.
int binary_label(Task task, TissueClass c);

struct LabeledExample {
  std::variant<std::filesystem::path, Image> image;
  TissueClass tissue = TissueClass::colon_n;
  int label = 0;
};

struct Inventory {
  std::filesystem::path root;
  std::map<TissueClass, std::vector<std::filesystem::path>> images;  // sorted, relative to root
  std::vector<std::string> warnings;

  std::size_t count(TissueClass c) const;
  /// Classes the task needs but the inventory lacks.
  std::vector<TissueClass> missing_for(Task task) const;
};

/// Lists class directories under `root`. Unknown directories are skipped with
/// a warning; an empty known class or an empty root is a DataError.
Inventory scan_dataset(const std::filesystem::path& root);

struct DatasetSplit {
  Task task = Task::colon;
  std::uint64_t seed = 0;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> validation;
  std::vector<LabeledExample> test;
};

/// Per-class counts of one partition, keyed by class.
std::map<TissueClass, std::size_t> class_counts(const std::vector<LabeledExample>& partition);

struct PartitionSizes {
  std::size_t test = 0;
  std::size_t validation = 0;
  std::size_t train = 0;
};

/// test = floor(0.2 n); validation = floor(0.2 (n - test)); train = rest.
PartitionSizes partition_sizes(std::size_t n);

/// Table-1 style split: per-class seeded shuffle of the sorted listing, draw
/// the task's quota, then carve test and validation per class.
DatasetSplit build_split(const Inventory& inventory, Task task, std::uint64_t seed);

/// Manifest JSON: {"task", "seed", "root", "train", "validation", "test"}
/// with partitions as arrays of root-relative paths.
std::string split_to_json(const DatasetSplit& split, const std::filesystem::path& root);
DatasetSplit split_from_json(const std::string& json, std::filesystem::path* root = nullptr);

/// Table-1 layout: training (train + validation) and test counts per class.
std::string split_summary(const DatasetSplit& split);

/// Crop-resizes to the input size, applies the augmenter (if any) with draw
/// index `first_draw_index + i` for example i, and scales to [0,1] NCHW.
struct Batch {
  ag::Tensor images;
  std::vector<int> labels;
};

Image load_image(const LabeledExample& example, const network::InputSize& input_size);
ag::Tensor images_to_tensor(const std::vector<Image>& images);
Batch load_batch(const std::vector<LabeledExample>& examples, const network::InputSize& input_size,
                 const augment::Pipeline* augmenter = nullptr, std::uint64_t first_draw_index = 0);

struct SynthOptions {
  Task task = Task::colon;
  std::size_t per_class = 200;
  std::size_t size = 64;
  std::uint64_t seed = 0;
};

/// Procedural texture for one class. Label-0 classes get smooth blob fields,
/// label-1 classes get striated fields with dark elliptical nuclei.
Image synth_texture(int label, std::size_t size, std::uint64_t seed);

/// Writes per_class PNGs into each class directory of the task under out_dir.
/// Returns the number of files written.
std::size_t synth_generate(const std::filesystem::path& out_dir, const SynthOptions& options);

}  // namespace histocam::datakit
