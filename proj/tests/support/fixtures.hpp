#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "histocam/datakit.hpp"

namespace histocam::testing {

/// In-memory colon split built from synthetic textures; no files involved.
inline datakit::DatasetSplit memory_split(std::size_t train_per_class, std::size_t val_per_class,
                                          std::size_t test_per_class, std::size_t size, std::uint64_t seed) {
  datakit::DatasetSplit split;
  split.task = datakit::Task::colon;
  split.seed = seed;
  std::uint64_t k = seed * 1000003;
  auto fill = [&](std::vector<datakit::LabeledExample>& part, std::size_t per_class) {
    for (std::size_t i = 0; i < per_class; ++i) {
      for (int label : {1, 0}) {
        datakit::LabeledExample e;
        e.image = datakit::synth_texture(label, size, ++k);
        e.tissue = label == 1 ? datakit::TissueClass::colon_aca : datakit::TissueClass::colon_n;
        e.label = label;
        part.push_back(std::move(e));
      }
    }
  };
  fill(split.train, train_per_class);
  fill(split.validation, val_per_class);
  fill(split.test, test_per_class);
  return split;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("histocam-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace histocam::testing
