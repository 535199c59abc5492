#include "histocam/datakit.hpp"

#include <algorithm>
#include <iomanip>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "histocam/errors.hpp"

namespace histocam::datakit {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view class_dir_name(TissueClass c) {
  switch (c) {
    case TissueClass::lung_aca: return "lung_aca";
    case TissueClass::lung_scc: return "lung_scc";
    case TissueClass::lung_n: return "lung_n";
    case TissueClass::colon_aca: return "colon_aca";
    case TissueClass::colon_n: return "colon_n";
  }
  return "unknown";
}

std::optional<TissueClass> parse_class(std::string_view name) {
  for (auto c : kAllClasses) {
    if (class_dir_name(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view task_name(Task task) {
  switch (task) {
    case Task::lung: return "lung";
    case Task::lung_subtype: return "lung_subtype";
    case Task::colon: return "colon";
  }
  return "unknown";
}

Task parse_task(std::string_view name) {
  for (auto t : {Task::lung, Task::lung_subtype, Task::colon}) {
    if (task_name(t) == name) return t;
  }
  throw ConfigError("unknown task '" + std::string(name) + "' (expected lung, lung_subtype or colon)");
}

std::vector<TissueClass> task_classes(Task task) {
  switch (task) {
    case Task::lung: return {TissueClass::lung_aca, TissueClass::lung_scc, TissueClass::lung_n};
    case Task::lung_subtype: return {TissueClass::lung_aca, TissueClass::lung_scc};
    case Task::colon: return {TissueClass::colon_aca, TissueClass::colon_n};
  }
  return {};
}

int binary_label(Task task, TissueClass c) {
  switch (task) {
    case Task::lung:
      if (c == TissueClass::lung_aca || c == TissueClass::lung_scc) return 1;
      if (c == TissueClass::lung_n) return 0;
      break;
    case Task::lung_subtype:
      if (c == TissueClass::lung_aca) return 1;
      if (c == TissueClass::lung_scc) return 0;
      break;
    case Task::colon:
      if (c == TissueClass::colon_aca) return 1;
      if (c == TissueClass::colon_n) return 0;
      break;
  }
  throw DataError("class " + std::string(class_dir_name(c)) + " is not part of task " + std::string(task_name(task)));
}

std::size_t Inventory::count(TissueClass c) const {
  auto it = images.find(c);
  return it == images.end() ? 0 : it->second.size();
}

std::vector<TissueClass> Inventory::missing_for(Task task) const {
  std::vector<TissueClass> missing;
  for (auto c : task_classes(task)) {
    if (count(c) == 0) missing.push_back(c);
  }
  return missing;
}

namespace {

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

Inventory scan_dataset(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw DataError("dataset root " + root.string() + " is not a directory");

  Inventory inv;
  inv.root = root;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());

  for (const auto& dir : dirs) {
    const auto name = dir.filename().string();
    const auto cls = parse_class(name);
    if (!cls) {
      inv.warnings.push_back("skipping unknown class directory '" + name + "'");
      continue;
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path().lexically_relative(root));
    }
    if (files.empty()) throw DataError("class directory " + dir.string() + " contains no images");
    std::sort(files.begin(), files.end());
    inv.images[*cls] = std::move(files);
  }
  if (inv.images.empty()) throw DataError("no class directories with images under " + root.string());
  return inv;
}

std::map<TissueClass, std::size_t> class_counts(const std::vector<LabeledExample>& partition) {
  std::map<TissueClass, std::size_t> counts;
  for (const auto& e : partition) ++counts[e.tissue];
  return counts;
}

PartitionSizes partition_sizes(std::size_t n) {
  PartitionSizes s;
  s.test = n / 5;
  s.validation = (n - s.test) / 5;
  s.train = n - s.test - s.validation;
  return s;
}

DatasetSplit build_split(const Inventory& inventory, Task task, std::uint64_t seed) {
  const auto missing = inventory.missing_for(task);
  if (!missing.empty()) {
    std::string names;
    for (auto c : missing) names += (names.empty() ? "" : ", ") + std::string(class_dir_name(c));
    throw DataError("task " + std::string(task_name(task)) + " needs missing classes: " + names);
  }

  std::map<TissueClass, std::size_t> quota;
  switch (task) {
    case Task::lung: {
      const std::size_t per_malignant = std::min({inventory.count(TissueClass::lung_aca),
                                                  inventory.count(TissueClass::lung_scc),
                                                  inventory.count(TissueClass::lung_n) / 2});
      quota[TissueClass::lung_aca] = per_malignant;
      quota[TissueClass::lung_scc] = per_malignant;
      quota[TissueClass::lung_n] = 2 * per_malignant;
      break;
    }
    case Task::lung_subtype:
    case Task::colon: {
      const auto classes = task_classes(task);
      const std::size_t n = std::min(inventory.count(classes[0]), inventory.count(classes[1]));
      for (auto c : classes) quota[c] = n;
      break;
    }
  }

  DatasetSplit split;
  split.task = task;
  split.seed = seed;
  for (auto c : task_classes(task)) {
    const std::size_t n = quota[c];
    if (n < 5) {
      throw DataError("class " + std::string(class_dir_name(c)) + " contributes " + std::to_string(n) +
                      " images; at least 5 are needed to fill every partition");
    }
    auto files = inventory.images.at(c);
    std::sort(files.begin(), files.end());
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c)};
    std::mt19937_64 rng(seq);
    std::shuffle(files.begin(), files.end(), rng);
    files.resize(n);

    const auto sizes = partition_sizes(n);
    const int label = binary_label(task, c);
    for (std::size_t i = 0; i < n; ++i) {
      LabeledExample ex{inventory.root / files[i], c, label};
      if (i < sizes.test) {
        split.test.push_back(std::move(ex));
      } else if (i < sizes.test + sizes.validation) {
        split.validation.push_back(std::move(ex));
      } else {
        split.train.push_back(std::move(ex));
      }
    }
  }
  return split;
}

namespace {

json partition_json(const std::vector<LabeledExample>& partition, const fs::path& root) {
  json arr = json::array();
  for (const auto& e : partition) {
    const auto* p = std::get_if<fs::path>(&e.image);
    if (!p) throw ContractError("in-memory examples cannot be written to a split manifest");
    arr.push_back(p->lexically_relative(root).generic_string());
  }
  return arr;
}

std::vector<LabeledExample> partition_from_json(const json& arr, Task task, const fs::path& root) {
  std::vector<LabeledExample> out;
  for (const auto& item : arr) {
    const fs::path rel = item.get<std::string>();
    const auto cls = parse_class(rel.begin()->string());
    if (!cls) throw FormatError("manifest entry '" + rel.generic_string() + "' is not under a known class directory");
    out.push_back({root / rel, *cls, binary_label(task, *cls)});
  }
  return out;
}

}  // namespace

std::string split_to_json(const DatasetSplit& split, const fs::path& root) {
  json j;
  j["task"] = std::string(task_name(split.task));
  j["seed"] = split.seed;
  j["root"] = root.generic_string();
  j["train"] = partition_json(split.train, root);
  j["validation"] = partition_json(split.validation, root);
  j["test"] = partition_json(split.test, root);
  return j.dump(2) + "\n";
}

DatasetSplit split_from_json(const std::string& text, fs::path* root_out) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("split manifest is not valid JSON: ") + e.what());
  }
  for (const char* key : {"task", "seed", "root", "train", "validation", "test"}) {
    if (!j.contains(key)) throw FormatError(std::string("split manifest lacks '") + key + "'");
  }
  DatasetSplit split;
  try {
    split.task = parse_task(j["task"].get<std::string>());
    split.seed = j["seed"].get<std::uint64_t>();
    const fs::path root = j["root"].get<std::string>();
    split.train = partition_from_json(j["train"], split.task, root);
    split.validation = partition_from_json(j["validation"], split.task, root);
    split.test = partition_from_json(j["test"], split.task, root);
    if (root_out) *root_out = root;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed split manifest: ") + e.what());
  }
  return split;
}

std::string split_summary(const DatasetSplit& split) {
  const auto train = class_counts(split.train);
  const auto val = class_counts(split.validation);
  const auto test = class_counts(split.test);
  auto cell = [](const std::map<TissueClass, std::size_t>& m, std::initializer_list<TissueClass> keys) -> std::string {
    for (auto k : keys) {
      auto it = m.find(k);
      if (it != m.end()) return std::to_string(it->second);
    }
    return "--";
  };
  std::map<TissueClass, std::size_t> pre_validation = train;
  for (const auto& [c, n] : val) pre_validation[c] += n;

  const char* title = split.task == Task::lung ? "Lung cancer"
                      : split.task == Task::lung_subtype ? "Lung cancer subtypes"
                                                          : "Colon cancer";
  std::ostringstream os;
  os << std::left << std::setw(24) << "Classification task" << std::setw(27) << "Training set 80%"
     << "Test set 20%\n";
  os << std::setw(24) << "" << std::setw(9) << "acc/cc" << std::setw(9) << "scc" << std::setw(9) << "ben"
     << std::setw(9) << "acc/cc" << std::setw(9) << "scc" << "ben\n";
  auto row = [&](const char* name, const std::map<TissueClass, std::size_t>& left,
                 const std::map<TissueClass, std::size_t>* right) {
    os << std::setw(24) << name << std::setw(9) << cell(left, {TissueClass::lung_aca, TissueClass::colon_aca})
       << std::setw(9) << cell(left, {TissueClass::lung_scc}) << std::setw(9)
       << cell(left, {TissueClass::lung_n, TissueClass::colon_n});
    if (right) {
      os << std::setw(9) << cell(*right, {TissueClass::lung_aca, TissueClass::colon_aca}) << std::setw(9)
         << cell(*right, {TissueClass::lung_scc}) << cell(*right, {TissueClass::lung_n, TissueClass::colon_n});
    }
    os << "\n";
  };
  row(title, pre_validation, &test);
  row("  of which validation", val, nullptr);
  row("  of which train", train, nullptr);
  return os.str();
}

Image load_image(const LabeledExample& example, const network::InputSize& input_size) {
  if (input_size.channels != 3) throw ParameterError("images are RGB; model input must have 3 channels");
  if (input_size.height != input_size.width) throw ParameterError("model input must be square");
  const Image* src = std::get_if<Image>(&example.image);
  Image decoded;
  if (!src) {
    decoded = read_image(std::get<fs::path>(example.image));
    src = &decoded;
  }
  return augment::crop_square_resize(*src, static_cast<int>(input_size.height));
}

ag::Tensor images_to_tensor(const std::vector<Image>& images) {
  if (images.empty()) throw DataError("cannot build a tensor from an empty batch");
  const std::size_t h = images[0].height, w = images[0].width;
  std::vector<double> values(images.size() * 3 * h * w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = images[n];
    if (img.width != w || img.height != h) throw DimensionError("batch images differ in size");
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          values[((n * 3 + c) * h + y) * w + x] = static_cast<double>(img.at(x, y, c)) / 255.0;
  }
  return ag::Tensor({images.size(), 3, h, w}, std::move(values));
}

Batch load_batch(const std::vector<LabeledExample>& examples, const network::InputSize& input_size,
                 const augment::Pipeline* augmenter, std::uint64_t first_draw_index) {
  std::vector<Image> images;
  Batch batch;
  images.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    Image img = load_image(examples[i], input_size);
    if (augmenter) img = augment::apply_pipeline(*augmenter, img, first_draw_index + i);
    images.push_back(std::move(img));
    batch.labels.push_back(examples[i].label);
  }
  batch.images = images_to_tensor(images);
  return batch;
}

}  // namespace histocam::datakit
