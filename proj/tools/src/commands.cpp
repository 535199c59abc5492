#include "histocam/cli/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "histocam/augment.hpp"
#include "histocam/errors.hpp"
#include "histocam/explain.hpp"
#include "histocam/image.hpp"
#include "histocam/network.hpp"

namespace histocam::cli {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void prepare_output(const PipelineConfig& config) {
  config.validate();
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create " + config.output_dir.string() + ": " + ec.message());
  write_text(config.output_dir / "config.json", config_to_json(config));
}

datakit::SynthOptions synth_options(const PipelineConfig& config) {
  return {config.task, config.dataset.per_class, config.dataset.size, config.seed};
}

// Regenerates the synthetic class directories from scratch so a smaller rerun
// cannot pick up leftovers of a larger one.
std::size_t generate_synth(const PipelineConfig& config, const fs::path& dir) {
  for (auto c : datakit::task_classes(config.task)) fs::remove_all(dir / datakit::class_dir_name(c));
  return datakit::synth_generate(dir, synth_options(config));
}

datakit::DatasetSplit split_for(const PipelineConfig& config, std::ostream& log) {
  const fs::path manifest = config.output_dir / "split.json";
  if (!fs::exists(manifest)) return cmd_split(config, log);
  auto split = datakit::split_from_json(read_text(manifest));
  if (split.task != config.task || split.seed != config.seed) {
    throw ConfigError(manifest.string() + " was drawn for task " + std::string(datakit::task_name(split.task)) +
                      " seed " + std::to_string(split.seed) + "; rerun 'split' for this config");
  }
  log << "using split " << manifest.string() << "\n";
  return split;
}

network::Model load_model(const PipelineConfig& config, const fs::path& weights) {
  network::Model model(config.model_config());
  if (!fs::is_regular_file(weights)) throw FormatError("weight file " + weights.string() + " does not exist");
  model.load_weights(weights);
  return model;
}

std::optional<explain::HeatmapKind> method_kind(const std::string& name) {
  if (name == "gradcam") return explain::HeatmapKind::gradcam;
  if (name == "saliency") return explain::HeatmapKind::vanilla_saliency;
  if (name == "smoothgrad") return explain::HeatmapKind::smoothgrad;
  return std::nullopt;
}

}  // namespace

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const DataError*>(&error) || dynamic_cast<const IoError*>(&error)) return kData;
  if (dynamic_cast<const NumericError*>(&error)) return kNumeric;
  if (dynamic_cast<const FormatError*>(&error)) return kArtifact;
  return kUsage;
}

datakit::DatasetSplit cmd_split(const PipelineConfig& config, std::ostream& log) {
  prepare_output(config);
  const fs::path root = config.dataset_root();
  if (config.dataset.synth) {
    const std::size_t n = generate_synth(config, root);
    log << "generated " << n << " synthetic images under " << root.string() << "\n";
  }
  const auto inventory = datakit::scan_dataset(root);
  for (const auto& w : inventory.warnings) log << "warning: " << w << "\n";
  auto split = datakit::build_split(inventory, config.task, config.seed);
  write_text(config.output_dir / "split.json", datakit::split_to_json(split, root));
  const std::string summary = datakit::split_summary(split);
  write_text(config.output_dir / "split.txt", summary);
  log << summary;
  return split;
}

std::vector<trainer::HistoryRecord> cmd_train(const PipelineConfig& config, std::ostream& log) {
  prepare_output(config);
  const auto split = split_for(config, log);
  network::Model model(config.model_config());
  const auto augmenter = config.augmenter();
  const bool augment = !augmenter.steps.empty();
  const auto history = trainer::train(model, split, augment ? &augmenter : nullptr, config.train,
                                      [&log](const trainer::EpochPredictions& p) { log << "epoch " << p.epoch << " done\n"; });
  model.save_weights(config.output_dir / "weights.hscw");
  const std::string csv = trainer::history_to_csv(history);
  write_text(config.output_dir / "history.csv", csv);
  log << csv;
  return history;
}

metrics::MetricsReport cmd_eval(const PipelineConfig& config, const fs::path& weights, std::ostream& log) {
  prepare_output(config);
  const auto split = split_for(config, log);
  if (split.test.empty()) throw DataError("test partition is empty");
  const network::Model model = load_model(config, weights);
  const auto probabilities = trainer::predict(model, split.test);
  std::vector<int> labels;
  labels.reserve(split.test.size());
  for (const auto& e : split.test) labels.push_back(e.label);
  auto report = metrics::evaluate(probabilities, labels, config.averaging);
  report.model = config.model.name;
  report.task = std::string(datakit::task_name(config.task));
  for (const auto& w : report.warnings) log << "warning: " << w << "\n";
  write_text(config.output_dir / "metrics.json", metrics::report_to_json(report));
  const std::string table = metrics::report_table({report});
  write_text(config.output_dir / "metrics.txt", table);
  log << table;
  return report;
}

std::vector<fs::path> cmd_explain(const PipelineConfig& config, const fs::path& weights,
                                  const std::vector<fs::path>& images, std::ostream& log) {
  prepare_output(config);
  const network::Model model = load_model(config, weights);
  const std::string layer = config.explain.layer.empty() ? model.feature_layer() : config.explain.layer;
  const auto ids = model.layer_ids();
  if (std::find(ids.begin(), ids.end(), layer) == ids.end()) {
    throw ConfigError("explain.layer '" + layer + "' is not a layer of the model");
  }

  std::vector<fs::path> written;
  std::size_t decoded = 0;
  for (const auto& path : images) {
    Image source;
    try {
      source = read_image(path);
    } catch (const DataError& e) {
      log << "warning: " << e.what() << "\n";
      continue;
    }
    ++decoded;
    const Image img = augment::crop_square_resize(source, static_cast<int>(config.model.input_size));
    const ag::Tensor x = datakit::images_to_tensor({img});
    const double probability = network::forward_probabilities(model, x).item();
    const int predicted = explain::classify(model, x);
    const int cls = config.explain.class_index.value_or(predicted);

    for (const auto& method : config.explain.methods) {
      const auto kind = method_kind(method);
      explain::Heatmap map;
      switch (*kind) {
        case explain::HeatmapKind::gradcam: map = explain::gradcam(model, x, cls, layer); break;
        case explain::HeatmapKind::vanilla_saliency: map = explain::vanilla_saliency(model, x, cls); break;
        case explain::HeatmapKind::smoothgrad:
          map = explain::smoothgrad(model, x, cls, config.explain.samples, config.explain.sigma, config.seed);
          break;
      }
      const std::string stem = path.stem().string() + "." + explain::kind_name(map.kind) + "." + std::to_string(cls);
      const fs::path png = config.output_dir / (stem + ".png");
      write_png(png, explain::render_overlay(map, img, config.explain.alpha));

      nlohmann::ordered_json side;
      side["image"] = path.filename().string();
      side["method"] = explain::kind_name(map.kind);
      side["class"] = cls;
      side["predicted"] = predicted;
      side["probability"] = probability;
      side["score"] = map.score;
      side["layer"] = map.kind == explain::HeatmapKind::gradcam ? map.layer_id : std::string("input");
      side["width"] = map.width;
      side["height"] = map.height;
      if (map.kind != explain::HeatmapKind::gradcam) side["n"] = map.samples;
      if (map.kind == explain::HeatmapKind::smoothgrad) {
        side["sigma"] = map.sigma;
        side["seed"] = map.seed;
      }
      write_text(config.output_dir / (stem + ".json"), side.dump(2) + "\n");
      log << "wrote " << png.string() << "\n";
      written.push_back(png);
    }
  }
  if (decoded == 0) throw DataError("none of the " + std::to_string(images.size()) + " images could be decoded");
  return written;
}

fs::path cmd_preview_augment(const PipelineConfig& config, const fs::path& image, std::ostream& log) {
  prepare_output(config);
  const Image img = augment::crop_square_resize(read_image(image), static_cast<int>(config.model.input_size));
  const auto pipeline = config.augmenter();
  std::vector<Image> tiles;
  tiles.reserve(64);
  for (std::uint64_t i = 0; i < 64; ++i) tiles.push_back(augment::apply_pipeline(pipeline, img, i));
  const fs::path out = config.output_dir / (image.stem().string() + ".augment-preview.png");
  write_png(out, augment::make_grid(tiles, 8));
  log << "wrote " << out.string() << "\n";
  return out;
}

std::size_t cmd_synth(const PipelineConfig& config, const fs::path& out_dir, std::ostream& log) {
  config.validate();
  const std::size_t n = generate_synth(config, out_dir);
  log << "wrote " << n << " images under " << out_dir.string() << "\n";
  return n;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"histocam: histopathology classification and attention maps"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Overrides the config seed");
  app.add_option("--out", out_dir, "Output directory (overrides output_dir)");

  auto* split = app.add_subcommand("split", "Draw the train/validation/test split");
  auto* train = app.add_subcommand("train", "Train and write weights.hscw and history.csv");
  std::optional<int> epochs;
  train->add_option("--epochs", epochs, "Overrides train.epochs");
  auto* eval = app.add_subcommand("eval", "Evaluate the test partition");
  auto* explain_cmd = app.add_subcommand("explain", "GradCAM / saliency / SmoothGrad overlays");
  auto* preview = app.add_subcommand("preview-augment", "8x8 grid of augmented copies of an image");
  auto* synth = app.add_subcommand("synth", "Write the synthetic texture dataset to --out");
  std::optional<std::size_t> per_class, size;
  synth->add_option("--per-class", per_class, "Images per class");
  synth->add_option("--size", size, "Image side in pixels");

  std::string weights;
  for (auto* sub : {eval, explain_cmd}) sub->add_option("--weights", weights, "Weight file (default <out>/weights.hscw)");
  std::vector<std::string> images;
  explain_cmd->add_option("images", images, "Images to explain")->required();
  std::string preview_image;
  preview->add_option("image", preview_image, "Image to augment")->required();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kOk : kUsage;
  }

  try {
    PipelineConfig config = config_path.empty() ? parse_config("{}") : load_config(config_path);
    if (seed) {
      config.seed = *seed;
      config.train.seed = *seed;
    }
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (epochs) config.train.epochs = *epochs;
    if (per_class) config.dataset.per_class = *per_class;
    if (size) config.dataset.size = *size;
    const fs::path weight_path = weights.empty() ? config.output_dir / "weights.hscw" : fs::path(weights);

    if (*split) {
      cmd_split(config, out);
    } else if (*train) {
      cmd_train(config, out);
    } else if (*eval) {
      cmd_eval(config, weight_path, out);
    } else if (*explain_cmd) {
      cmd_explain(config, weight_path, {images.begin(), images.end()}, out);
    } else if (*preview) {
      cmd_preview_augment(config, preview_image, out);
    } else if (*synth) {
      cmd_synth(config, config.output_dir, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kOk;
}

}  // namespace histocam::cli
