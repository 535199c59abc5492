#include "histocam/cli/config.hpp"

#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <sstream>

#include "histocam/errors.hpp"

namespace histocam::cli {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

std::string averaging_name(metrics::Averaging a) { return a == metrics::Averaging::macro ? "macro" : "positive_class"; }

}  // namespace

network::ModelConfig PipelineConfig::model_config() const {
  network::ModelConfig mc =
      network::ModelConfig::tiny_vgg({model.input_size, model.input_size, 3}, seed, model.widths);
  mc.name = model.name;
  mc.frozen_layers = {model.frozen_layers.begin(), model.frozen_layers.end()};
  mc.dropout_rate = model.dropout;
  return mc;
}

augment::Pipeline PipelineConfig::augmenter() const { return augment::Pipeline{augment_steps, seed}; }

std::filesystem::path PipelineConfig::dataset_root() const {
  if (!dataset.synth) return dataset.root;
  return dataset.synth_dir.empty() ? output_dir / "synth" : dataset.synth_dir;
}

void PipelineConfig::validate() const {
  if (dataset.synth == !dataset.root.empty()) {
    throw ConfigError("dataset needs exactly one of 'root' or 'synth'");
  }
  if (model.input_size == 0) throw ConfigError("model.input_size must be positive");
  if (model.widths.empty()) throw ConfigError("model.widths must list at least one block");
  if (!(model.dropout >= 0.0 && model.dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
  if (explain.samples == 0) throw ConfigError("explain.samples must be at least 1");
  if (!(explain.sigma >= 0.0)) throw ConfigError("explain.sigma must be >= 0");
  if (!(explain.alpha >= 0.0 && explain.alpha <= 1.0)) throw ConfigError("explain.alpha must lie in [0, 1]");
  if (explain.class_index && *explain.class_index != 0 && *explain.class_index != 1) {
    throw ConfigError("explain.class must be 0 or 1");
  }
  for (const auto& m : explain.methods) {
    if (m != "gradcam" && m != "saliency" && m != "smoothgrad") {
      throw ConfigError("unknown explain method '" + m + "' (expected gradcam, saliency or smoothgrad)");
    }
  }
  try {
    train.validate();
    augmenter().validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
}

PipelineConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"seed", "output_dir", "task", "dataset", "model", "train", "augment", "eval", "explain"}, "config");

  PipelineConfig c;
  read(j, "seed", c.seed, "config");
  std::string text;
  if (j.contains("output_dir")) {
    read(j, "output_dir", text, "config");
    c.output_dir = text;
  }
  if (j.contains("task")) {
    read(j, "task", text, "config");
    c.task = datakit::parse_task(text);
  }

  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    check_keys(d, {"root", "synth"}, "dataset");
    if (d.contains("root")) {
      read(d, "root", text, "dataset");
      c.dataset.root = text;
    }
    if (d.contains("synth")) {
      const json& s = d["synth"];
      check_keys(s, {"dir", "per_class", "size"}, "dataset.synth");
      c.dataset.synth = true;
      if (s.contains("dir")) {
        read(s, "dir", text, "dataset.synth");
        c.dataset.synth_dir = text;
      }
      read(s, "per_class", c.dataset.per_class, "dataset.synth");
      read(s, "size", c.dataset.size, "dataset.synth");
    }
  } else {
    c.dataset.synth = true;
  }

  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, {"name", "input_size", "widths", "frozen_layers", "dropout"}, "model");
    read(m, "name", c.model.name, "model");
    read(m, "input_size", c.model.input_size, "model");
    read(m, "widths", c.model.widths, "model");
    read(m, "frozen_layers", c.model.frozen_layers, "model");
    read(m, "dropout", c.model.dropout, "model");
  }

  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, {"learning_rate", "epochs", "batch_size", "beta1", "beta2", "epsilon", "shuffle", "online_augmentation"},
               "train");
    read(t, "learning_rate", c.train.learning_rate, "train");
    read(t, "epochs", c.train.epochs, "train");
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "beta1", c.train.beta1, "train");
    read(t, "beta2", c.train.beta2, "train");
    read(t, "epsilon", c.train.epsilon, "train");
    read(t, "shuffle", c.train.shuffle, "train");
    read(t, "online_augmentation", c.train.online_augmentation, "train");
  }

  if (j.contains("augment")) {
    const json& a = j["augment"];
    check_keys(a, {"steps"}, "augment");
    if (a.contains("steps")) {
      if (!a["steps"].is_array()) throw ConfigError("augment.steps must be an array");
      c.augment_steps.clear();
      for (const auto& s : a["steps"]) {
        check_keys(s, {"kind", "magnitude", "probability"}, "augment.steps[]");
        if (!s.contains("kind")) throw ConfigError("augment step lacks 'kind'");
        augment::Step step;
        read(s, "kind", text, "augment.steps[]");
        try {
          step.kind = augment::parse_step_kind(text);
        } catch (const Error& e) {
          throw ConfigError(e.what());
        }
        read(s, "magnitude", step.magnitude, "augment.steps[]");
        read(s, "probability", step.probability, "augment.steps[]");
        c.augment_steps.push_back(step);
      }
    }
  }

  if (j.contains("eval")) {
    const json& e = j["eval"];
    check_keys(e, {"averaging"}, "eval");
    if (e.contains("averaging")) {
      read(e, "averaging", text, "eval");
      if (text == "macro") {
        c.averaging = metrics::Averaging::macro;
      } else if (text == "positive_class") {
        c.averaging = metrics::Averaging::positive_class;
      } else {
        throw ConfigError("eval.averaging must be 'positive_class' or 'macro'");
      }
    }
  }

  if (j.contains("explain")) {
    const json& x = j["explain"];
    check_keys(x, {"layer", "methods", "samples", "sigma", "alpha", "class"}, "explain");
    read(x, "layer", c.explain.layer, "explain");
    read(x, "methods", c.explain.methods, "explain");
    read(x, "samples", c.explain.samples, "explain");
    read(x, "sigma", c.explain.sigma, "explain");
    read(x, "alpha", c.explain.alpha, "explain");
    if (x.contains("class") && !x["class"].is_null()) {
      int cls = 0;
      read(x, "class", cls, "explain");
      c.explain.class_index = cls;
    }
  }

  c.train.seed = c.seed;
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const PipelineConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.generic_string();
  j["task"] = std::string(datakit::task_name(c.task));
  if (c.dataset.synth) {
    j["dataset"]["synth"] = {{"dir", c.dataset_root().generic_string()},
                             {"per_class", c.dataset.per_class},
                             {"size", c.dataset.size}};
  } else {
    j["dataset"]["root"] = c.dataset.root.generic_string();
  }
  j["model"] = {{"name", c.model.name},
                {"input_size", c.model.input_size},
                {"widths", c.model.widths},
                {"frozen_layers", c.model.frozen_layers},
                {"dropout", c.model.dropout}};
  j["train"] = {{"learning_rate", c.train.learning_rate}, {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},       {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},                 {"epsilon", c.train.epsilon},
                {"shuffle", c.train.shuffle},             {"online_augmentation", c.train.online_augmentation}};
  ordered_json steps = ordered_json::array();
  for (const auto& s : c.augment_steps) {
    steps.push_back({{"kind", std::string(augment::step_name(s.kind))},
                     {"magnitude", s.magnitude},
                     {"probability", s.probability}});
  }
  j["augment"]["steps"] = steps;
  j["eval"]["averaging"] = averaging_name(c.averaging);
  j["explain"] = {{"layer", c.explain.layer},
                  {"methods", c.explain.methods},
                  {"samples", c.explain.samples},
                  {"sigma", c.explain.sigma},
                  {"alpha", c.explain.alpha}};
  j["explain"]["class"] = c.explain.class_index ? ordered_json(*c.explain.class_index) : ordered_json(nullptr);
  return j.dump(2) + "\n";
}

}  // namespace histocam::cli
