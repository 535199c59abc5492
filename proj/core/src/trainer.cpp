#include "histocam/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "histocam/errors.hpp"

namespace histocam::trainer {

using ag::Tensor;

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be finite and >= 0");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

namespace {

double clamp_probability(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

void check_label(int y) {
  if (y != 0 && y != 1) throw DataError("label " + std::to_string(y) + " is not in {0, 1}");
}

}  // namespace

double bce_value(double probability, int label) {
  check_label(label);
  const double p = clamp_probability(probability);
  return -(label * std::log(p) + (1 - label) * std::log(1.0 - p));
}

Tensor bce_loss(ag::Tape& tape, const Tensor& probabilities, std::span<const int> labels) {
  if (probabilities.numel() != labels.size()) {
    throw DimensionError("bce_loss: " + std::to_string(probabilities.numel()) + " probabilities for " +
                         std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw DataError("bce_loss: empty batch");
  for (int y : labels) check_label(y);

  const auto p = probabilities.values();
  const double n = static_cast<double>(labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) total += bce_value(p[i], labels[i]);

  const std::array<Tensor, 1> inputs{probabilities};
  auto pn = probabilities.node();
  std::vector<int> y(labels.begin(), labels.end());
  return tape.record(inputs, {1}, {total / n}, [pn, y = std::move(y), n](std::span<const double> gout) {
    std::vector<double> dp(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double pc = clamp_probability(pn->value[i]);
      dp[i] = gout[0] * (-(y[i] / pc) + (1 - y[i]) / (1.0 - pc)) / n;
    }
    pn->accumulate(dp);
  });
}

Adam::Adam(const TrainConfig& config)
    : lr_(config.learning_rate), beta1_(config.beta1), beta2_(config.beta2), epsilon_(config.epsilon) {}

void Adam::step(std::vector<network::Parameter>& params) {
  if (m_.size() != params.size()) {
    m_.assign(params.size(), {});
    v_.assign(params.size(), {});
  }
  ++t_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& param = params[k].value;
    if (!param.requires_grad()) continue;  // frozen
    const std::size_t n = param.numel();
    if (m_[k].size() != n) {
      m_[k].assign(n, 0.0);
      v_[k].assign(n, 0.0);
    }
    std::span<const double> g;
    std::vector<double> zeros;
    if (param.has_grad()) {
      g = param.grad();
    } else {
      zeros.assign(n, 0.0);
      g = zeros;
    }
    for (double gi : g) {
      if (!std::isfinite(gi)) throw NumericError("non-finite gradient in parameter '" + params[k].id + "'");
    }
    auto theta = param.mutable_values();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

namespace {

std::vector<Image> load_all(const std::vector<datakit::LabeledExample>& examples, const network::InputSize& size) {
  std::vector<Image> images;
  images.reserve(examples.size());
  for (const auto& e : examples) images.push_back(datakit::load_image(e, size));
  return images;
}

}  // namespace

std::vector<double> predict(const network::Model& model, const std::vector<Image>& images, std::size_t batch_size) {
  std::vector<double> probs;
  probs.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += batch_size) {
    const std::size_t stop = std::min(images.size(), start + batch_size);
    const std::vector<Image> chunk(images.begin() + static_cast<std::ptrdiff_t>(start),
                                   images.begin() + static_cast<std::ptrdiff_t>(stop));
    const auto p = network::forward_probabilities(model, datakit::images_to_tensor(chunk));
    probs.insert(probs.end(), p.values().begin(), p.values().end());
  }
  return probs;
}

std::vector<double> predict(const network::Model& model, const std::vector<datakit::LabeledExample>& examples,
                            std::size_t batch_size) {
  return predict(model, load_all(examples, model.config().input), batch_size);
}

std::vector<HistoryRecord> train(network::Model& model, const datakit::DatasetSplit& split,
                                 const augment::Pipeline* augmenter, const TrainConfig& config,
                                 const EpochObserver& observer) {
  config.validate();
  if (split.train.empty()) throw DataError("training partition is empty");
  if (split.validation.empty()) throw DataError("validation partition is empty");
  if (augmenter) augmenter->validate();

  const auto& input = model.config().input;
  const std::vector<Image> base = load_all(split.train, input);
  const std::vector<Image> val_images = load_all(split.validation, input);
  std::vector<int> train_labels, val_labels;
  for (const auto& e : split.train) train_labels.push_back(e.label);
  for (const auto& e : split.validation) val_labels.push_back(e.label);

  std::vector<Image> offline;
  if (augmenter && !config.online_augmentation) {
    for (std::size_t i = 0; i < base.size(); ++i) offline.push_back(augment::apply_pipeline(*augmenter, base[i], i));
  }

  std::seed_seq shuffle_seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32), 1u};
  std::seed_seq dropout_seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32), 2u};
  std::mt19937_64 shuffle_rng(shuffle_seq);
  std::mt19937_64 dropout_rng(dropout_seq);

  Adam adam(config);
  auto& params = model.parameters();
  const std::size_t n_train = base.size();
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  std::vector<HistoryRecord> history;
  std::vector<std::size_t> order(n_train);
  std::vector<double> example_loss(n_train);
  std::vector<int> example_correct(n_train);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (config.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);

    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n_train; start += batch_size, ++batch_index) {
      const std::size_t stop = std::min(n_train, start + batch_size);
      std::vector<Image> images;
      std::vector<int> labels;
      for (std::size_t j = start; j < stop; ++j) {
        const std::size_t idx = order[j];
        if (!augmenter) {
          images.push_back(base[idx]);
        } else if (config.online_augmentation) {
          images.push_back(augment::apply_pipeline(*augmenter, base[idx],
                                                   static_cast<std::uint64_t>(epoch - 1) * n_train + idx));
        } else {
          images.push_back(offline[idx]);
        }
        labels.push_back(train_labels[idx]);
      }

      try {
        ag::Tape tape;
        const auto pass = model.forward(tape, datakit::images_to_tensor(images), network::Mode::train, &dropout_rng);
        const Tensor loss = bce_loss(tape, pass.probabilities, labels);
        const auto probs = pass.probabilities.values();
        for (std::size_t j = start; j < stop; ++j) {
          const double p = probs[j - start];
          example_loss[order[j]] = bce_value(p, labels[j - start]);
          example_correct[order[j]] = (p >= 0.5 ? 1 : 0) == labels[j - start];
        }
        if (loss.requires_grad()) {
          tape.backward(loss);
          adam.step(params);
        }
        for (auto& p : params) p.value.zero_grad();
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index) + ": " + e.what());
      }
    }

    HistoryRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n_train; ++i) {
      loss_sum += example_loss[i];
      correct += static_cast<std::size_t>(example_correct[i]);
    }
    rec.train_loss = loss_sum / static_cast<double>(n_train);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(n_train);

    const auto val_probs = predict(model, val_images, batch_size);
    loss_sum = 0.0;
    correct = 0;
    for (std::size_t i = 0; i < val_probs.size(); ++i) {
      loss_sum += bce_value(val_probs[i], val_labels[i]);
      correct += static_cast<std::size_t>((val_probs[i] >= 0.5 ? 1 : 0) == val_labels[i]);
    }
    rec.val_loss = loss_sum / static_cast<double>(val_probs.size());
    rec.val_acc = static_cast<double>(correct) / static_cast<double>(val_probs.size());
    history.push_back(rec);

    if (observer) observer(EpochPredictions{epoch, val_probs, val_labels});
  }
  return history;
}

std::string history_to_csv(const std::vector<HistoryRecord>& history) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char line[160];
  for (const auto& r : history) {
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss, r.train_acc, r.val_loss,
                  r.val_acc);
    out += line;
  }
  return out;
}

}  // namespace histocam::trainer
