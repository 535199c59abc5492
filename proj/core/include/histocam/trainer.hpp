#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "histocam/augment.hpp"
#include "histocam/datakit.hpp"
#include "histocam/network.hpp"
#include "histocam/tensor.hpp"

namespace histocam::trainer {

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 10;
  int batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle = true;
  /// Re-draw augmentation every epoch (true) or once before training (false).
  bool online_augmentation = true;

  void validate() const;
};

struct HistoryRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

inline constexpr double kProbabilityClamp = 1e-7;

/// Mean binary cross-entropy with p clamped to [1e-7, 1 - 1e-7].
ag::Tensor bce_loss(ag::Tape& tape, const ag::Tensor& probabilities, std::span<const int> labels);

/// Plain per-example BCE value (same clamp), for reporting.
double bce_value(double probability, int label);

/// Adam with bias correction. One moment pair per parameter, keyed by
/// position in the list passed to step().
class Adam {
 public:
  explicit Adam(const TrainConfig& config);

  /// Updates every parameter that requires a gradient. Throws NumericError
  /// naming the parameter when a gradient is not finite.
  void step(std::vector<network::Parameter>& params);

  long steps_taken() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct EpochPredictions {
  int epoch = 0;
  std::vector<double> val_probabilities;
  std::vector<int> val_labels;
};

using EpochObserver = std::function<void(const EpochPredictions&)>;

/// Runs config.epochs epochs of mini-batch Adam on split.train, evaluating
/// split.validation in eval mode after each. Augmentation applies to training
/// images only. Leaves the model at its final-epoch weights.
std::vector<HistoryRecord> train(network::Model& model, const datakit::DatasetSplit& split,
                                 const augment::Pipeline* augmenter, const TrainConfig& config,
                                 const EpochObserver& observer = {});

/// Eval-mode probabilities for a list of examples, computed in batches.
std::vector<double> predict(const network::Model& model, const std::vector<datakit::LabeledExample>& examples,
                            std::size_t batch_size = 64);
std::vector<double> predict(const network::Model& model, const std::vector<Image>& images, std::size_t batch_size = 64);

std::string history_to_csv(const std::vector<HistoryRecord>& history);

}  // namespace histocam::trainer
