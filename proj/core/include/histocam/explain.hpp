#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "histocam/image.hpp"
#include "histocam/network.hpp"
#include "histocam/tensor.hpp"

namespace histocam::explain {

enum class HeatmapKind { gradcam, vanilla_saliency, smoothgrad };

std::string kind_name(HeatmapKind kind);

struct Heatmap {
  HeatmapKind kind = HeatmapKind::gradcam;
  std::size_t width = 0;   // u
  std::size_t height = 0;  // v
  std::vector<double> values;  // row-major, height x width
  int class_index = 1;
  double score = 0.0;  // S_c at the unperturbed input
  std::string layer_id;
  std::size_t samples = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
};

/// Class scores of a single-logit binary classifier: S_1 = z, S_0 = -z.
double class_score(double logit, int class_index);

/// argmax over {S_0, S_1}; ties resolve to class 1, so logit 0 maps to 1 as
/// probability 0.5 does under the >= 0.5 threshold.
int classify_logit(double logit);
int classify(const network::Classifier& model, const ag::Tensor& image);

/// Gradient-weighted class activation map of `layer_id` (the classifier's
/// feature layer when empty). `image` is a single [1,C,H,W] sample.
Heatmap gradcam(const network::Classifier& model, const ag::Tensor& image, int class_index,
                const std::string& layer_id = {});

/// Signed gradient dS_c/dx, shape [1,C,H,W].
ag::Tensor input_gradient(const network::Classifier& model, const ag::Tensor& image, int class_index);

/// |dS_c/dx| reduced over channels by max.
Heatmap vanilla_saliency(const network::Classifier& model, const ag::Tensor& image, int class_index);

/// Mean of signed input gradients over `samples` Gaussian-perturbed copies of
/// the image (standard deviation `sigma`), then channel max of |.|.
/// sigma == 0 adds no noise.
Heatmap smoothgrad(const network::Classifier& model, const ag::Tensor& image, int class_index, std::size_t samples,
                   double sigma, std::uint64_t seed);

/// Signed per-pixel mean gradient before channel reduction; exposed for
/// checks on the averaging itself.
ag::Tensor smoothgrad_mean_gradient(const network::Classifier& model, const ag::Tensor& image, int class_index,
                                    std::size_t samples, double sigma, std::uint64_t seed);

/// Min-max normalisation to [0,1]; an all-equal map becomes all zeros.
std::vector<double> normalize(const std::vector<double>& values);

struct Rgb8 {
  std::uint8_t r, g, b;
};

/// Blue -> green -> red ramp over t in [0,1].
Rgb8 colormap(double t);

/// Normalises, bilinearly upsamples to the image size, colours and
/// alpha-blends the map over `image`.
Image render_overlay(const Heatmap& heatmap, const Image& image, double alpha);

}  // namespace histocam::explain
