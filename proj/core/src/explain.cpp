#include "histocam/explain.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "histocam/errors.hpp"
#include "histocam/ops.hpp"

namespace histocam::explain {

using ag::Tensor;

std::string kind_name(HeatmapKind kind) {
  switch (kind) {
    case HeatmapKind::gradcam: return "gradcam";
    case HeatmapKind::vanilla_saliency: return "saliency";
    case HeatmapKind::smoothgrad: return "smoothgrad";
  }
  return "unknown";
}

double class_score(double logit, int class_index) {
  if (class_index != 0 && class_index != 1) {
    throw ParameterError("class index " + std::to_string(class_index) + " is not 0 or 1");
  }
  return class_index == 1 ? logit : -logit;
}

int classify_logit(double logit) { return class_score(logit, 1) >= class_score(logit, 0) ? 1 : 0; }

namespace {

void check_single_image(const Tensor& image) {
  if (image.rank() != 4 || image.dim(0) != 1) {
    throw DimensionError("explanations take a single [1,C,H,W] image, got " + ag::shape_to_string(image.shape()));
  }
}

struct ScoredPass {
  network::ForwardPass pass;
  Tensor score;
};

// Forward on a fresh leaf copy of `image` with gradient tracking, then the
// selected class score as a one-element tensor.
ScoredPass scored_forward(ag::Tape& tape, const network::Classifier& model, const Tensor& input, int class_index) {
  class_score(0.0, class_index);  // validates the index
  ScoredPass out{model.forward(tape, input, network::Mode::eval, nullptr), {}};
  if (out.pass.logits.numel() != 1) {
    throw DimensionError("classifier must produce one logit per image, got " +
                         ag::shape_to_string(out.pass.logits.shape()));
  }
  out.score = class_index == 1 ? out.pass.logits : ag::ops::scale(tape, out.pass.logits, -1.0);
  return out;
}

Tensor tracked_copy(const Tensor& image) {
  Tensor x = image.detached();
  x.set_requires_grad(true);
  return x;
}

Heatmap reduce_channels(const std::vector<double>& gradient, const ag::Shape& shape) {
  const std::size_t c = shape[1], h = shape[2], w = shape[3];
  Heatmap map;
  map.width = w;
  map.height = h;
  map.values.assign(h * w, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h * w; ++i) map.values[i] = std::max(map.values[i], std::abs(gradient[ch * h * w + i]));
  return map;
}

}  // namespace

int classify(const network::Classifier& model, const Tensor& image) {
  check_single_image(image);
  ag::Tape tape;
  tape.set_recording(false);
  return classify_logit(model.forward(tape, image, network::Mode::eval, nullptr).logits.item());
}

Heatmap gradcam(const network::Classifier& model, const Tensor& image, int class_index, const std::string& layer_id) {
  check_single_image(image);
  const std::string layer = layer_id.empty() ? model.feature_layer() : layer_id;

  ag::Tape tape;
  const Tensor x = tracked_copy(image);
  const auto scored = scored_forward(tape, model, x, class_index);
  const Tensor& activation = scored.pass.activation(layer);
  if (activation.rank() != 4) {
    throw ContractError("layer '" + layer + "' has no spatial extent (shape " +
                        ag::shape_to_string(activation.shape()) + ")");
  }
  tape.backward(scored.score);

  const std::size_t k_count = activation.dim(1), v = activation.dim(2), u = activation.dim(3);
  const std::size_t area = u * v;
  const auto a = activation.values();
  std::vector<double> grad(activation.numel(), 0.0);
  if (activation.has_grad()) {
    const auto g = activation.grad();
    std::copy(g.begin(), g.end(), grad.begin());
  }

  Heatmap map;
  map.kind = HeatmapKind::gradcam;
  map.width = u;
  map.height = v;
  map.class_index = class_index;
  map.score = scored.score.item();
  map.layer_id = layer;
  map.values.assign(area, 0.0);
  for (std::size_t k = 0; k < k_count; ++k) {
    double alpha = 0.0;
    for (std::size_t i = 0; i < area; ++i) alpha += grad[k * area + i];
    alpha /= static_cast<double>(area);
    for (std::size_t i = 0; i < area; ++i) map.values[i] += alpha * a[k * area + i];
  }
  for (auto& value : map.values) value = std::max(value, 0.0);
  return map;
}

Tensor input_gradient(const network::Classifier& model, const Tensor& image, int class_index) {
  check_single_image(image);
  ag::Tape tape;
  const Tensor x = tracked_copy(image);
  const auto scored = scored_forward(tape, model, x, class_index);
  tape.backward(scored.score);
  if (!x.has_grad()) return Tensor::zeros(x.shape());
  return ag::grad_of(x);
}

Heatmap vanilla_saliency(const network::Classifier& model, const Tensor& image, int class_index) {
  const Tensor g = input_gradient(model, image, class_index);
  Heatmap map = reduce_channels({g.values().begin(), g.values().end()}, g.shape());
  map.kind = HeatmapKind::vanilla_saliency;
  map.class_index = class_index;
  map.samples = 1;
  {
    ag::Tape tape;
    tape.set_recording(false);
    map.score = class_score(model.forward(tape, image, network::Mode::eval, nullptr).logits.item(), class_index);
  }
  return map;
}

Tensor smoothgrad_mean_gradient(const network::Classifier& model, const Tensor& image, int class_index,
                                std::size_t samples, double sigma, std::uint64_t seed) {
  if (samples == 0) throw ParameterError("smoothgrad needs at least one sample");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ParameterError("smoothgrad sigma must be finite and >= 0");
  check_single_image(image);

  std::mt19937_64 rng(seed);
  std::vector<double> mean(image.numel(), 0.0);
  for (std::size_t i = 0; i < samples; ++i) {
    Tensor noisy = image;
    if (sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, sigma);
      std::vector<double> values(image.values().begin(), image.values().end());
      for (auto& v : values) v += noise(rng);
      noisy = Tensor(image.shape(), std::move(values));
    }
    const Tensor g = input_gradient(model, noisy, class_index);
    // Running mean in sample order: exact for constant gradients.
    const double inv = 1.0 / static_cast<double>(i + 1);
    const auto gv = g.values();
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += (gv[j] - mean[j]) * inv;
  }
  return Tensor(image.shape(), std::move(mean));
}

Heatmap smoothgrad(const network::Classifier& model, const Tensor& image, int class_index, std::size_t samples,
                   double sigma, std::uint64_t seed) {
  const Tensor mean = smoothgrad_mean_gradient(model, image, class_index, samples, sigma, seed);
  Heatmap map = reduce_channels({mean.values().begin(), mean.values().end()}, mean.shape());
  map.kind = HeatmapKind::smoothgrad;
  map.class_index = class_index;
  map.samples = samples;
  map.sigma = sigma;
  map.seed = seed;
  {
    ag::Tape tape;
    tape.set_recording(false);
    map.score = class_score(model.forward(tape, image, network::Mode::eval, nullptr).logits.item(), class_index);
  }
  return map;
}

std::vector<double> normalize(const std::vector<double>& values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo, range = *hi - *lo;
  std::vector<double> out(values.size(), 0.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - min) / range;
  }
  return out;
}

Rgb8 colormap(double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto byte = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); };
  if (t <= 0.5) return {0, byte(510.0 * t), byte(255.0 * (1.0 - 2.0 * t))};
  return {byte(255.0 * (2.0 * t - 1.0)), byte(255.0 * (2.0 - 2.0 * t)), 0};
}

Image render_overlay(const Heatmap& heatmap, const Image& image, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("overlay alpha must lie in [0, 1]");
  if (heatmap.width == 0 || heatmap.height == 0 || heatmap.values.size() != heatmap.width * heatmap.height) {
    throw ParameterError("render_overlay: malformed heatmap");
  }
  const auto norm = normalize(heatmap.values);
  const double u = static_cast<double>(heatmap.width), v = static_cast<double>(heatmap.height);
  Image out(image.width, image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    const double sy = std::clamp((static_cast<double>(y) + 0.5) * v / static_cast<double>(image.height) - 0.5, 0.0, v - 1);
    const auto y0 = static_cast<std::size_t>(sy);
    const std::size_t y1 = std::min(y0 + 1, heatmap.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < image.width; ++x) {
      const double sx = std::clamp((static_cast<double>(x) + 0.5) * u / static_cast<double>(image.width) - 0.5, 0.0, u - 1);
      const auto x0 = static_cast<std::size_t>(sx);
      const std::size_t x1 = std::min(x0 + 1, heatmap.width - 1);
      const double fx = sx - static_cast<double>(x0);
      const auto at = [&](std::size_t xx, std::size_t yy) { return norm[yy * heatmap.width + xx]; };
      const double t = (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x1, y0)) + fy * ((1 - fx) * at(x0, y1) + fx * at(x1, y1));
      const Rgb8 c = colormap(t);
      const std::uint8_t rgb[3] = {c.r, c.g, c.b};
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double blended = (1.0 - alpha) * image.at(x, y, ch) + alpha * rgb[ch];
        out.at(x, y, ch) = static_cast<std::uint8_t>(std::lround(std::clamp(blended, 0.0, 255.0)));
      }
    }
  }
  return out;
}

}  // namespace histocam::explain
