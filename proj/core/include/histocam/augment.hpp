#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "histocam/image.hpp"

namespace histocam::augment {

enum class FlipAxis { horizontal, vertical };

/// Centre square crop to min(w, h), then area-average resample to
/// target x target. Identity when the input is already target x target.
Image crop_square_resize(const Image& img, int target);

/// Rotation about the image centre by `angle_degrees` (counter-clockwise),
/// bilinear sampling, reflect-101 fill outside the source. Same output size.
Image rotate(const Image& img, double angle_degrees);

Image flip(const Image& img, FlipAxis axis);

/// Multiplies every channel by `factor` with rounding and clamping to [0,255].
Image adjust_brightness(const Image& img, double factor);

/// Shifts content by (dx, dy) pixels with reflect-101 fill.
Image translate(const Image& img, double dx, double dy);

/// Square crop of side `side` at (x0, y0), resampled back to the input size.
Image crop_resize_region(const Image& img, std::size_t x0, std::size_t y0, std::size_t side);

struct Step {
  enum class Kind { rotate, flip_horizontal, flip_vertical, brightness, translate, random_crop };

  Kind kind = Kind::rotate;
  /// rotate: max |angle| in degrees; brightness: max relative change;
  /// translate: max shift as a fraction of the size; random_crop: minimum
  /// side as a fraction of the size. Unused by flips.
  double magnitude = 0.0;
  double probability = 1.0;
};

std::string_view step_name(Step::Kind kind);
Step::Kind parse_step_kind(std::string_view name);

/// Ordered sequence of probabilistic steps. Parameters of an application are
/// fully determined by (seed, draw_index).
struct Pipeline {
  std::vector<Step> steps;
  std::uint64_t seed = 0;

  /// Rotation up to 25 degrees always, horizontal and vertical flips with
  /// probability 0.5 each.
  static Pipeline lc25000_baseline(std::uint64_t seed);

  void validate() const;
};

/// Which steps fired for one application and with what drawn parameter.
struct Trace {
  std::vector<bool> fired;
  std::vector<double> parameter;
};

Image apply_pipeline(const Pipeline& pipeline, const Image& img, std::uint64_t draw_index, Trace* trace = nullptr);

/// Tiles equally sized images row by row into a cols-wide grid.
Image make_grid(const std::vector<Image>& tiles, std::size_t cols);

}  // namespace histocam::augment
