#include "histocam/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "histocam/errors.hpp"
#include "histocam/ops.hpp"

namespace histocam::augment {
namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Reflect-101 indexing: ... 2 1 | 0 1 2 ... n-1 | n-2 ...
std::ptrdiff_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

struct Tap {
  std::size_t index;
  double weight;
};

// Box-filter taps mapping `src` samples onto `dst` samples: each output
// covers [o*src/dst, (o+1)*src/dst) of the input axis.
std::vector<std::vector<Tap>> area_taps(std::size_t src, std::size_t dst) {
  std::vector<std::vector<Tap>> taps(dst);
  const double ratio = static_cast<double>(src) / static_cast<double>(dst);
  for (std::size_t o = 0; o < dst; ++o) {
    const double lo = static_cast<double>(o) * ratio;
    const double hi = static_cast<double>(o + 1) * ratio;
    const auto first = static_cast<std::size_t>(std::floor(lo));
    const auto last = std::min(src, static_cast<std::size_t>(std::ceil(hi)));
    for (std::size_t i = first; i < last; ++i) {
      const double overlap = std::min(hi, static_cast<double>(i + 1)) - std::max(lo, static_cast<double>(i));
      if (overlap > 0.0) taps[o].push_back({i, overlap / ratio});
    }
  }
  return taps;
}

// Area-average resample of the region [x0, x0+w) x [y0, y0+h) to out_w x out_h.
Image resample_area(const Image& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h, std::size_t out_w,
                    std::size_t out_h) {
  const auto xt = area_taps(w, out_w);
  const auto yt = area_taps(h, out_h);
  std::vector<double> rows(h * out_w * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t ox = 0; ox < out_w; ++ox)
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (const auto& t : xt[ox]) acc += t.weight * img.at(x0 + t.index, y0 + y, c);
        rows[(y * out_w + ox) * 3 + c] = acc;
      }
  Image out(out_w, out_h);
  for (std::size_t oy = 0; oy < out_h; ++oy)
    for (std::size_t ox = 0; ox < out_w; ++ox)
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (const auto& t : yt[oy]) acc += t.weight * rows[(t.index * out_w + ox) * 3 + c];
        out.at(ox, oy, c) = to_byte(acc);
      }
  return out;
}

// Bilinear sample at (sx, sy) with reflect-101 borders.
void sample_bilinear(const Image& img, double sx, double sy, std::uint8_t* rgb) {
  const auto w = static_cast<std::ptrdiff_t>(img.width);
  const auto h = static_cast<std::ptrdiff_t>(img.height);
  const double fx0 = std::floor(sx), fy0 = std::floor(sy);
  const double fx = sx - fx0, fy = sy - fy0;
  const auto x0 = static_cast<std::ptrdiff_t>(fx0), y0 = static_cast<std::ptrdiff_t>(fy0);
  const auto xa = static_cast<std::size_t>(reflect(x0, w)), xb = static_cast<std::size_t>(reflect(x0 + 1, w));
  const auto ya = static_cast<std::size_t>(reflect(y0, h)), yb = static_cast<std::size_t>(reflect(y0 + 1, h));
  for (std::size_t c = 0; c < 3; ++c) {
    const double top = (1.0 - fx) * img.at(xa, ya, c) + fx * img.at(xb, ya, c);
    const double bottom = (1.0 - fx) * img.at(xa, yb, c) + fx * img.at(xb, yb, c);
    rgb[c] = to_byte((1.0 - fy) * top + fy * bottom);
  }
}

template <typename SourceOf>
Image remap(const Image& img, SourceOf source_of) {
  Image out(img.width, img.height);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const auto [sx, sy] = source_of(static_cast<double>(x), static_cast<double>(y));
      sample_bilinear(img, sx, sy, &out.pixels[(y * img.width + x) * 3]);
    }
  return out;
}

void require_valid(const Image& img, const char* op) {
  if (img.width == 0 || img.height == 0 || img.pixels.size() != img.width * img.height * 3) {
    throw ParameterError(std::string(op) + ": malformed image");
  }
}

}  // namespace

Image crop_square_resize(const Image& img, int target) {
  if (target <= 0) throw ParameterError("crop_square_resize: target must be positive, got " + std::to_string(target));
  require_valid(img, "crop_square_resize");
  const std::size_t side = std::min(img.width, img.height);
  const std::size_t x0 = (img.width - side) / 2;
  const std::size_t y0 = (img.height - side) / 2;
  const auto t = static_cast<std::size_t>(target);
  return resample_area(img, x0, y0, side, side, t, t);
}

Image rotate(const Image& img, double angle_degrees) {
  require_valid(img, "rotate");
  if (!(angle_degrees >= -180.0 && angle_degrees <= 180.0)) {
    throw ParameterError("rotate: angle must lie in [-180, 180], got " + std::to_string(angle_degrees));
  }
  const double theta = angle_degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  // Inverse map of a counter-clockwise rotation in a y-down frame.
  return remap(img, [=](double x, double y) {
    const double dx = x - cx, dy = y - cy;
    return std::pair{cx + c * dx - s * dy, cy + s * dx + c * dy};
  });
}

Image flip(const Image& img, FlipAxis axis) {
  require_valid(img, "flip");
  Image out(img.width, img.height);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::size_t sx = axis == FlipAxis::horizontal ? img.width - 1 - x : x;
      const std::size_t sy = axis == FlipAxis::vertical ? img.height - 1 - y : y;
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  return out;
}

Image adjust_brightness(const Image& img, double factor) {
  require_valid(img, "adjust_brightness");
  if (!(factor >= 0.0)) throw ParameterError("adjust_brightness: factor must be nonnegative");
  Image out = img;
  for (auto& p : out.pixels) p = to_byte(p * factor);
  return out;
}

Image translate(const Image& img, double dx, double dy) {
  require_valid(img, "translate");
  return remap(img, [=](double x, double y) { return std::pair{x - dx, y - dy}; });
}

Image crop_resize_region(const Image& img, std::size_t x0, std::size_t y0, std::size_t side) {
  require_valid(img, "crop_resize_region");
  if (side == 0 || x0 + side > img.width || y0 + side > img.height) {
    throw ParameterError("crop_resize_region: region outside the image");
  }
  return resample_area(img, x0, y0, side, side, img.width, img.height);
}

std::string_view step_name(Step::Kind kind) {
  switch (kind) {
    case Step::Kind::rotate: return "rotate";
    case Step::Kind::flip_horizontal: return "flip_horizontal";
    case Step::Kind::flip_vertical: return "flip_vertical";
    case Step::Kind::brightness: return "brightness";
    case Step::Kind::translate: return "translate";
    case Step::Kind::random_crop: return "random_crop";
  }
  return "unknown";
}

Step::Kind parse_step_kind(std::string_view name) {
  for (auto kind : {Step::Kind::rotate, Step::Kind::flip_horizontal, Step::Kind::flip_vertical, Step::Kind::brightness,
                    Step::Kind::translate, Step::Kind::random_crop}) {
    if (step_name(kind) == name) return kind;
  }
  throw ParameterError("unknown augmentation step '" + std::string(name) + "'");
}

Pipeline Pipeline::lc25000_baseline(std::uint64_t seed) {
  return Pipeline{{{Step::Kind::rotate, 25.0, 1.0},
                   {Step::Kind::flip_horizontal, 0.0, 0.5},
                   {Step::Kind::flip_vertical, 0.0, 0.5}},
                  seed};
}

void Pipeline::validate() const {
  for (const auto& step : steps) {
    const auto name = std::string(step_name(step.kind));
    if (!(step.probability >= 0.0 && step.probability <= 1.0)) {
      throw ParameterError(name + ": probability must lie in [0, 1]");
    }
    switch (step.kind) {
      case Step::Kind::rotate:
        if (!(step.magnitude >= 0.0 && step.magnitude <= 180.0)) {
          throw ParameterError("rotate: bound must lie in [0, 180] degrees");
        }
        break;
      case Step::Kind::brightness:
      case Step::Kind::translate:
        if (!(step.magnitude >= 0.0 && step.magnitude < 1.0)) throw ParameterError(name + ": magnitude must lie in [0, 1)");
        break;
      case Step::Kind::random_crop:
        if (!(step.magnitude > 0.0 && step.magnitude <= 1.0)) throw ParameterError(name + ": magnitude must lie in (0, 1]");
        break;
      case Step::Kind::flip_horizontal:
      case Step::Kind::flip_vertical: break;
    }
  }
}

Image apply_pipeline(const Pipeline& pipeline, const Image& img, std::uint64_t draw_index, Trace* trace) {
  pipeline.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(pipeline.seed), static_cast<std::uint32_t>(pipeline.seed >> 32),
                    static_cast<std::uint32_t>(draw_index), static_cast<std::uint32_t>(draw_index >> 32)};
  std::mt19937_64 rng(seq);
  if (trace) {
    trace->fired.assign(pipeline.steps.size(), false);
    trace->parameter.assign(pipeline.steps.size(), 0.0);
  }

  Image out = img;
  for (std::size_t i = 0; i < pipeline.steps.size(); ++i) {
    const auto& step = pipeline.steps[i];
    // Fixed number of draws per step keeps later steps' parameters
    // independent of whether earlier steps fired.
    const double u_fire = ag::ops::uniform01(rng);
    const double u_a = ag::ops::uniform01(rng);
    const double u_b = ag::ops::uniform01(rng);
    const double u_c = ag::ops::uniform01(rng);
    if (!(u_fire < step.probability)) continue;

    double parameter = 0.0;
    switch (step.kind) {
      case Step::Kind::rotate:
        parameter = (2.0 * u_a - 1.0) * step.magnitude;
        out = rotate(out, parameter);
        break;
      case Step::Kind::flip_horizontal: out = flip(out, FlipAxis::horizontal); break;
      case Step::Kind::flip_vertical: out = flip(out, FlipAxis::vertical); break;
      case Step::Kind::brightness:
        parameter = 1.0 + (2.0 * u_a - 1.0) * step.magnitude;
        out = adjust_brightness(out, parameter);
        break;
      case Step::Kind::translate:
        parameter = (2.0 * u_a - 1.0) * step.magnitude;
        out = translate(out, parameter * static_cast<double>(out.width),
                        (2.0 * u_b - 1.0) * step.magnitude * static_cast<double>(out.height));
        break;
      case Step::Kind::random_crop: {
        const std::size_t full = std::min(out.width, out.height);
        parameter = step.magnitude + (1.0 - step.magnitude) * u_a;
        const auto side = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(parameter * static_cast<double>(full))), 1, full);
        const auto x0 = static_cast<std::size_t>(u_b * static_cast<double>(out.width - side + 1));
        const auto y0 = static_cast<std::size_t>(u_c * static_cast<double>(out.height - side + 1));
        out = crop_resize_region(out, std::min(x0, out.width - side), std::min(y0, out.height - side), side);
        break;
      }
    }
    if (trace) {
      trace->fired[i] = true;
      trace->parameter[i] = parameter;
    }
  }
  return out;
}

Image make_grid(const std::vector<Image>& tiles, std::size_t cols) {
  if (tiles.empty() || cols == 0) throw ParameterError("make_grid: need at least one tile and one column");
  const std::size_t tw = tiles[0].width, th = tiles[0].height;
  for (const auto& t : tiles) {
    if (t.width != tw || t.height != th) throw DimensionError("make_grid: tiles differ in size");
  }
  const std::size_t rows = (tiles.size() + cols - 1) / cols;
  Image grid(tw * cols, th * rows);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const std::size_t gx = (i % cols) * tw, gy = (i / cols) * th;
    for (std::size_t y = 0; y < th; ++y)
      std::copy_n(tiles[i].pixels.begin() + static_cast<std::ptrdiff_t>(y * tw * 3), tw * 3,
                  grid.pixels.begin() + static_cast<std::ptrdiff_t>(((gy + y) * grid.width + gx) * 3));
  }
  return grid;
}

}  // namespace histocam::augment
