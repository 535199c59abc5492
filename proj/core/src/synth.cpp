// Procedural stand-in for LC25000 tissue tiles.
//
// Label 0 ("benign-like"): warm pink field shaded by a few broad blobs; all
// structure is low frequency.
// Label 1 ("malignant-like"): cool blue-purple field with fine stripes at a
// random orientation and scattered dark elliptical nuclei.
// The two palettes differ in opposite directions per channel (red down, blue
// up) so random filters do not see one class as uniformly "more" signal.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "histocam/datakit.hpp"
#include "histocam/errors.hpp"
#include "histocam/ops.hpp"

namespace histocam::datakit {
namespace {

namespace fs = std::filesystem;

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * ag::ops::uniform01(rng); }

struct Rgb {
  double r, g, b;
};

Image render(std::size_t size, std::mt19937_64& rng, auto&& shade) {
  Image img(size, size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      Rgb c = shade(static_cast<double>(x), static_cast<double>(y));
      const double grain = uniform(rng, -6.0, 6.0);
      img.at(x, y, 0) = static_cast<std::uint8_t>(std::clamp(std::lround(c.r + grain), 0L, 255L));
      img.at(x, y, 1) = static_cast<std::uint8_t>(std::clamp(std::lround(c.g + grain), 0L, 255L));
      img.at(x, y, 2) = static_cast<std::uint8_t>(std::clamp(std::lround(c.b + grain), 0L, 255L));
    }
  return img;
}

Image blob_field(std::size_t size, std::mt19937_64& rng) {
  struct Blob {
    double x, y, radius, strength;
  };
  const double s = static_cast<double>(size);
  std::vector<Blob> blobs(4 + rng() % 4);
  for (auto& b : blobs) b = {uniform(rng, 0, s), uniform(rng, 0, s), uniform(rng, s / 6, s / 3), uniform(rng, -1, 1)};
  const Rgb base{uniform(rng, 230, 245), uniform(rng, 150, 170), uniform(rng, 110, 130)};
  return render(size, rng, [&](double x, double y) {
    double v = 0.0;
    for (const auto& b : blobs) {
      const double d2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
      v += b.strength * std::exp(-d2 / (2 * b.radius * b.radius));
    }
    return Rgb{base.r + 14 * v, base.g + 18 * v, base.b + 12 * v};
  });
}

Image striated_field(std::size_t size, std::mt19937_64& rng) {
  struct Nucleus {
    double x, y, a, b, angle;
  };
  const double s = static_cast<double>(size);
  const double phi = uniform(rng, 0, std::numbers::pi);
  const double period = uniform(rng, 3.5, 6.0);
  const double phase = uniform(rng, 0, 2 * std::numbers::pi);
  std::vector<Nucleus> nuclei(static_cast<std::size_t>(s * s / 256.0) + rng() % 6);
  for (auto& n : nuclei) {
    n = {uniform(rng, 0, s), uniform(rng, 0, s), uniform(rng, 1.8, 4.0), uniform(rng, 1.2, 2.6),
         uniform(rng, 0, std::numbers::pi)};
  }
  const Rgb base{uniform(rng, 105, 125), uniform(rng, 110, 130), uniform(rng, 215, 235)};
  const double cp = std::cos(phi), sp = std::sin(phi);
  return render(size, rng, [&](double x, double y) {
    const double stripe = std::sin(2 * std::numbers::pi * (x * cp + y * sp) / period + phase);
    Rgb c{base.r + 45 * stripe, base.g + 45 * stripe, base.b + 20 * stripe};
    for (const auto& n : nuclei) {
      const double dx = x - n.x, dy = y - n.y;
      const double u = (dx * std::cos(n.angle) + dy * std::sin(n.angle)) / n.a;
      const double v = (-dx * std::sin(n.angle) + dy * std::cos(n.angle)) / n.b;
      if (u * u + v * v <= 1.0) {
        c = {70, 40, 150};
        break;
      }
    }
    return c;
  });
}

}  // namespace

Image synth_texture(int label, std::size_t size, std::uint64_t seed) {
  if (label != 0 && label != 1) throw ParameterError("synth_texture: label must be 0 or 1");
  if (size == 0) throw ParameterError("synth_texture: size must be positive");
  std::mt19937_64 rng(seed);
  return label == 0 ? blob_field(size, rng) : striated_field(size, rng);
}

std::size_t synth_generate(const fs::path& out_dir, const SynthOptions& options) {
  if (options.per_class < 10) throw ParameterError("synth: per_class must be at least 10");
  if (options.size < 32) throw ParameterError("synth: size must be at least 32");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::size_t written = 0;
  for (auto c : task_classes(options.task)) {
    const auto dir = out_dir / class_dir_name(c);
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const int label = binary_label(options.task, c);
    for (std::size_t i = 0; i < options.per_class; ++i) {
      std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                        static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(i)};
      std::mt19937_64 seeder(seq);
      const Image img = synth_texture(label, options.size, seeder());
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%05zu.png", std::string(class_dir_name(c)).c_str(), i);
      write_png(dir / name, img);
      ++written;
    }
  }
  return written;
}

}  // namespace histocam::datakit
