#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace histocam {

/// 8-bit RGB image, row-major, interleaved channels.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  Image() = default;
  Image(std::size_t w, std::size_t h);
  Image(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  static constexpr std::size_t channels = 3;

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Decodes PNG or JPEG (detected from the file signature) into RGB.
/// Throws DataError naming the path when the file cannot be decoded.
Image read_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG. Output bytes depend only on the pixels.
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace histocam
