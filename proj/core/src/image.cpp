#include "histocam/image.hpp"

#include <png.h>
// jpeglib.h needs FILE and size_t declared first.
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <jpeglib.h>
#include <memory>

#include "histocam/errors.hpp"

namespace histocam {

Image::Image(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}

Image::Image(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b) : Image(w, h) {
  for (std::size_t i = 0; i < w * h; ++i) {
    pixels[3 * i] = r;
    pixels[3 * i + 1] = g;
    pixels[3 * i + 2] = b;
  }
}

namespace {

Image read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw DataError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  Image out(img.width, img.height);
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DataError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegErrorManager*>(info->err);
  (*info->err->format_message)(info, err->message);
  std::longjmp(err->jump, 1);
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

// Kept free of objects with non-trivial destructors between setjmp and the
// possible longjmp.
bool decode_jpeg(std::FILE* file, Image& out, char* message) {
  jpeg_decompress_struct info;
  JpegErrorManager err;
  info.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    std::strncpy(message, err.message, JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&info);
    return false;
  }
  jpeg_create_decompress(&info);
  jpeg_stdio_src(&info, file);
  jpeg_read_header(&info, TRUE);
  info.out_color_space = JCS_RGB;
  jpeg_start_decompress(&info);
  out.width = info.output_width;
  out.height = info.output_height;
  out.pixels.assign(out.width * out.height * 3, 0);
  while (info.output_scanline < info.output_height) {
    JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(info.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&info, &row, 1);
  }
  jpeg_finish_decompress(&info);
  jpeg_destroy_decompress(&info);
  return true;
}

Image read_jpeg(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw DataError("cannot open " + path.string());
  Image out;
  char message[JMSG_LENGTH_MAX] = {};
  if (!decode_jpeg(file.get(), out, message)) {
    throw DataError("cannot decode JPEG " + path.string() + ": " + message);
  }
  return out;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  unsigned char signature[8] = {};
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image " + path.string());
    in.read(reinterpret_cast<char*>(signature), sizeof(signature));
    if (in.gcount() < 3) throw DataError("cannot decode " + path.string() + ": file too short");
  }
  if (png_sig_cmp(signature, 0, 8) == 0) return read_png(path);
  if (signature[0] == 0xFF && signature[1] == 0xD8 && signature[2] == 0xFF) return read_jpeg(path);
  throw DataError("cannot decode " + path.string() + ": neither PNG nor JPEG");
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.width == 0 || image.height == 0 || image.pixels.size() != image.width * image.height * 3) {
    throw ParameterError("write_png: malformed image buffer");
  }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

}  // namespace histocam
