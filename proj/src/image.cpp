#include "meshstyle/image.hpp"

#include <fmt/format.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "meshstyle/errors.hpp"

namespace meshstyle {

// -----------------------------------------------------------------------------
// PNG FILES
// -----------------------------------------------------------------------------

namespace {

struct file_closer {
  void operator()(FILE* f) const { std::fclose(f); }
};
using file_handle = std::unique_ptr<FILE, file_closer>;

void png_error_handler(png_structp png, png_const_charp message) {
  auto text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = message;
  png_longjmp(png, 1);
}
void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace

feature_map<float> load_png(const std::string& filename) {
  auto file = file_handle{std::fopen(filename.c_str(), "rb")};
  if (!file) throw io_error("cannot open image " + filename);
  auto signature = std::array<uint8_t, 8>{};
  if (std::fread(signature.data(), 1, 8, file.get()) != 8 ||
      png_sig_cmp(signature.data(), 0, 8))
    throw precondition_error(filename + ": not a PNG file");

  auto message = std::string{};
  auto png     = png_create_read_struct(
      PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
  auto info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw io_error("cannot allocate PNG reader");
  }
  auto rows  = std::vector<uint8_t>{};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw precondition_error(filename + ": " + message);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  auto width  = png_get_image_width(png, info);
  auto height = png_get_image_height(png, info);
  auto type   = png_get_color_type(png, info);
  auto depth  = png_get_bit_depth(png, info);
  if (type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (type == PNG_COLOR_TYPE_GRAY || type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
  }
  if (type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  auto stride = png_get_rowbytes(png, info);
  auto wide   = png_get_bit_depth(png, info) == 16;
  rows.resize(stride * height);
  auto pointers = std::vector<png_bytep>(height);
  for (size_t r = 0; r < height; r++) pointers[r] = rows.data() + r * stride;
  png_read_image(png, pointers.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  auto image = feature_map<float>::image(3, int(width), int(height));
  for (size_t r = 0; r < height; r++) {
    for (size_t c = 0; c < width; c++) {
      for (uint32_t ch = 0; ch < 3; ch++) {
        auto index = r * stride + (c * 3 + ch) * (wide ? 2 : 1);
        auto value = wide ? (rows[index] | (rows[index + 1] << 8)) / 65535.0f
                          : rows[index] / 255.0f;
        image.at(ch, r * width + c) = value;
      }
    }
  }
  return image;
}

void save_png(const std::string& filename, int width, int height,
    const std::vector<uint8_t>& rgb) {
  if (rgb.size() != size_t(width) * height * 3)
    throw precondition_error("save_png: pixel buffer does not match size");
  auto file = file_handle{std::fopen(filename.c_str(), "wb")};
  if (!file) throw io_error("cannot write image " + filename);
  auto message = std::string{};
  auto png     = png_create_write_struct(
      PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
  auto info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw io_error("cannot allocate PNG writer");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error(filename + ": " + message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), 8,
      PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
      PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < height; r++)
    png_write_row(png, rgb.data() + size_t(r) * width * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// -----------------------------------------------------------------------------
// PIXEL OPERATIONS
// -----------------------------------------------------------------------------

feature_map<float> resize_bilinear(const feature_map<float>& image, int width, int height) {
  if (width <= 0 || height <= 0)
    throw precondition_error("resize target must be positive");
  if (width == image.width && height == image.height) return image;
  auto out = feature_map<float>::image(image.channels, width, height);
  auto sx  = double(image.width) / width;
  auto sy  = double(image.height) / height;
  for (int y = 0; y < height; y++) {
    auto fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(image.height - 1));
    auto y0 = int(fy);
    auto y1 = std::min(y0 + 1, image.height - 1);
    auto ty = fy - y0;
    for (int x = 0; x < width; x++) {
      auto fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(image.width - 1));
      auto x0 = int(fx);
      auto x1 = std::min(x0 + 1, image.width - 1);
      auto tx = fx - x0;
      for (uint32_t c = 0; c < image.channels; c++) {
        auto src = image.channel(c);
        auto top = src[size_t(y0) * image.width + x0] * (1 - tx) +
                   src[size_t(y0) * image.width + x1] * tx;
        auto bot = src[size_t(y1) * image.width + x0] * (1 - tx) +
                   src[size_t(y1) * image.width + x1] * tx;
        out.at(c, size_t(y) * width + x) = float(top * (1 - ty) + bot * ty);
      }
    }
  }
  return out;
}

uint8_t quantize(double value) {
  if (!(value > 0)) return 0;
  if (value >= 1) return 255;
  return uint8_t(std::floor(value * 255 + 0.5));
}

}  // namespace meshstyle
