#include "monofill/image_io.hpp"

#include <png.h>

#include <cstring>
#include <filesystem>
#include <vector>

#include "monofill/errors.hpp"

namespace monofill {

namespace {

struct RawPng {
  Index height = 0;
  Index width = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> bytes;
};

class PngReader {
 public:
  explicit PngReader(const std::string& path) : path_(path) {
    std::memset(&image_, 0, sizeof(image_));
    image_.version = PNG_IMAGE_VERSION;
  }
  ~PngReader() { png_image_free(&image_); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  RawPng read() {
    if (!std::filesystem::exists(path_)) throw IoError(path_, "no such file");
    if (!png_image_begin_read_from_file(&image_, path_.c_str())) throw IoError(path_, image_.message);
    const bool color = (image_.format & PNG_FORMAT_FLAG_COLOR) != 0;
    // Request the file's own colour class so no colour-space conversion runs.
    image_.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    RawPng raw;
    raw.height = image_.height;
    raw.width = image_.width;
    raw.channels = color ? 3 : 1;
    raw.bytes.resize(PNG_IMAGE_SIZE(image_));
    if (!png_image_finish_read(&image_, nullptr, raw.bytes.data(), 0, nullptr)) throw IoError(path_, image_.message);
    return raw;
  }

 private:
  std::string path_;
  png_image image_;
};

RawPng read_png(const std::string& path) { return PngReader(path).read(); }

void write_png(const std::string& path, Index height, Index width, int channels,
               const std::vector<std::uint8_t>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int ok = png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr);
  const std::string message = image.message;
  png_image_free(&image);
  if (!ok) throw IoError(path, message.empty() ? "write failed" : message);
}

RgbImage to_rgb(const RawPng& raw) {
  RgbImage img = make_rgb(raw.height, raw.width);
  for (Index r = 0; r < raw.height; ++r)
    for (Index c = 0; c < raw.width; ++c)
      for (int k = 0; k < 3; ++k) {
        const int src = raw.channels == 3 ? k : 0;
        const std::size_t idx = static_cast<std::size_t>((r * raw.width + c) * raw.channels + src);
        img.channels[k](r, c) = raw.bytes[idx] / 255.0;
      }
  return img;
}

}  // namespace

RgbImage load_image(const std::string& path) { return to_rgb(read_png(path)); }

GrayImage load_gray(const std::string& path) {
  const RawPng raw = read_png(path);
  if (raw.channels == 3) return to_monochrome(to_rgb(raw));
  GrayImage img = make_gray(raw.height, raw.width);
  for (Index r = 0; r < raw.height; ++r)
    for (Index c = 0; c < raw.width; ++c) img(r, c) = raw.bytes[static_cast<std::size_t>(r * raw.width + c)] / 255.0;
  return img;
}

Mask load_mask(const std::string& path) {
  const GrayImage luma = load_gray(path);
  Mask mask = make_mask(luma.height(), luma.width());
  // Compare on the byte scale so the threshold is exact.
  for (Index r = 0; r < luma.height(); ++r)
    for (Index c = 0; c < luma.width(); ++c) mask(r, c) = to_byte(luma(r, c)) >= 128 ? 1 : 0;
  return mask;
}

void save_image(const RgbImage& img, const std::string& path) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(img.height() * img.width() * 3));
  std::size_t i = 0;
  for (Index r = 0; r < img.height(); ++r)
    for (Index c = 0; c < img.width(); ++c)
      for (int k = 0; k < 3; ++k) bytes[i++] = to_byte(img.channels[k](r, c));
  write_png(path, img.height(), img.width(), 3, bytes);
}

void save_gray(const GrayImage& img, const std::string& path) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(img.height() * img.width()));
  std::size_t i = 0;
  for (Index r = 0; r < img.height(); ++r)
    for (Index c = 0; c < img.width(); ++c) bytes[i++] = to_byte(img(r, c));
  write_png(path, img.height(), img.width(), 1, bytes);
}

void save_mask(const Mask& mask, const std::string& path) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(mask.height() * mask.width()));
  std::size_t i = 0;
  for (Index r = 0; r < mask.height(); ++r)
    for (Index c = 0; c < mask.width(); ++c) bytes[i++] = mask(r, c) ? 255 : 0;
  write_png(path, mask.height(), mask.width(), 1, bytes);
}

}  // namespace monofill
