#pragma once

// 8-bit raster images plus the file formats the tools read and write: the
// netpbm family (P2/P3 ascii, P5/P6 binary) always, PNG when libpng is around.

#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifdef PLANBENCH_HAS_PNG
#include <png.h>
#endif

#include "planbench/core.hpp"

namespace planbench {

struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 = grayscale, 3 = rgb
  std::vector<uint8_t> data;  // row-major, interleaved channels

  bool operator==(const ImageBuffer&) const = default;

  static ImageBuffer make(int w, int h, int c, uint8_t fill = 0) {
    ImageBuffer img;
    img.width = w;
    img.height = h;
    img.channels = c;
    img.data.assign(static_cast<size_t>(w) * h * c, fill);
    img.validate();
    return img;
  }

  size_t pixel_count() const { return static_cast<size_t>(width) * height; }

  uint8_t* pixel(int x, int y) {
    return data.data() + (static_cast<size_t>(y) * width + x) * channels;
  }
  const uint8_t* pixel(int x, int y) const {
    return data.data() + (static_cast<size_t>(y) * width + x) * channels;
  }

  void validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("image dimensions must be positive");
    if (channels != 1 && channels != 3)
      throw std::invalid_argument("image must have 1 or 3 channels");
    if (data.size() != pixel_count() * channels)
      throw std::invalid_argument("image data size does not match dimensions");
  }
};

namespace detail {

// netpbm headers allow '#' comments anywhere whitespace can appear.
inline int next_pnm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      while (in.get(c) && c != '\n') {
      }
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw config_error("bad character in pnm header");
    tok += c;
  }
  if (tok.empty()) throw config_error("truncated pnm header");
  return std::stoi(tok);
}

}  // namespace detail

inline ImageBuffer read_pnm(std::istream& in) {
  char p, kind;
  if (!in.get(p) || !in.get(kind) || p != 'P' || (kind != '2' && kind != '3' && kind != '5' && kind != '6'))
    throw config_error("not a P2/P3/P5/P6 pnm stream");
  ImageBuffer img;
  img.channels = (kind == '3' || kind == '6') ? 3 : 1;
  img.width = detail::next_pnm_token(in);
  img.height = detail::next_pnm_token(in);
  int maxval = detail::next_pnm_token(in);
  if (maxval < 1 || maxval > 255) throw config_error("pnm maxval out of the 8-bit range");
  size_t n = static_cast<size_t>(img.width) * img.height * img.channels;
  img.data.resize(n);
  if (kind == '5' || kind == '6') {
    // binary: exactly one whitespace byte separates the header from the raster
    if (!in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(n)))
      throw config_error("truncated pnm raster");
  } else {
    for (size_t i = 0; i < n; ++i) {
      int v = detail::next_pnm_token(in);
      if (v > maxval) throw config_error("pnm sample exceeds maxval");
      img.data[i] = static_cast<uint8_t>(v);
    }
  }
  if (maxval != 255)  // rescale shallow bit depths to full range
    for (auto& b : img.data) b = static_cast<uint8_t>((b * 255 + maxval / 2) / maxval);
  img.validate();
  return img;
}

inline ImageBuffer read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open image: " + path);
  return read_pnm(in);
}

inline void write_pnm(std::ostream& out, const ImageBuffer& img, bool binary = true) {
  img.validate();
  const char* magic = img.channels == 3 ? (binary ? "P6" : "P3") : (binary ? "P5" : "P2");
  out << magic << "\n" << img.width << " " << img.height << "\n255\n";
  if (binary) {
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
  } else {
    for (size_t i = 0; i < img.data.size(); ++i)
      out << int(img.data[i]) << ((i + 1) % 12 == 0 ? "\n" : " ");
    out << "\n";
  }
}

inline void write_pnm(const std::string& path, const ImageBuffer& img, bool binary = true) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write image: " + path);
  write_pnm(out, img, binary);
}

#ifdef PLANBENCH_HAS_PNG
inline ImageBuffer read_png(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw config_error("cannot read png: " + path + ": " + png.message);
  bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0 && (png.format & PNG_FORMAT_FLAG_ALPHA) == 0;
  png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  ImageBuffer img;
  img.width = static_cast<int>(png.width);
  img.height = static_cast<int>(png.height);
  img.channels = gray ? 1 : 3;
  img.data.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, img.data.data(), 0, nullptr)) {
    png_image_free(&png);
    throw config_error("cannot decode png: " + path + ": " + png.message);
  }
  img.validate();
  return img;
}

inline void write_png(const std::string& path, const ImageBuffer& img) {
  img.validate();
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, img.data.data(), 0, nullptr))
    throw config_error("cannot write png: " + path + ": " + png.message);
}

// Two-pass simplified-API encode: size query, then the actual write.
inline std::vector<uint8_t> write_png_to_memory(const ImageBuffer& img) {
  img.validate();
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, img.data.data(), 0, nullptr))
    throw config_error(std::string("cannot size png encode: ") + png.message);
  std::vector<uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, img.data.data(), 0, nullptr))
    throw config_error(std::string("cannot encode png: ") + png.message);
  out.resize(size);
  return out;
}
#endif

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && iequals(s.substr(s.size() - suffix.size()), suffix);
}

inline ImageBuffer read_image(const std::string& path) {
  if (has_suffix(path, ".png")) {
#ifdef PLANBENCH_HAS_PNG
    return read_png(path);
#else
    throw config_error("png support not compiled in; use pgm/ppm: " + path);
#endif
  }
  if (has_suffix(path, ".pgm") || has_suffix(path, ".ppm") || has_suffix(path, ".pnm"))
    return read_pnm(path);
  throw config_error("unrecognized image extension: " + path);
}

inline void write_image(const std::string& path, const ImageBuffer& img) {
  if (has_suffix(path, ".png")) {
#ifdef PLANBENCH_HAS_PNG
    write_png(path, img);
    return;
#else
    throw config_error("png support not compiled in; use pgm/ppm: " + path);
#endif
  }
  if (has_suffix(path, ".pgm") || has_suffix(path, ".ppm") || has_suffix(path, ".pnm")) {
    write_pnm(path, img);
    return;
  }
  throw config_error("unrecognized image extension: " + path);
}

}  // namespace planbench
