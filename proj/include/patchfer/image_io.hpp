#pragma once

#include <png.h>

#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "patchfer/error.hpp"
#include "patchfer/image.hpp"

namespace patchfer {

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reads one whitespace-delimited PNM header token, skipping '#' comments.
inline std::string pnm_token(const std::vector<unsigned char>& buf, std::size_t& pos) {
  for (;;) {
    while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
    if (pos < buf.size() && buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string tok;
  while (pos < buf.size() && !std::isspace(buf[pos])) tok.push_back(char(buf[pos++]));
  return tok;
}

}  // namespace detail

inline GrayImage decode_pgm(const std::vector<unsigned char>& buf, const std::string& name = "<pgm>") {
  std::size_t pos = 0;
  const std::string magic = detail::pnm_token(buf, pos);
  if (magic == "P6" || magic == "P3") throw IoError(name + ": color PPM input is not supported");
  if (magic != "P5") throw IoError(name + ": not a binary PGM (P5) file");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(detail::pnm_token(buf, pos));
    h = std::stoi(detail::pnm_token(buf, pos));
    maxval = std::stoi(detail::pnm_token(buf, pos));
  } catch (const std::exception&) {
    throw IoError(name + ": malformed PGM header");
  }
  if (maxval != 255) throw IoError(name + ": only maxval 255 PGM is supported");
  if (w < 1 || h < 1) throw IoError(name + ": invalid PGM dimensions");
  ++pos;  // single whitespace byte after maxval
  const std::size_t n = std::size_t(w) * std::size_t(h);
  if (buf.size() < pos + n) throw IoError(name + ": truncated PGM raster");
  return GrayImage(w, h, std::vector<std::uint8_t>(buf.begin() + std::ptrdiff_t(pos), buf.begin() + std::ptrdiff_t(pos + n)));
}

inline void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels().data()), std::streamsize(img.pixels().size()));
  if (!out) throw IoError("write failed for " + path.string());
}

/// 8-bit grayscale PNG only; colour, alpha, and 16-bit files are rejected.
inline GrayImage decode_png(const std::vector<unsigned char>& buf, const std::string& name = "<png>") {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, buf.data(), buf.size())) {
    throw IoError(name + ": " + image.message);
  }
  if ((image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA | PNG_FORMAT_FLAG_LINEAR)) != 0) {
    png_image_free(&image);
    throw IoError(name + ": only 8-bit grayscale PNG is supported");
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError(name + ": " + image.message);
  }
  return GrayImage(int(image.width), int(image.height), std::move(pixels));
}

inline void write_png(const GrayImage& img, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = png_uint_32(img.width());
  image.height = png_uint_32(img.height());
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels().data(), 0, nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + image.message);
  }
}

/// Dispatches on file signature, not extension.
inline GrayImage read_image(const std::filesystem::path& path) {
  const auto buf = detail::read_file_bytes(path);
  static constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (buf.size() >= 8 && std::memcmp(buf.data(), kPngSig, 8) == 0) return decode_png(buf, path.string());
  if (buf.size() >= 2 && buf[0] == 'P') return decode_pgm(buf, path.string());
  throw IoError(path.string() + ": unrecognized image format (expected PGM or PNG)");
}

}  // namespace patchfer
