#pragma once

// 8-bit image loading for ingestion: binary and ASCII netpbm (PGM/PPM), and
// PNG when built with RDEST_HAVE_PNG. Colour input is reduced to BT.601 luma.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "rdest/binary_io.hpp"
#include "rdest/frame.hpp"

#ifdef RDEST_HAVE_PNG
#include <png.h>
#endif

namespace rdest {

inline std::uint16_t bt601_luma(int r, int g, int b) {
  return static_cast<std::uint16_t>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
}

namespace detail {

inline std::size_t pnm_token(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
  for (;;) {
    while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
    if (pos < buf.size() && buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= buf.size() || !std::isdigit(buf[pos])) throw IoError("malformed netpbm header");
  std::size_t v = 0;
  while (pos < buf.size() && std::isdigit(buf[pos])) {
    v = v * 10 + (buf[pos] - '0');
    if (v > (1U << 30)) throw IoError("netpbm header value too large");
    ++pos;
  }
  return v;
}

inline Frame decode_pnm(const std::vector<std::uint8_t>& buf) {
  if (buf.size() < 2 || buf[0] != 'P') throw IoError("not a netpbm file");
  const char type = static_cast<char>(buf[1]);
  if (type != '2' && type != '3' && type != '5' && type != '6') throw IoError("unsupported netpbm type P" + std::string(1, type));
  std::size_t pos = 2;
  const std::size_t w = pnm_token(buf, pos), h = pnm_token(buf, pos), maxval = pnm_token(buf, pos);
  if (w == 0 || h == 0) throw IoError("netpbm image has zero size");
  if (maxval == 0 || maxval > 255) throw IoError("only 8-bit netpbm images are supported");
  const bool colour = type == '3' || type == '6';
  const bool binary = type == '5' || type == '6';
  const std::size_t channels = colour ? 3 : 1;
  std::vector<int> raw(w * h * channels);
  if (binary) {
    ++pos;  // single whitespace after maxval
    if (buf.size() < pos + raw.size()) throw IoError("netpbm pixel data truncated");
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = buf[pos + i];
  } else {
    for (auto& v : raw) v = static_cast<int>(pnm_token(buf, pos));
  }
  Frame f(w, h, 8);
  for (std::size_t i = 0; i < w * h; ++i) {
    int px = colour ? bt601_luma(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]) : raw[i];
    if (maxval != 255) px = static_cast<int>(std::lround(px * 255.0 / static_cast<double>(maxval)));
    f.samples[i] = static_cast<std::uint16_t>(std::min(px, 255));
  }
  return f;
}

#ifdef RDEST_HAVE_PNG
inline Frame decode_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  Frame f(image.width, image.height, 8);
  for (std::size_t i = 0; i < f.samples.size(); ++i) f.samples[i] = bt601_luma(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
  return f;
}
#endif

}  // namespace detail

inline bool is_supported_image(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
#ifdef RDEST_HAVE_PNG
  if (ext == ".png") return true;
#endif
  return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

// Loads an 8-bit image as a luma frame.
inline Frame load_luma(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
#ifdef RDEST_HAVE_PNG
  if (ext == ".png") return detail::decode_png(path);
#endif
  return detail::decode_pnm(read_file(path));
}

inline std::vector<std::uint8_t> encode_pgm(const Frame& frame) {
  if (frame.bitdepth != 8) throw ArgumentError("PGM output supports 8-bit frames only");
  const std::string header = "P5\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (const auto s : frame.samples) out.push_back(static_cast<std::uint8_t>(s));
  return out;
}

inline void save_pgm(const Frame& frame, const std::filesystem::path& path) { atomic_write_file(path, encode_pgm(frame)); }

}  // namespace rdest
