#include "ofr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

namespace ofr::io {

namespace fs = std::filesystem;

std::uint8_t quantize(Real v) {
  const Real scaled = std::round(std::clamp(v, Real(0), Real(1)) * Real(255));
  return static_cast<std::uint8_t>(scaled);
}

Real dequantize(std::uint8_t v) { return static_cast<Real>(v) / Real(255); }

Frame quantized(const Frame& frame) {
  Frame out = frame;
  out.array() = frame.array().unaryExpr([](Real v) { return dequantize(quantize(v)); });
  return out;
}

namespace {

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

Frame from_bytes(const std::vector<std::uint8_t>& bytes, int height, int width, int channels) {
  Frame frame(height, width, channels);
  for (Eigen::Index i = 0; i < frame.size(); ++i) frame.data()[i] = dequantize(bytes[i]);
  return frame;
}

std::vector<std::uint8_t> to_bytes(const Frame& frame) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(frame.size()));
  for (Eigen::Index i = 0; i < frame.size(); ++i) bytes[i] = quantize(frame.data()[i]);
  return bytes;
}

// Skips whitespace and '#' comments between PPM header tokens.
int read_ppm_int(std::istream& in, const fs::path& path) {
  int c = in.peek();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int value = 0;
  if (!(in >> value)) throw FormatError(path.string() + ": malformed PPM header");
  return value;
}

void require_writable_channels(const Frame& frame, const fs::path& path) {
  if (frame.channels() != 1 && frame.channels() != 3) {
    throw ConfigError(path.string() + ": only 1- or 3-channel frames can be written as images");
  }
  if (frame.empty()) throw SizeError(path.string() + ": cannot write an empty frame");
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Frame read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (!in || magic != "P6") throw FormatError(path.string() + ": expected binary PPM magic \"P6\"");
  const int width = read_ppm_int(in, path);
  const int height = read_ppm_int(in, path);
  const int maxval = read_ppm_int(in, path);
  if (width <= 0 || height <= 0) throw FormatError(path.string() + ": non-positive PPM dimensions");
  if (maxval != 255) throw FormatError(path.string() + ": only 8-bit PPM (maxval 255) is supported");
  in.get();  // single whitespace byte before the raster
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError(path.string() + ": truncated PPM raster");
  }
  return from_bytes(bytes, height, width, 3);
}

void write_ppm(const fs::path& path, const Frame& frame) {
  require_writable_channels(frame, path);
  const Frame rgb = frame.channels() == 3 ? frame : concat_channels(concat_channels(frame, frame), frame);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << rgb.width() << " " << rgb.height() << "\n255\n";
  const auto bytes = to_bytes(rgb);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Frame read_png(const fs::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw FormatError(path.string() + ": not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<std::uint8_t> bytes;
  int width = 0;
  int height = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path.string() + ": corrupt PNG data");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<std::size_t>(width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path.string() + ": unsupported PNG pixel layout");
  }
  bytes.resize(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = bytes.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return from_bytes(bytes, height, width, 3);
}

void write_png(const fs::path& path, const Frame& frame) {
  require_writable_channels(frame, path);
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  auto bytes = to_bytes(frame);
  const int channels = frame.channels();
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(frame.width()), static_cast<png_uint_32>(frame.height()), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // No timestamps or text chunks: identical frames give identical files.
  png_write_info(png, info);
  std::vector<png_bytep> rows(frame.height());
  for (int y = 0; y < frame.height(); ++y) {
    rows[y] = bytes.data() + static_cast<std::size_t>(y) * frame.width() * channels;
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Frame read_image(const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm") return read_ppm(path);
  throw FormatError(path.string() + ": unsupported image extension (want .png or .ppm)");
}

void write_image(const fs::path& path, const Frame& frame) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return write_png(path, frame);
  if (ext == ".ppm") return write_ppm(path, frame);
  throw FormatError(path.string() + ": unsupported image extension (want .png or .ppm)");
}

namespace {

// "000012" -> 12, "000012_5" -> 12.5; anything else is not numeric.
std::optional<double> numeric_stem(const std::string& stem) {
  const auto underscore = stem.find('_');
  const std::string whole = stem.substr(0, underscore);
  if (whole.empty() || !std::all_of(whole.begin(), whole.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return std::nullopt;
  }
  double value = std::stod(whole);
  if (underscore != std::string::npos) {
    const std::string frac = stem.substr(underscore + 1);
    if (frac.empty() || !std::all_of(frac.begin(), frac.end(), [](unsigned char c) { return std::isdigit(c); })) {
      return std::nullopt;
    }
    value += std::stod("0." + frac);
  }
  return value;
}

}  // namespace

std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = lower_extension(entry.path());
    if (ext == ".png" || ext == ".ppm") frames.push_back(entry.path());
  }
  std::sort(frames.begin(), frames.end(), [](const fs::path& a, const fs::path& b) {
    const auto na = numeric_stem(a.stem().string());
    const auto nb = numeric_stem(b.stem().string());
    if (na && nb && *na != *nb) return *na < *nb;
    if (na.has_value() != nb.has_value()) return na.has_value();
    return a.filename().string() < b.filename().string();
  });
  return frames;
}

}  // namespace ofr::io
