#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ofr/types.hpp"

namespace ofr::io {

/// u8 -> [0,1] is exactly v / 255; [0,1] -> u8 rounds to nearest and clamps.
std::uint8_t quantize(Real v);
Real dequantize(std::uint8_t v);

/// Quantize-dequantize round trip, as if the frame went through an 8-bit file.
Frame quantized(const Frame& frame);

/// Reads an 8-bit PNG (gray, gray+alpha, RGB or RGBA) or binary PPM (P6,
/// maxval 255) into a 3-channel frame. The format is chosen by extension.
Frame read_image(const std::filesystem::path& path);

/// Writes a 1- or 3-channel frame; 1-channel frames are replicated to RGB for
/// PPM and written as grayscale PNG.
void write_image(const std::filesystem::path& path, const Frame& frame);

Frame read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Frame& frame);
Frame read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Frame& frame);

/// Image files (.png/.ppm) of a directory, sorted by the numeric value of the
/// stem, then lexicographically.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

}  // namespace ofr::io
