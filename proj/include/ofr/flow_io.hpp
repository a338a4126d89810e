#pragma once

#include <filesystem>

#include "ofr/flow.hpp"

namespace ofr::io {

/// Flow file layout: "OFRB", u32 LE width, u32 LE height, then H*W
/// interleaved (u, v) pairs as f32 LE in row-major order. Values are stored
/// as f32, so doubles round to the nearest float on write. Tags are not
/// stored; read flows are tagged (0 -> 1).
void write_flow(const std::filesystem::path& path, const Flow& flow);
Flow read_flow(const std::filesystem::path& path);

}  // namespace ofr::io
