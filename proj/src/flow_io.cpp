#include "ofr/flow_io.hpp"

#include <fstream>

#include "ofr/binary.hpp"

namespace ofr::io {

namespace {
constexpr char kMagic[4] = {'O', 'F', 'R', 'B'};
}

void write_flow(const std::filesystem::path& path, const Flow& flow) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 4);
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(flow.width()));
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(flow.height()));
  const auto& uv = flow.uv();
  for (Eigen::Index i = 0; i < uv.size(); ++i) binary::write_le<float>(out, static_cast<float>(uv.data()[i]));
  if (!out) throw IoError("short write to " + path.string());
}

Flow read_flow(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != std::string(kMagic, 4)) {
    throw FormatError(path.string() + ": bad magic, expected \"OFRB\"");
  }
  const auto width = binary::read_le<std::uint32_t>(in, path.string());
  const auto height = binary::read_le<std::uint32_t>(in, path.string());
  if (width == 0 || height == 0 || width > (1u << 16) || height > (1u << 16)) {
    throw FormatError(path.string() + ": implausible flow dimensions");
  }
  Flow flow(static_cast<int>(height), static_cast<int>(width), 0.0, 1.0);
  auto& uv = flow.uv();
  for (Eigen::Index i = 0; i < uv.size(); ++i) uv.data()[i] = binary::read_le<float>(in, path.string());
  return flow;
}

}  // namespace ofr::io
