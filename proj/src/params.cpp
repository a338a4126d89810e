#include "ofr/params.hpp"

#include <fstream>
#include <set>

#include "ofr/binary.hpp"

namespace ofr {

ParamSet::LayerId ParamSet::add(const std::string& name, Conv layer) {
  if (index_.count(name)) throw ConfigError("duplicate parameter layer `" + name + "`");
  layer.validate();
  const LayerId id = static_cast<LayerId>(layers_.size());
  names_.push_back(name);
  layers_.push_back(std::move(layer));
  index_.emplace(name, id);
  return id;
}

ParamSet::LayerId ParamSet::id(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no parameter layer `" + name + "`");
  return it->second;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out = *this;
  for (Conv& layer : out.layers_) {
    layer.kernel.setZero();
    layer.bias.setZero();
  }
  return out;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const Conv& layer : layers_) n += static_cast<std::size_t>(layer.kernel.size() + layer.bias.size());
  return n;
}

namespace {

std::vector<std::uint32_t> kernel_dims(const Conv& layer) {
  return {static_cast<std::uint32_t>(layer.kernel_h), static_cast<std::uint32_t>(layer.kernel_w),
          static_cast<std::uint32_t>(layer.in_channels), static_cast<std::uint32_t>(layer.out_channels)};
}

}  // namespace

std::vector<ParamSet::ArrayRef> ParamSet::arrays() {
  std::vector<ArrayRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Conv& layer = layers_[i];
    out.push_back({names_[i] + ".kernel", kernel_dims(layer),
                   Eigen::Map<Eigen::VectorXd>(layer.kernel.data(), layer.kernel.size())});
    out.push_back({names_[i] + ".bias", {static_cast<std::uint32_t>(layer.out_channels)},
                   Eigen::Map<Eigen::VectorXd>(layer.bias.data(), layer.bias.size())});
  }
  return out;
}

std::vector<ParamSet::ConstArrayRef> ParamSet::arrays() const {
  std::vector<ConstArrayRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Conv& layer = layers_[i];
    out.push_back({names_[i] + ".kernel", kernel_dims(layer),
                   Eigen::Map<const Eigen::VectorXd>(layer.kernel.data(), layer.kernel.size())});
    out.push_back({names_[i] + ".bias", {static_cast<std::uint32_t>(layer.out_channels)},
                   Eigen::Map<const Eigen::VectorXd>(layer.bias.data(), layer.bias.size())});
  }
  return out;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Conv& a = layers_[i];
    const Conv& b = other.layers_[i];
    if (kernel_dims(a) != kernel_dims(b) || a.padding != b.padding || a.stride != b.stride) return false;
  }
  return true;
}

namespace {
constexpr char kWeightMagic[4] = {'O', 'F', 'R', 'W'};
}

void write_weights(const std::filesystem::path& path, const ParamSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kWeightMagic, 4);
  for (const auto& array : params.arrays()) {
    if (array.name.size() > 0xFFFF) throw ConfigError("parameter name too long: " + array.name);
    io::binary::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(array.name.size()));
    out.write(array.name.data(), static_cast<std::streamsize>(array.name.size()));
    io::binary::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(array.dims.size()));
    for (std::uint32_t d : array.dims) io::binary::write_le<std::uint32_t>(out, d);
    for (Eigen::Index i = 0; i < array.values.size(); ++i) {
      io::binary::write_le<float>(out, static_cast<float>(array.values[i]));
    }
  }
  if (!out) throw IoError("short write to " + path.string());
}

void read_weights(const std::filesystem::path& path, ParamSet& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string what = path.string();
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string(magic, 4) != std::string(kWeightMagic, 4)) {
    throw FormatError(what + ": bad magic, expected \"OFRW\"");
  }
  auto arrays = params.arrays();
  std::map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < arrays.size(); ++i) by_name.emplace(arrays[i].name, i);
  std::set<std::string> seen;
  while (in.peek() != std::char_traits<char>::eof()) {
    const auto name_len = io::binary::read_le<std::uint16_t>(in, what);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != name_len) throw FormatError(what + ": truncated record name");
    const auto rank = io::binary::read_le<std::uint8_t>(in, what);
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = io::binary::read_le<std::uint32_t>(in, what);
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw ConfigError(what + ": unexpected parameter `" + name + "`");
    auto& array = arrays[it->second];
    if (dims != array.dims) throw ConfigError(what + ": parameter `" + name + "` has mismatched dims");
    for (Eigen::Index i = 0; i < array.values.size(); ++i) array.values[i] = io::binary::read_le<float>(in, what);
    seen.insert(name);
  }
  for (const auto& array : arrays) {
    if (!seen.count(array.name)) throw ConfigError(what + ": missing parameter `" + array.name + "`");
  }
}

}  // namespace ofr
