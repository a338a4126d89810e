#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ofr/types.hpp"

namespace ofr {

/// Named convolution layers. Each layer exposes two flat parameter arrays,
/// "<name>.kernel" (rank 4: K_h, K_w, C_in, C_out) and "<name>.bias" (rank 1).
class ParamSet {
 public:
  using LayerId = int;

  LayerId add(const std::string& name, Conv layer);

  LayerId id(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Conv& layer(LayerId id) { return layers_.at(static_cast<std::size_t>(id)); }
  const Conv& layer(LayerId id) const { return layers_.at(static_cast<std::size_t>(id)); }
  const std::string& name(LayerId id) const { return names_.at(static_cast<std::size_t>(id)); }
  int layer_count() const { return static_cast<int>(layers_.size()); }

  /// Same layout, all values zero (gradient / moment buffers).
  ParamSet zeros_like() const;

  std::size_t scalar_count() const;

  struct ArrayRef {
    std::string name;
    std::vector<std::uint32_t> dims;
    Eigen::Map<Eigen::VectorXd> values;
  };
  struct ConstArrayRef {
    std::string name;
    std::vector<std::uint32_t> dims;
    Eigen::Map<const Eigen::VectorXd> values;
  };
  std::vector<ArrayRef> arrays();
  std::vector<ConstArrayRef> arrays() const;

  bool same_layout(const ParamSet& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Conv> layers_;
  std::map<std::string, LayerId> index_;
};

/// Weight file: "OFRW", then one record per array until end of file:
/// u16 LE name length, UTF-8 name, u8 rank, rank x u32 LE dims, f32 LE values.
void write_weights(const std::filesystem::path& path, const ParamSet& params);

/// Loads values into an existing layout; every array of `params` must be
/// present with matching dims, and unknown records are rejected.
void read_weights(const std::filesystem::path& path, ParamSet& params);

}  // namespace ofr
