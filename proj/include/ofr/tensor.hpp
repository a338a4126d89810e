#pragma once

// Dense H x W x C grids and the primitive operators built on them.
//
// Storage is an Eigen row-major array with one row per pixel and one column
// per channel, i.e. channel-last row-major memory: element (y, x, c) lives at
// data()[(y * W + x) * C + c]. Images and feature maps share the type.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ofr/error.hpp"

namespace ofr {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
class Tensor {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Tensor() = default;

  Tensor(int height, int width, int channels, Scalar fill = Scalar(0))
      : height_(height), width_(width) {
    if (height < 0 || width < 0 || channels < 0) {
      throw SizeError("tensor dimensions must be non-negative");
    }
    data_.setConstant(static_cast<Eigen::Index>(height) * width, channels, fill);
  }

  /// Wraps pixel-major storage; rows must equal height * width.
  Tensor(int height, int width, Storage data) : height_(height), width_(width), data_(std::move(data)) {
    if (data_.rows() != static_cast<Eigen::Index>(height) * width) {
      throw ShapeError("storage rows do not match height * width");
    }
  }

  static Tensor zeros(int height, int width, int channels) { return Tensor(height, width, channels); }
  static Tensor zeros_like(const Tensor& other) {
    return Tensor(other.height(), other.width(), other.channels());
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return static_cast<int>(data_.cols()); }
  int pixels() const { return height_ * width_; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar& operator()(int y, int x, int c) { return data_(static_cast<Eigen::Index>(y) * width_ + x, c); }
  Scalar operator()(int y, int x, int c) const {
    return data_(static_cast<Eigen::Index>(y) * width_ + x, c);
  }

  Storage& array() { return data_; }
  const Storage& array() const { return data_; }
  auto matrix() { return data_.matrix(); }
  auto matrix() const { return data_.matrix(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  bool same_spatial(const Tensor& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool same_shape(const Tensor& other) const {
    return same_spatial(other) && channels() == other.channels();
  }

  /// Copy of channels [first, first + count).
  Tensor channel_slice(int first, int count) const {
    return Tensor(height_, width_, Storage(data_.middleCols(first, count)));
  }

  bool operator==(const Tensor& other) const {
    return same_shape(other) && (data_ == other.data_).all();
  }

 private:
  int height_ = 0;
  int width_ = 0;
  Storage data_;
};

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + "x" + std::to_string(a.channels()) + " vs " +
                     std::to_string(b.height()) + "x" + std::to_string(b.width()) + "x" +
                     std::to_string(b.channels()) + ")");
  }
}

template <typename Scalar>
void require_same_spatial(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
  if (!a.same_spatial(b)) {
    throw ShapeError(std::string(what) + ": spatial size mismatch (" + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()) + ")");
  }
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a, b, "add");
  return Tensor<Scalar>(a.height(), a.width(), a.array() + b.array());
}

template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a, b, "subtract");
  return Tensor<Scalar>(a.height(), a.width(), a.array() - b.array());
}

template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a) {
  return Tensor<Scalar>(a.height(), a.width(), -a.array());
}

template <typename Scalar>
Tensor<Scalar> operator*(Scalar s, const Tensor<Scalar>& a) {
  return Tensor<Scalar>(a.height(), a.width(), s * a.array());
}

template <typename Scalar>
Tensor<Scalar> hadamard(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_shape(a, b, "hadamard");
  return Tensor<Scalar>(a.height(), a.width(), a.array() * b.array());
}

template <typename Scalar>
Tensor<Scalar> clamp01(const Tensor<Scalar>& a) {
  return Tensor<Scalar>(a.height(), a.width(), a.array().max(Scalar(0)).min(Scalar(1)));
}

template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_same_spatial(a, b, "concat_channels");
  typename Tensor<Scalar>::Storage out(a.pixels(), a.channels() + b.channels());
  out.leftCols(a.channels()) = a.array();
  out.rightCols(b.channels()) = b.array();
  return Tensor<Scalar>(a.height(), a.width(), std::move(out));
}

// ---------------------------------------------------------------------------
// Convolution

/// Cross-correlation layer. The kernel is stored as a (K_h*K_w*C_in) x C_out
/// row-major matrix so that im2col patches multiply it directly; the row of
/// tap (ky, kx, ci) is (ky * K_w + kx) * C_in + ci.
template <typename Scalar>
struct ConvSpec {
  int kernel_h = 1;
  int kernel_w = 1;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  int padding = 0;
  RowMatrix<Scalar> kernel;
  RowVector<Scalar> bias;

  static ConvSpec zeros(int kernel_h, int kernel_w, int in_channels, int out_channels, int padding,
                        int stride = 1) {
    ConvSpec spec;
    spec.kernel_h = kernel_h;
    spec.kernel_w = kernel_w;
    spec.in_channels = in_channels;
    spec.out_channels = out_channels;
    spec.stride = stride;
    spec.padding = padding;
    spec.kernel = RowMatrix<Scalar>::Zero(kernel_h * kernel_w * in_channels, out_channels);
    spec.bias = RowVector<Scalar>::Zero(out_channels);
    spec.validate();
    return spec;
  }

  /// Same-size convolution (odd kernel, padding = k / 2).
  static ConvSpec same(int kernel, int in_channels, int out_channels) {
    return zeros(kernel, kernel, in_channels, out_channels, kernel / 2);
  }

  Scalar& weight(int ky, int kx, int ci, int co) { return kernel((ky * kernel_w + kx) * in_channels + ci, co); }
  Scalar weight(int ky, int kx, int ci, int co) const {
    return kernel((ky * kernel_w + kx) * in_channels + ci, co);
  }

  int output_height(int in) const { return (in + 2 * padding - kernel_h) / stride + 1; }
  int output_width(int in) const { return (in + 2 * padding - kernel_w) / stride + 1; }

  void validate() const {
    if (kernel_h <= 0 || kernel_w <= 0 || kernel_h % 2 == 0 || kernel_w % 2 == 0) {
      throw ConfigError("conv kernel sizes must be odd and positive");
    }
    if (stride <= 0 || padding < 0 || in_channels <= 0 || out_channels <= 0) {
      throw ConfigError("conv stride, padding and channel counts must be positive");
    }
    if (kernel.rows() != kernel_h * kernel_w * in_channels || kernel.cols() != out_channels ||
        bias.size() != out_channels) {
      throw ConfigError("conv weight arrays do not match the declared shape");
    }
  }
};

/// Patch matrix for `spec`'s geometry: one row per output pixel, one column
/// per (ky, kx, ci) tap, zero outside the input.
template <typename Scalar>
RowMatrix<Scalar> im2col(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec) {
  const int out_h = spec.output_height(x.height());
  const int out_w = spec.output_width(x.width());
  const int c = x.channels();
  RowMatrix<Scalar> cols = RowMatrix<Scalar>::Zero(static_cast<Eigen::Index>(out_h) * out_w,
                                                   spec.kernel_h * spec.kernel_w * c);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      Scalar* row = cols.data() + (static_cast<Eigen::Index>(oy) * out_w + ox) * cols.cols();
      for (int ky = 0; ky < spec.kernel_h; ++ky) {
        const int iy = oy * spec.stride + ky - spec.padding;
        if (iy < 0 || iy >= x.height()) continue;
        for (int kx = 0; kx < spec.kernel_w; ++kx) {
          const int ix = ox * spec.stride + kx - spec.padding;
          if (ix < 0 || ix >= x.width()) continue;
          const Scalar* src = x.data() + (static_cast<Eigen::Index>(iy) * x.width() + ix) * c;
          std::copy(src, src + c, row + (ky * spec.kernel_w + kx) * c);
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatters patch-matrix rows back onto an H x W x C grid.
template <typename Scalar>
Tensor<Scalar> col2im(const RowMatrix<Scalar>& cols, int height, int width, int channels,
                      const ConvSpec<Scalar>& spec) {
  const int out_h = spec.output_height(height);
  const int out_w = spec.output_width(width);
  Tensor<Scalar> x(height, width, channels);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const Scalar* row = cols.data() + (static_cast<Eigen::Index>(oy) * out_w + ox) * cols.cols();
      for (int ky = 0; ky < spec.kernel_h; ++ky) {
        const int iy = oy * spec.stride + ky - spec.padding;
        if (iy < 0 || iy >= height) continue;
        for (int kx = 0; kx < spec.kernel_w; ++kx) {
          const int ix = ox * spec.stride + kx - spec.padding;
          if (ix < 0 || ix >= width) continue;
          Scalar* dst = x.data() + (static_cast<Eigen::Index>(iy) * width + ix) * channels;
          const Scalar* src = row + (ky * spec.kernel_w + kx) * channels;
          for (int c = 0; c < channels; ++c) dst[c] += src[c];
        }
      }
    }
  }
  return x;
}

template <typename Scalar>
bool is_pointwise(const ConvSpec<Scalar>& spec) {
  return spec.kernel_h == 1 && spec.kernel_w == 1 && spec.stride == 1 && spec.padding == 0;
}

/// Convolution without bias, restricted to kernel rows [row_offset, row_offset
/// + x.channels() * taps). Lets a layer consume a channel concatenation piece
/// by piece; only used for 1x1 kernels where those rows are contiguous.
template <typename Scalar>
RowMatrix<Scalar> conv2d_partial(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec, int channel_offset) {
  if (!is_pointwise(spec)) {
    throw ConfigError("partial convolution requires a 1x1 stride-1 kernel");
  }
  if (channel_offset < 0 || channel_offset + x.channels() > spec.in_channels) {
    throw ConfigError("partial convolution channel range exceeds the kernel");
  }
  return x.matrix() * spec.kernel.middleRows(channel_offset, x.channels());
}

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const ConvSpec<Scalar>& spec) {
  spec.validate();
  if (x.channels() != spec.in_channels) {
    throw ConfigError("conv2d: input has " + std::to_string(x.channels()) + " channels, kernel expects " +
                      std::to_string(spec.in_channels));
  }
  const int out_h = spec.output_height(x.height());
  const int out_w = spec.output_width(x.width());
  if (out_h < 1 || out_w < 1) throw SizeError("conv2d: input smaller than kernel");
  RowMatrix<Scalar> out;
  if (is_pointwise(spec)) {
    out = x.matrix() * spec.kernel;
  } else {
    out = im2col(x, spec) * spec.kernel;
  }
  out.rowwise() += spec.bias;
  return Tensor<Scalar>(out_h, out_w, std::move(out).array());
}

/// 1x1 convolution of the channel concatenation of `parts`, evaluated as a
/// sum of per-part products (summed in order) plus bias.
template <typename Scalar>
Tensor<Scalar> conv2d_concat(const std::vector<const Tensor<Scalar>*>& parts, const ConvSpec<Scalar>& spec) {
  spec.validate();
  if (parts.empty()) throw ConfigError("conv2d_concat: no inputs");
  int offset = 0;
  RowMatrix<Scalar> acc;
  for (const Tensor<Scalar>* part : parts) {
    require_same_spatial(*parts.front(), *part, "conv2d_concat");
    RowMatrix<Scalar> partial = conv2d_partial(*part, spec, offset);
    if (offset == 0) {
      acc = std::move(partial);
    } else {
      acc += partial;
    }
    offset += part->channels();
  }
  if (offset != spec.in_channels) {
    throw ConfigError("conv2d_concat: inputs supply " + std::to_string(offset) + " channels, kernel expects " +
                      std::to_string(spec.in_channels));
  }
  acc.rowwise() += spec.bias;
  return Tensor<Scalar>(parts.front()->height(), parts.front()->width(), std::move(acc).array());
}

// ---------------------------------------------------------------------------
// Activations

template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& x, Scalar slope) {
  return Tensor<Scalar>(x.height(), x.width(), (x.array() >= Scalar(0)).select(x.array(), slope * x.array()));
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.height(), x.width(), Scalar(1) / (Scalar(1) + (-x.array()).exp()));
}

struct Activation {
  enum class Kind { LeakyRelu, Sigmoid };
  Kind kind = Kind::LeakyRelu;
  double slope = 0.1;

  static Activation leaky(double slope) { return {Kind::LeakyRelu, slope}; }
  static Activation logistic() { return {Kind::Sigmoid, 0.0}; }
};

template <typename Scalar>
Tensor<Scalar> activation(const Tensor<Scalar>& x, Activation act) {
  return act.kind == Activation::Kind::Sigmoid ? sigmoid(x) : leaky_relu(x, static_cast<Scalar>(act.slope));
}

// ---------------------------------------------------------------------------
// Sub-pixel rearrangement

template <typename Scalar>
Tensor<Scalar> pixel_shuffle(const Tensor<Scalar>& x, int r) {
  if (r < 1 || x.channels() % (r * r) != 0) {
    throw ConfigError("pixel_shuffle: channels " + std::to_string(x.channels()) + " not divisible by r^2 = " +
                      std::to_string(r * r));
  }
  const int out_c = x.channels() / (r * r);
  Tensor<Scalar> out(x.height() * r, x.width() * r, out_c);
  for (int y = 0; y < out.height(); ++y) {
    for (int xx = 0; xx < out.width(); ++xx) {
      const int sub = (y % r) * r + (xx % r);
      for (int c = 0; c < out_c; ++c) out(y, xx, c) = x(y / r, xx / r, c * r * r + sub);
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> pixel_unshuffle(const Tensor<Scalar>& x, int r) {
  if (r < 1 || x.height() % r != 0 || x.width() % r != 0) {
    throw ConfigError("pixel_unshuffle: spatial dims not divisible by r");
  }
  const int in_c = x.channels();
  Tensor<Scalar> out(x.height() / r, x.width() / r, in_c * r * r);
  for (int y = 0; y < x.height(); ++y) {
    for (int xx = 0; xx < x.width(); ++xx) {
      const int sub = (y % r) * r + (xx % r);
      for (int c = 0; c < in_c; ++c) out(y / r, xx / r, c * r * r + sub) = x(y, xx, c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

/// Bilinear interpolation weights of one (possibly out-of-range) position,
/// after clamping it into the pixel grid.
struct BilinearTap {
  int x0, x1, y0, y1;
  double fx, fy;
};

inline BilinearTap bilinear_tap(double px, double py, int width, int height) {
  px = std::clamp(px, 0.0, static_cast<double>(width - 1));
  py = std::clamp(py, 0.0, static_cast<double>(height - 1));
  BilinearTap tap;
  tap.x0 = static_cast<int>(std::floor(px));
  tap.y0 = static_cast<int>(std::floor(py));
  tap.x1 = std::min(tap.x0 + 1, width - 1);
  tap.y1 = std::min(tap.y0 + 1, height - 1);
  tap.fx = px - tap.x0;
  tap.fy = py - tap.y0;
  return tap;
}

/// Samples `x` at absolute positions: coords(y, x, 0) is the column, coords(y,
/// x, 1) the row. Positions outside the grid are clamped to the border.
template <typename Scalar>
Tensor<Scalar> bilinear_sample(const Tensor<Scalar>& x, const Tensor<Scalar>& coords) {
  if (coords.channels() != 2) throw ShapeError("bilinear_sample: coords need 2 channels");
  if (x.empty()) throw SizeError("bilinear_sample: empty source");
  const int c = x.channels();
  Tensor<Scalar> out(coords.height(), coords.width(), c);
  for (int y = 0; y < coords.height(); ++y) {
    for (int xx = 0; xx < coords.width(); ++xx) {
      const BilinearTap tap = bilinear_tap(static_cast<double>(coords(y, xx, 0)),
                                           static_cast<double>(coords(y, xx, 1)), x.width(), x.height());
      const Scalar fx = static_cast<Scalar>(tap.fx);
      const Scalar fy = static_cast<Scalar>(tap.fy);
      for (int ch = 0; ch < c; ++ch) {
        const Scalar top = (Scalar(1) - fx) * x(tap.y0, tap.x0, ch) + fx * x(tap.y0, tap.x1, ch);
        const Scalar bottom = (Scalar(1) - fx) * x(tap.y1, tap.x0, ch) + fx * x(tap.y1, tap.x1, ch);
        out(y, xx, ch) = (Scalar(1) - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

/// Absolute pixel-centre coordinates (column, row) of an H x W grid.
template <typename Scalar>
Tensor<Scalar> identity_coords(int height, int width) {
  Tensor<Scalar> coords(height, width, 2);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      coords(y, x, 0) = static_cast<Scalar>(x);
      coords(y, x, 1) = static_cast<Scalar>(y);
    }
  }
  return coords;
}

// ---------------------------------------------------------------------------
// Bicubic resampling

struct Rational {
  int num = 1;
  int den = 1;
  double value() const { return static_cast<double>(num) / den; }
};

/// Catmull-Rom cubic convolution kernel (a = -0.5).
inline double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double ax = std::abs(x);
  if (ax <= 1.0) return (a + 2.0) * ax * ax * ax - (a + 3.0) * ax * ax + 1.0;
  if (ax < 2.0) return a * ax * ax * ax - 5.0 * a * ax * ax + 8.0 * a * ax - 4.0 * a;
  return 0.0;
}

namespace detail {

struct ResampleTaps {
  std::vector<std::vector<std::pair<int, double>>> taps;  // per output index
};

/// Per-output-index source taps for one axis. Downscaling widens the kernel by
/// 1/scale (antialiasing); taps are clamped to the border and normalised.
inline ResampleTaps resample_taps(int in_size, int out_size, double scale) {
  ResampleTaps result;
  result.taps.resize(out_size);
  const double kernel_scale = scale < 1.0 ? scale : 1.0;
  const double support = 2.0 / kernel_scale;
  for (int o = 0; o < out_size; ++o) {
    const double center = (o + 0.5) / scale - 0.5;
    const int first = static_cast<int>(std::floor(center - support));
    const int last = static_cast<int>(std::ceil(center + support));
    double total = 0.0;
    auto& taps = result.taps[o];
    for (int i = first; i <= last; ++i) {
      const double w = cubic_kernel((center - i) * kernel_scale);
      if (w == 0.0) continue;
      taps.emplace_back(std::clamp(i, 0, in_size - 1), w);
      total += w;
    }
    for (auto& tap : taps) tap.second /= total;
  }
  return result;
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> bicubic_resize(const Tensor<Scalar>& x, Rational scale) {
  if (scale.num <= 0 || scale.den <= 0) throw ParameterError("bicubic_resize: scale must be positive");
  const double s = scale.value();
  const auto out_dim = [&](int in) {
    return static_cast<int>(std::ceil(static_cast<double>(in) * scale.num / scale.den - 1e-9));
  };
  const int out_h = out_dim(x.height());
  const int out_w = out_dim(x.width());
  if (out_h < 1 || out_w < 1) throw SizeError("bicubic_resize: output would be empty");
  const int c = x.channels();

  const auto rows = detail::resample_taps(x.height(), out_h, s);
  const auto cols = detail::resample_taps(x.width(), out_w, s);

  Tensor<Scalar> vertical(out_h, x.width(), c);
  for (int oy = 0; oy < out_h; ++oy) {
    for (const auto& [iy, w] : rows.taps[oy]) {
      vertical.array().middleRows(static_cast<Eigen::Index>(oy) * x.width(), x.width()) +=
          static_cast<Scalar>(w) * x.array().middleRows(static_cast<Eigen::Index>(iy) * x.width(), x.width());
    }
  }
  Tensor<Scalar> out(out_h, out_w, c);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      for (const auto& [ix, w] : cols.taps[ox]) {
        for (int ch = 0; ch < c; ++ch) out(oy, ox, ch) += static_cast<Scalar>(w) * vertical(oy, ix, ch);
      }
    }
  }
  return out;
}

/// BT.601 luma of a 3-channel image.
template <typename Scalar>
Tensor<Scalar> luma(const Tensor<Scalar>& rgb) {
  if (rgb.channels() == 1) return rgb;
  if (rgb.channels() != 3) throw ConfigError("luma: expected 1 or 3 channels");
  Tensor<Scalar> out(rgb.height(), rgb.width(), 1);
  out.array().col(0) = Scalar(0.299) * rgb.array().col(0) + Scalar(0.587) * rgb.array().col(1) +
                       Scalar(0.114) * rgb.array().col(2);
  return out;
}

}  // namespace ofr
