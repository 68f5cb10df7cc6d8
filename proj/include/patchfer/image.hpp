#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "patchfer/error.hpp"

namespace patchfer {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Point&, const Point&) = default;
};

inline Point midpoint(Point a, Point b) { return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; }

/// Row-major single-channel raster. `Raster<uint8_t>` is the image type the
/// whole pipeline runs on; `Raster<double>` is used where quantization would
/// get in the way (gradient checks, intermediate filtering).
template <class T>
class Raster {
public:
  using value_type = T;

  Raster() = default;

  Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw InvalidArgument("raster dimensions must be positive, got " + std::to_string(width) +
                            "x" + std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  Raster(int width, int height, std::vector<T> data) : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) {
      throw InvalidArgument("raster dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw InvalidArgument("raster data length does not match width*height");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  /// Edge-replicating access.
  const T& clamped(int x, int y) const {
    return (*this)(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GrayImage = Raster<std::uint8_t>;
using RealImage = Raster<double>;

inline std::uint8_t saturate_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

inline RealImage to_real(const GrayImage& img) {
  RealImage out(img.width(), img.height());
  std::ranges::transform(img.pixels(), out.pixels().begin(), [](std::uint8_t v) { return double(v); });
  return out;
}

/// 2x3 matrix [a b tx; c d ty] mapping source to destination coordinates.
struct AffineTransform {
  std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

  static AffineTransform identity() { return {}; }

  static AffineTransform translation(double tx, double ty) { return {{1.0, 0.0, tx, 0.0, 1.0, ty}}; }

  /// Counter-clockwise in a y-up frame, i.e. (1,0) -> (cos, sin).
  static AffineTransform rotation(double radians, Point about = {}) {
    const double c = std::cos(radians);
    const double s = std::sin(radians);
    return {{c, -s, about.x - c * about.x + s * about.y, s, c, about.y - s * about.x - c * about.y}};
  }

  double determinant() const { return m[0] * m[4] - m[1] * m[3]; }

  AffineTransform inverse() const {
    const double det = determinant();
    if (det == 0.0 || !std::isfinite(det)) {
      throw GeometryError("affine transform is not invertible");
    }
    const double ia = m[4] / det, ib = -m[1] / det;
    const double ic = -m[3] / det, id = m[0] / det;
    return {{ia, ib, -(ia * m[2] + ib * m[5]), ic, id, -(ic * m[2] + id * m[5])}};
  }
};

inline Point apply_transform(const AffineTransform& t, Point p) {
  return {t.m[0] * p.x + t.m[1] * p.y + t.m[2], t.m[3] * p.x + t.m[4] * p.y + t.m[5]};
}

/// Normalized 1-D Gaussian taps, length ksize, centred.
inline std::vector<double> gaussian_kernel(double sigma, int ksize) {
  if (!(sigma > 0.0)) {
    throw InvalidArgument("gaussian sigma must be positive");
  }
  if (ksize < 3 || ksize % 2 == 0) {
    throw InvalidArgument("gaussian ksize must be odd and >= 3, got " + std::to_string(ksize));
  }
  std::vector<double> taps(static_cast<std::size_t>(ksize));
  const int half = ksize / 2;
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + half)] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

/// Separable Gaussian low-pass with edge replication. The intermediate pass
/// is kept in double; rounding happens once at the end.
inline GrayImage gaussian_smooth(const GrayImage& img, double sigma = 1.0, int ksize = 5) {
  const auto taps = gaussian_kernel(sigma, ksize);
  if (ksize > std::min(img.width(), img.height())) {
    throw InvalidArgument("gaussian ksize exceeds image dimensions");
  }
  const int half = ksize / 2;
  const int w = img.width();
  const int h = img.height();

  RealImage horiz(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) acc += taps[std::size_t(k + half)] * img.clamped(x + k, y);
      horiz(x, y) = acc;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) acc += taps[std::size_t(k + half)] * horiz.clamped(x, y + k);
      out(x, y) = saturate_u8(acc);
    }
  }
  return out;
}

/// Bilinear sample at a sub-pixel position; positions outside the pixel-centre
/// hull [0, w-1] x [0, h-1] read as zero.
template <class T>
double sample_bilinear(const Raster<T>& img, double x, double y) {
  constexpr double slack = 1e-9;
  if (!(x >= -slack && y >= -slack && x <= img.width() - 1 + slack && y <= img.height() - 1 + slack)) {
    return 0.0;
  }
  x = std::clamp(x, 0.0, double(img.width() - 1));
  y = std::clamp(y, 0.0, double(img.height() - 1));
  const int x0 = std::min(static_cast<int>(x), img.width() - 1);
  const int y0 = std::min(static_cast<int>(y), img.height() - 1);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * img(x0, y0) + fx * img(x1, y0);
  const double bottom = (1.0 - fx) * img(x0, y1) + fx * img(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

/// Resamples `src` into a width x height raster; `t` maps source to destination.
inline GrayImage warp_affine(const GrayImage& src, const AffineTransform& t, int width, int height) {
  const AffineTransform inv = t.inverse();
  GrayImage out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Point s = apply_transform(inv, {double(x), double(y)});
      out(x, y) = saturate_u8(sample_bilinear(src, s.x, s.y));
    }
  }
  return out;
}

struct AlignedFace {
  GrayImage image;
  AffineTransform transform;
};

/// Canonical eye anchors as fractions of the output side.
inline constexpr Point kLeftEyeAnchor{0.30, 0.35};
inline constexpr Point kRightEyeAnchor{0.70, 0.35};

/// Similarity transform taking the eye pair onto the canonical anchors.
inline AffineTransform eye_alignment_transform(Point left_eye, Point right_eye, int out_size) {
  if (left_eye.x > right_eye.x) std::swap(left_eye, right_eye);
  if (left_eye == right_eye) {
    throw GeometryError("eye points coincide; alignment is undefined");
  }
  using C = std::complex<double>;
  const C s1(left_eye.x, left_eye.y), s2(right_eye.x, right_eye.y);
  const C d1(kLeftEyeAnchor.x * out_size, kLeftEyeAnchor.y * out_size);
  const C d2(kRightEyeAnchor.x * out_size, kRightEyeAnchor.y * out_size);
  const C a = (d2 - d1) / (s2 - s1);
  const C b = d1 - a * s1;
  return {{a.real(), -a.imag(), b.real(), a.imag(), a.real(), b.imag()}};
}

/// Rotates and scales the face so the eyes sit level at the canonical anchors
/// of an out_size x out_size raster. The applied transform is returned so
/// landmarks can follow the pixels.
inline AlignedFace align_face(const GrayImage& img, Point left_eye, Point right_eye, int out_size = 96) {
  if (out_size < 1) throw InvalidArgument("alignment output size must be positive");
  const AffineTransform t = eye_alignment_transform(left_eye, right_eye, out_size);
  return {warp_affine(img, t, out_size, out_size), t};
}

}  // namespace patchfer
