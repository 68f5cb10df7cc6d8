#pragma once

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "patchfer/error.hpp"
#include "patchfer/image.hpp"

namespace patchfer::phog {

/// Unsigned gradients; orientation is in degrees, [0, 180).
struct GradientField {
  RealImage gx;
  RealImage gy;
  RealImage magnitude;
  RealImage orientation;

  int width() const { return gx.width(); }
  int height() const { return gx.height(); }
};

inline double fold_orientation(double gx, double gy) {
  double deg = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
  if (deg < 0.0) deg += 180.0;
  if (deg >= 180.0) deg -= 180.0;
  return deg;
}

/// Builds a field from explicit gradient components.
inline GradientField field_from_components(RealImage gx, RealImage gy) {
  if (gx.width() != gy.width() || gx.height() != gy.height()) {
    throw InvalidArgument("gradient component rasters differ in size");
  }
  RealImage mag(gx.width(), gx.height());
  RealImage ori(gx.width(), gx.height());
  for (int y = 0; y < gx.height(); ++y) {
    for (int x = 0; x < gx.width(); ++x) {
      mag(x, y) = std::hypot(gx(x, y), gy(x, y));
      ori(x, y) = fold_orientation(gx(x, y), gy(x, y));
    }
  }
  return {std::move(gx), std::move(gy), std::move(mag), std::move(ori)};
}

/// Central differences with replicated borders, taken at every pixel.
template <class T>
GradientField compute_gradients(const Raster<T>& patch) {
  if (patch.width() < 3 || patch.height() < 3) {
    throw InvalidArgument("gradient computation needs at least a 3x3 patch");
  }
  RealImage gx(patch.width(), patch.height());
  RealImage gy(patch.width(), patch.height());
  for (int y = 0; y < patch.height(); ++y) {
    for (int x = 0; x < patch.width(); ++x) {
      gx(x, y) = (double(patch.clamped(x + 1, y)) - double(patch.clamped(x - 1, y))) / 2.0;
      gy(x, y) = (double(patch.clamped(x, y + 1)) - double(patch.clamped(x, y - 1))) / 2.0;
    }
  }
  return field_from_components(std::move(gx), std::move(gy));
}

struct Cell {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

inline int orientation_bin(double degrees, int n_bins) {
  const double width = 180.0 / n_bins;
  const int b = static_cast<int>(std::floor(degrees / width));
  if (b >= n_bins) return 0;  // exactly 180 wraps
  return b < 0 ? 0 : b;
}

/// Magnitude-weighted hard-assignment orientation histogram over one cell.
inline std::vector<double> cell_histogram(const GradientField& field, const Cell& cell, int n_bins) {
  if (n_bins < 2) throw InvalidArgument("orientation histogram needs at least 2 bins");
  if (cell.x < 0 || cell.y < 0 || cell.width < 1 || cell.height < 1 || cell.x + cell.width > field.width() ||
      cell.y + cell.height > field.height()) {
    throw InvalidArgument("cell lies outside the gradient field");
  }
  std::vector<double> hist(std::size_t(n_bins), 0.0);
  for (int y = cell.y; y < cell.y + cell.height; ++y) {
    for (int x = cell.x; x < cell.x + cell.width; ++x) {
      hist[std::size_t(orientation_bin(field.orientation(x, y), n_bins))] += field.magnitude(x, y);
    }
  }
  return hist;
}

inline std::size_t descriptor_length(int n_bins, int levels) {
  std::size_t cells = 0;
  for (int l = 0; l < levels; ++l) cells += std::size_t(1) << (2 * l);
  return std::size_t(n_bins) * cells;
}

/// Level l splits the field into 2^l x 2^l equal cells, visited row-major;
/// levels are concatenated coarse to fine and the whole vector is L1-normalized.
inline std::vector<double> descriptor_from_field(const GradientField& field, int n_bins = 9, int levels = 3) {
  if (levels < 1) throw InvalidArgument("pyramid needs at least one level");
  if (n_bins < 2) throw InvalidArgument("orientation histogram needs at least 2 bins");
  const int finest = 1 << (levels - 1);
  if (field.width() % finest != 0 || field.height() % finest != 0) {
    throw InvalidArgument("patch size " + std::to_string(field.width()) + "x" + std::to_string(field.height()) +
                          " is not divisible by the finest pyramid grid " + std::to_string(finest));
  }
  std::vector<double> values;
  values.reserve(descriptor_length(n_bins, levels));
  for (int l = 0; l < levels; ++l) {
    const int grid = 1 << l;
    const int cw = field.width() / grid;
    const int ch = field.height() / grid;
    for (int gy = 0; gy < grid; ++gy) {
      for (int gx = 0; gx < grid; ++gx) {
        const auto h = cell_histogram(field, {gx * cw, gy * ch, cw, ch}, n_bins);
        values.insert(values.end(), h.begin(), h.end());
      }
    }
  }
  const double sum = std::accumulate(values.begin(), values.end(), 0.0);
  if (sum > 0.0) {
    for (double& v : values) v /= sum;
  }
  return values;
}

template <class T>
std::vector<double> descriptor(const Raster<T>& patch, int n_bins = 9, int levels = 3) {
  if (levels < 1) throw InvalidArgument("pyramid needs at least one level");
  const int finest = 1 << (levels - 1);
  if (patch.width() % finest != 0 || patch.height() % finest != 0) {
    throw InvalidArgument("patch side is not divisible by the finest pyramid grid");
  }
  return descriptor_from_field(compute_gradients(patch), n_bins, levels);
}

}  // namespace patchfer::phog
