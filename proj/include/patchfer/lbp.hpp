#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <vector>

#include "patchfer/error.hpp"
#include "patchfer/image.hpp"

namespace patchfer::lbp {

/// 3x3 intensities, row-major (top-left first).
using Neighborhood = std::array<std::uint8_t, 9>;

/// Neighbour n sits at (dx, dy) relative to the centre; n = 0 is East and the
/// walk proceeds counter-clockwise (image y axis points down, so North is dy = -1).
inline constexpr std::array<std::array<int, 2>, 8> kOffsets{{
    {+1, 0}, {+1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, +1}, {0, +1}, {+1, +1},
}};

/// Sum over n of s(i_n - i_c) * 2^n, with s(x) = 1 iff x >= 0.
inline std::uint8_t code(const Neighborhood& nb) {
  const int center = nb[4];
  unsigned value = 0;
  for (unsigned n = 0; n < 8; ++n) {
    const auto [dx, dy] = kOffsets[n];
    if (int(nb[std::size_t((1 + dy) * 3 + (1 + dx))]) >= center) value |= 1u << n;
  }
  return static_cast<std::uint8_t>(value);
}

/// Codes for interior pixels only; the result is (w-2) x (h-2).
using LbpImage = Raster<std::uint8_t>;

inline LbpImage image(const GrayImage& img) {
  if (img.width() < 3 || img.height() < 3) {
    throw InvalidArgument("LBP needs an image of at least 3x3 pixels");
  }
  LbpImage out(img.width() - 2, img.height() - 2);
  for (int y = 1; y + 1 < img.height(); ++y) {
    for (int x = 1; x + 1 < img.width(); ++x) {
      const int c = img(x, y);
      unsigned value = 0;
      for (unsigned n = 0; n < 8; ++n) {
        if (int(img(x + kOffsets[n][0], y + kOffsets[n][1])) >= c) value |= 1u << n;
      }
      out(x - 1, y - 1) = static_cast<std::uint8_t>(value);
    }
  }
  return out;
}

struct Histogram {
  std::vector<std::uint32_t> bins;

  std::size_t n_bins() const { return bins.size(); }
  std::uint64_t total() const { return std::accumulate(bins.begin(), bins.end(), std::uint64_t{0}); }
};

inline bool supported_bin_count(int n_bins) {
  return n_bins == 256 || n_bins == 128 || n_bins == 64 || n_bins == 32 || n_bins == 16;
}

/// Bin j collects codes in [j*w, (j+1)*w - 1], w = 256 / n_bins.
inline Histogram histogram(const LbpImage& codes, int n_bins = 64) {
  if (!supported_bin_count(n_bins)) {
    throw InvalidArgument("LBP histogram bins must be one of 256/128/64/32/16, got " + std::to_string(n_bins));
  }
  const unsigned width = 256u / unsigned(n_bins);
  Histogram h{std::vector<std::uint32_t>(std::size_t(n_bins), 0)};
  for (std::uint8_t c : codes.pixels()) ++h.bins[c / width];
  return h;
}

}  // namespace patchfer::lbp
