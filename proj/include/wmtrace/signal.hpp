#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace wmtrace {

/// 8-bit RGB raster, row-major, interleaved R,G,B.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Raster() = default;
  Raster(int w, int h, std::uint8_t fill = 0);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::uint8_t& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  bool operator==(const Raster&) const = default;
};

enum class Channel : int { Red = 0, Green = 1, Blue = 2 };

/// Row-major grid of double samples (one channel, or transform coefficients).
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0);

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }
};

struct HaarBands {
  Plane ll, lh, hl, hh;
};

namespace signal {

inline constexpr int kBlock = 8;

Plane channel_plane(const Raster& img, Channel ch);
// Quantizes `plane` with to_raster and writes it into channel `ch` of `img`.
void store_channel(Raster& img, Channel ch, const Plane& plane);

// Orthonormal type-II DCT on every full 8x8 block; trailing partial blocks
// are copied through.
Plane block_dct_forward(const Plane& plane);
Plane block_dct_inverse(const Plane& coeffs);

// DCT of one 8x8 block in place (row-major, 64 values).
void dct8x8_forward(std::span<double, 64> block);
void dct8x8_inverse(std::span<double, 64> block);

// One-level orthonormal Haar. For a 2x2 block [[a,b],[c,d]]:
//   LL = (a+b+c+d)/2, LH = (a-b+c-d)/2, HL = (a+b-c-d)/2, HH = (a-b-c+d)/2.
// An odd trailing row/column is not decomposed; haar_dwt_inverse cannot
// restore it, so callers that need it use haar_dwt_inverse_into.
HaarBands haar_dwt_forward(const Plane& plane);
Plane haar_dwt_inverse(const HaarBands& bands);
// Reconstructs into `target`, leaving any odd trailing row/column as is.
void haar_dwt_inverse_into(const HaarBands& bands, Plane& target);

// Bipolar (+1/-1) keyed sequence. SplitMix64 state update; an output word
// with its top bit set maps to -1, otherwise +1.
std::vector<std::int8_t> prn_generate(std::uint64_t seed, std::size_t length);

// Round half away from zero, clamp to [0, 255].
std::uint8_t to_sample(double v);
std::vector<std::uint8_t> to_raster(const Plane& plane);

}  // namespace signal
}  // namespace wmtrace
