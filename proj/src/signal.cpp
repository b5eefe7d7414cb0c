#include "wmtrace/signal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "wmtrace/error.hpp"

namespace wmtrace {

Raster::Raster(int w, int h, std::uint8_t fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

Plane::Plane(int w, int h, double fill)
    : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

namespace signal {
namespace {

using Basis = std::array<std::array<double, kBlock>, kBlock>;

// basis[u][x] = C(u) * cos((2x+1) u pi / 16)
const Basis& dct_basis() {
  static const Basis basis = [] {
    Basis b{};
    for (int u = 0; u < kBlock; ++u) {
      const double cu = u == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
      for (int x = 0; x < kBlock; ++x) {
        b[u][x] = cu * std::cos((2 * x + 1) * u * std::numbers::pi / (2.0 * kBlock));
      }
    }
    return b;
  }();
  return basis;
}

template <bool Forward>
void separable_8x8(std::span<double, 64> block) {
  const Basis& b = dct_basis();
  std::array<double, 64> tmp{};
  // rows
  for (int y = 0; y < kBlock; ++y) {
    for (int k = 0; k < kBlock; ++k) {
      double acc = 0.0;
      for (int n = 0; n < kBlock; ++n) {
        acc += (Forward ? b[k][n] : b[n][k]) * block[y * kBlock + n];
      }
      tmp[y * kBlock + k] = acc;
    }
  }
  // columns
  for (int x = 0; x < kBlock; ++x) {
    for (int k = 0; k < kBlock; ++k) {
      double acc = 0.0;
      for (int n = 0; n < kBlock; ++n) {
        acc += (Forward ? b[k][n] : b[n][k]) * tmp[n * kBlock + x];
      }
      block[k * kBlock + x] = acc;
    }
  }
}

template <bool Forward>
Plane block_transform(const Plane& in) {
  if (in.width < kBlock || in.height < kBlock) {
    throw Error(ErrorCode::CarrierTooSmall, "block DCT needs at least 8x8 samples");
  }
  if (in.values.size() != static_cast<std::size_t>(in.width) * in.height) {
    throw Error(ErrorCode::ShapeError, "plane storage does not match its dimensions");
  }
  Plane out = in;
  std::array<double, 64> block{};
  for (int by = 0; by + kBlock <= in.height; by += kBlock) {
    for (int bx = 0; bx + kBlock <= in.width; bx += kBlock) {
      for (int y = 0; y < kBlock; ++y)
        for (int x = 0; x < kBlock; ++x) block[y * kBlock + x] = in.at(bx + x, by + y);
      separable_8x8<Forward>(block);
      for (int y = 0; y < kBlock; ++y)
        for (int x = 0; x < kBlock; ++x) out.at(bx + x, by + y) = block[y * kBlock + x];
    }
  }
  return out;
}

}  // namespace

Plane channel_plane(const Raster& img, Channel ch) {
  Plane p(img.width, img.height);
  const int c = static_cast<int>(ch);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) p.values[i] = img.data[i * 3 + c];
  return p;
}

void store_channel(Raster& img, Channel ch, const Plane& plane) {
  if (plane.width != img.width || plane.height != img.height) {
    throw Error(ErrorCode::ShapeError, "channel plane does not match raster dimensions");
  }
  const int c = static_cast<int>(ch);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) img.data[i * 3 + c] = to_sample(plane.values[i]);
}

void dct8x8_forward(std::span<double, 64> block) { separable_8x8<true>(block); }
void dct8x8_inverse(std::span<double, 64> block) { separable_8x8<false>(block); }

Plane block_dct_forward(const Plane& plane) { return block_transform<true>(plane); }
Plane block_dct_inverse(const Plane& coeffs) { return block_transform<false>(coeffs); }

HaarBands haar_dwt_forward(const Plane& plane) {
  if (plane.width < 2 || plane.height < 2) {
    throw Error(ErrorCode::CarrierTooSmall, "Haar DWT needs at least 2x2 samples");
  }
  const int hw = plane.width / 2;
  const int hh = plane.height / 2;
  HaarBands bands{Plane(hw, hh), Plane(hw, hh), Plane(hw, hh), Plane(hw, hh)};
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < hw; ++x) {
      const double a = plane.at(2 * x, 2 * y);
      const double b = plane.at(2 * x + 1, 2 * y);
      const double c = plane.at(2 * x, 2 * y + 1);
      const double d = plane.at(2 * x + 1, 2 * y + 1);
      bands.ll.at(x, y) = (a + b + c + d) * 0.5;
      bands.lh.at(x, y) = (a - b + c - d) * 0.5;
      bands.hl.at(x, y) = (a + b - c - d) * 0.5;
      bands.hh.at(x, y) = (a - b - c + d) * 0.5;
    }
  }
  return bands;
}

void haar_dwt_inverse_into(const HaarBands& bands, Plane& target) {
  const int hw = bands.ll.width;
  const int hh = bands.ll.height;
  for (const Plane* p : {&bands.lh, &bands.hl, &bands.hh}) {
    if (p->width != hw || p->height != hh) {
      throw Error(ErrorCode::ShapeError, "Haar subbands differ in shape");
    }
  }
  if (target.width / 2 != hw || target.height / 2 != hh) {
    throw Error(ErrorCode::ShapeError, "Haar subbands do not match the target plane");
  }
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < hw; ++x) {
      const double ll = bands.ll.at(x, y);
      const double lh = bands.lh.at(x, y);
      const double hl = bands.hl.at(x, y);
      const double hhv = bands.hh.at(x, y);
      target.at(2 * x, 2 * y) = (ll + lh + hl + hhv) * 0.5;
      target.at(2 * x + 1, 2 * y) = (ll - lh + hl - hhv) * 0.5;
      target.at(2 * x, 2 * y + 1) = (ll + lh - hl - hhv) * 0.5;
      target.at(2 * x + 1, 2 * y + 1) = (ll - lh - hl + hhv) * 0.5;
    }
  }
}

Plane haar_dwt_inverse(const HaarBands& bands) {
  Plane out(bands.ll.width * 2, bands.ll.height * 2);
  haar_dwt_inverse_into(bands, out);
  return out;
}

std::vector<std::int8_t> prn_generate(std::uint64_t seed, std::size_t length) {
  if (length == 0) throw Error(ErrorCode::EmptyRequest, "PRN length must be positive");
  std::vector<std::int8_t> out(length);
  std::uint64_t state = seed;
  for (auto& v : out) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    v = (z >> 63) ? std::int8_t{-1} : std::int8_t{1};
  }
  return out;
}

std::uint8_t to_sample(double v) {
  const double r = std::round(v);  // half away from zero
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

std::vector<std::uint8_t> to_raster(const Plane& plane) {
  std::vector<std::uint8_t> out(plane.values.size());
  std::transform(plane.values.begin(), plane.values.end(), out.begin(), to_sample);
  return out;
}

}  // namespace signal
}  // namespace wmtrace
