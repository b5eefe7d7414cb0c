#include "wmtrace/spread.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "wmtrace/error.hpp"

namespace wmtrace::spread {
namespace {

constexpr int kMinTiles = kSegments * kMinChipsPerSegment;

Plane tile_means(const Plane& plane, const ChipLayout& layout) {
  Plane means(layout.tiles_x, layout.tiles_y);
  const double inv = 1.0 / (layout.chip * layout.chip);
  for (int ty = 0; ty < layout.tiles_y; ++ty) {
    for (int tx = 0; tx < layout.tiles_x; ++tx) {
      double acc = 0.0;
      for (int y = 0; y < layout.chip; ++y)
        for (int x = 0; x < layout.chip; ++x) acc += plane.at(tx * layout.chip + x, ty * layout.chip + y);
      means.at(tx, ty) = acc * inv;
    }
  }
  return means;
}

// m - box3x3(m), edges replicated.
Plane local_highpass(const Plane& m) {
  Plane out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = std::clamp(y + dy, 0, m.height - 1);
        for (int dx = -1; dx <= 1; ++dx) acc += m.at(std::clamp(x + dx, 0, m.width - 1), yy);
      }
      out.at(x, y) = m.at(x, y) - acc / 9.0;
    }
  }
  return out;
}

Detection finish(std::vector<double> stats, const Fingerprint32& expected, double threshold) {
  std::array<bool, kSegments> bits{};
  for (int i = 0; i < kSegments; ++i) bits[i] = stats[i] > 0.0;
  Detection d;
  d.recovered = Fingerprint32::from_bits(bits);
  d.match = fingerprint_match(d.recovered, expected, threshold);
  d.statistics = std::move(stats);
  return d;
}

}  // namespace

void SpreadParams::validate() const {
  if (!(strength >= 0.0) || !std::isfinite(strength)) {
    throw Error(ErrorCode::InvalidArgument, "spread strength must be finite and non-negative");
  }
  if (!(corr_threshold > 0.0 && corr_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "correlation threshold must be in (0, 1]");
  }
  if (ss_max_chip < 1 || dwtss_max_chip < 1) throw Error(ErrorCode::InvalidArgument, "chip size must be >= 1");
}

ChipLayout chip_layout(int width, int height, int max_chip) {
  for (int chip = std::max(max_chip, 1); chip >= 1; chip /= 2) {
    const int tx = width / chip;
    const int ty = height / chip;
    if (static_cast<long long>(tx) * ty >= kMinTiles) {
      return ChipLayout{chip, tx, ty, tx * ty / kSegments};
    }
  }
  throw Error(ErrorCode::CarrierTooSmall, "spread carrier " + std::to_string(width) + "x" + std::to_string(height) +
                                              " has fewer than " + std::to_string(kMinTiles) + " samples");
}

void modulate(Plane& plane, const Fingerprint32& fp, double strength, std::uint64_t seed, int max_chip) {
  const ChipLayout layout = chip_layout(plane.width, plane.height, max_chip);
  const std::size_t used = static_cast<std::size_t>(layout.tiles_per_segment) * kSegments;
  const auto prn = signal::prn_generate(seed, used);
  for (std::size_t j = 0; j < used; ++j) {
    const int segment = static_cast<int>(j / layout.tiles_per_segment);
    const double delta = fp.bipolar(segment) * strength * prn[j];
    const int tx = static_cast<int>(j % layout.tiles_x);
    const int ty = static_cast<int>(j / layout.tiles_x);
    for (int y = 0; y < layout.chip; ++y)
      for (int x = 0; x < layout.chip; ++x) plane.at(tx * layout.chip + x, ty * layout.chip + y) += delta;
  }
}

std::vector<double> correlate(const Plane& plane, std::uint64_t seed, int max_chip) {
  const ChipLayout layout = chip_layout(plane.width, plane.height, max_chip);
  const Plane residual = local_highpass(tile_means(plane, layout));
  const std::size_t n = static_cast<std::size_t>(layout.tiles_per_segment);
  const auto prn = signal::prn_generate(seed, n * kSegments);
  std::vector<double> stats(kSegments);
  for (int i = 0; i < kSegments; ++i) {
    const std::size_t begin = i * n;
    double mean = 0.0;
    for (std::size_t j = begin; j < begin + n; ++j) mean += residual.values[j];
    mean /= static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t j = begin; j < begin + n; ++j) acc += (residual.values[j] - mean) * prn[j];
    stats[i] = acc / static_cast<double>(n);
  }
  return stats;
}

Raster encode_ss(const Raster& img, const Fingerprint32& fp, const SpreadParams& params) {
  params.validate();
  Plane blue = signal::channel_plane(img, Channel::Blue);
  modulate(blue, fp, params.strength, params.prn_seed, params.ss_max_chip);
  Raster out = img;
  signal::store_channel(out, Channel::Blue, blue);
  return out;
}

Detection detect_ss(const Raster& img, const Fingerprint32& expected, const SpreadParams& params) {
  params.validate();
  return finish(correlate(signal::channel_plane(img, Channel::Blue), params.prn_seed, params.ss_max_chip), expected,
                params.corr_threshold);
}

Raster encode_dwtss(const Raster& img, const Fingerprint32& fp, const SpreadParams& params) {
  params.validate();
  Plane blue = signal::channel_plane(img, Channel::Blue);
  HaarBands bands = signal::haar_dwt_forward(blue);
  modulate(bands.ll, fp, params.strength, params.prn_seed, params.dwtss_max_chip);
  signal::haar_dwt_inverse_into(bands, blue);
  Raster out = img;
  signal::store_channel(out, Channel::Blue, blue);
  return out;
}

Detection detect_dwtss(const Raster& img, const Fingerprint32& expected, const SpreadParams& params) {
  params.validate();
  const HaarBands bands = signal::haar_dwt_forward(signal::channel_plane(img, Channel::Blue));
  return finish(correlate(bands.ll, params.prn_seed, params.dwtss_max_chip), expected, params.corr_threshold);
}

}  // namespace wmtrace::spread
