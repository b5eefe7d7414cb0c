#pragma once

#include <cstdint>
#include <vector>

#include "wmtrace/payload.hpp"
#include "wmtrace/signal.hpp"

namespace wmtrace::spread {

inline constexpr int kSegments = 32;
inline constexpr int kMinChipsPerSegment = 64;

/// Embedding/detection parameters shared by spatial SS and DWT-SS.
///
/// The carrier is the blue channel (spatial) or its one-level Haar LL band
/// (DWT-SS). Each PRN chip covers a square tile of `chip` samples per side;
/// the tile grid is flattened row-major and split into 32 equal segments, one
/// per fingerprint bit. The chip edge starts at the configured maximum and is
/// halved until every segment holds at least 64 chips, so the layout depends
/// on the carrier dimensions only.
struct SpreadParams {
  double strength = 2.0;  // alpha, in sample (spatial) or coefficient (LL) units
  double corr_threshold = kDefaultCorrThreshold;
  std::uint64_t prn_seed = 0;
  int ss_max_chip = 4;
  int dwtss_max_chip = 2;

  void validate() const;
};

struct ChipLayout {
  int chip = 0;
  int tiles_x = 0;
  int tiles_y = 0;
  int tiles_per_segment = 0;
};

// Throws CarrierTooSmall when even single-sample chips cannot give 64 chips
// per segment.
ChipLayout chip_layout(int width, int height, int max_chip);

struct Detection {
  Fingerprint32 recovered;
  FingerprintMatch match;
  // Per-segment correlation statistic; its sign is the recovered bit.
  std::vector<double> statistics;
};

// Adds ±alpha chips to `plane` in place (no quantization).
void modulate(Plane& plane, const Fingerprint32& fp, double strength, std::uint64_t seed, int max_chip);
// Tile means, minus their 3x3 tile-neighbourhood mean, then per-segment
// mean-removed correlation against the PRN.
std::vector<double> correlate(const Plane& plane, std::uint64_t seed, int max_chip);

Raster encode_ss(const Raster& img, const Fingerprint32& fp, const SpreadParams& params);
Detection detect_ss(const Raster& img, const Fingerprint32& expected, const SpreadParams& params);

Raster encode_dwtss(const Raster& img, const Fingerprint32& fp, const SpreadParams& params);
Detection detect_dwtss(const Raster& img, const Fingerprint32& expected, const SpreadParams& params);

}  // namespace wmtrace::spread
