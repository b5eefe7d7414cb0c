#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "wmtrace/signal.hpp"

namespace wmtrace::testkit {

// Natural-looking test raster: correlated multi-octave value noise per
// channel, a few hard-edged discs and mild sensor noise. Deterministic in
// (width, height, seed) on every platform.
Raster synth_image(int width, int height, std::uint64_t seed);

// Sizes cycled by the desk corpus; every one is at least 256x256.
const std::vector<std::pair<int, int>>& corpus_sizes();

// Writes `count` images (alternating .png/.bmp) to `dir`, returns their paths.
std::vector<std::filesystem::path> write_corpus(const std::filesystem::path& dir, int count, std::uint64_t seed);

}  // namespace wmtrace::testkit
