#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "wmtrace/signal.hpp"

namespace wmtrace::io {

// Loads PNG/JPEG/BMP; grayscale and alpha inputs are converted to RGB.
Raster load_image(const std::filesystem::path& path);
// Format follows the extension (.png, .bmp, .jpg/.jpeg).
void save_image(const Raster& img, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_jpeg(const Raster& img, int quality);
Raster decode_image(std::span<const std::uint8_t> bytes);

bool is_image_file(const std::filesystem::path& path);

}  // namespace wmtrace::io
