#include "wmtrace/bitlevel.hpp"

#include <array>
#include <cmath>
#include <string>

#include "wmtrace/error.hpp"

namespace wmtrace::bitlevel {
namespace {

constexpr int kBlue = static_cast<int>(Channel::Blue);
constexpr int kB = signal::kBlock;

void require_capacity(std::size_t have, std::size_t need, const char* scheme) {
  if (have < need) {
    throw Error(ErrorCode::CapacityError, std::string(scheme) + " capacity " + std::to_string(have) +
                                              " bits is below the " + std::to_string(need) + " required");
  }
}

long long quant_index(double coeff, double step) { return std::llround(coeff / step); }

void load_block(const Plane& p, int bx, int by, std::span<double, 64> block) {
  for (int y = 0; y < kB; ++y)
    for (int x = 0; x < kB; ++x) block[y * kB + x] = p.at(bx * kB + x, by * kB + y);
}

}  // namespace

BitStream bytes_to_bits(std::span<const std::uint8_t> bytes) {
  BitStream bits;
  bits.reserve(bytes.size() * 8);
  for (std::uint8_t b : bytes)
    for (int i = 7; i >= 0; --i) bits.push_back((b >> i) & 1U);
  return bits;
}

Bytes bits_to_bytes(const BitStream& bits) {
  Bytes out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
  }
  return out;
}

void BitCodecParams::validate() const {
  const int s = dct_row + dct_col;
  if (dct_row < 0 || dct_col < 0 || dct_row >= kB || dct_col >= kB || s < 2 || s > 8) {
    throw Error(ErrorCode::InvalidArgument, "DCT coefficient position must be mid-frequency");
  }
  if (!(dct_quant_step > 0.0) || !(dwt_quant_step > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "quantization steps must be positive");
  }
}

double embed_parity(double coeff, bool bit, double step) {
  long long q = quant_index(coeff, step);
  if (((q % 2) != 0) != bit) {
    const long long up = q + 1;
    const long long down = q - 1;
    q = std::abs(coeff - up * step) <= std::abs(coeff - down * step) ? up : down;
  }
  return static_cast<double>(q) * step;
}

bool read_parity(double coeff, double step) { return (quant_index(coeff, step) % 2) != 0; }

std::size_t lsb_capacity(int width, int height) { return static_cast<std::size_t>(width) * height; }
std::size_t dct_capacity(int width, int height) {
  return static_cast<std::size_t>(width / kB) * static_cast<std::size_t>(height / kB);
}
std::size_t dwt_capacity(int width, int height) {
  return static_cast<std::size_t>(width / 2) * static_cast<std::size_t>(height / 2);
}

// ---- LSB ------------------------------------------------------------------

Raster encode_lsb(const Raster& img, const BitStream& bits) {
  require_capacity(lsb_capacity(img.width, img.height), bits.size(), "LSB");
  Raster out = img;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    std::uint8_t& s = out.data[i * 3 + kBlue];
    s = static_cast<std::uint8_t>((s & 0xFEU) | (bits[i] ? 1U : 0U));
  }
  return out;
}

BitStream decode_lsb_bits(const Raster& img, std::size_t bit_length) {
  require_capacity(lsb_capacity(img.width, img.height), bit_length, "LSB");
  BitStream bits(bit_length);
  for (std::size_t i = 0; i < bit_length; ++i) bits[i] = img.data[i * 3 + kBlue] & 1U;
  return bits;
}

// ---- DCT parity -----------------------------------------------------------

Raster encode_dct(const Raster& img, const BitStream& bits, const BitCodecParams& params) {
  params.validate();
  require_capacity(dct_capacity(img.width, img.height), bits.size(), "DCT");
  Raster out = img;
  const Plane blue = signal::channel_plane(img, Channel::Blue);
  const int blocks_x = img.width / kB;
  const int coeff = params.dct_row * kB + params.dct_col;
  std::array<double, 64> block{};
  for (std::size_t k = 0; k < bits.size(); ++k) {
    const int bx = static_cast<int>(k) % blocks_x;
    const int by = static_cast<int>(k) / blocks_x;
    load_block(blue, bx, by, block);
    signal::dct8x8_forward(block);
    block[coeff] = embed_parity(block[coeff], bits[k], params.dct_quant_step);
    signal::dct8x8_inverse(block);
    for (int y = 0; y < kB; ++y)
      for (int x = 0; x < kB; ++x) out.at(bx * kB + x, by * kB + y, kBlue) = signal::to_sample(block[y * kB + x]);
  }
  return out;
}

BitStream decode_dct_bits(const Raster& img, std::size_t bit_length, const BitCodecParams& params) {
  params.validate();
  require_capacity(dct_capacity(img.width, img.height), bit_length, "DCT");
  const Plane blue = signal::channel_plane(img, Channel::Blue);
  const int blocks_x = img.width / kB;
  const int coeff = params.dct_row * kB + params.dct_col;
  BitStream bits(bit_length);
  std::array<double, 64> block{};
  for (std::size_t k = 0; k < bit_length; ++k) {
    load_block(blue, static_cast<int>(k) % blocks_x, static_cast<int>(k) / blocks_x, block);
    signal::dct8x8_forward(block);
    bits[k] = read_parity(block[coeff], params.dct_quant_step);
  }
  return bits;
}

// ---- DWT parity (LH subband) ---------------------------------------------

Raster encode_dwt(const Raster& img, const BitStream& bits, const BitCodecParams& params) {
  params.validate();
  require_capacity(dwt_capacity(img.width, img.height), bits.size(), "DWT");
  Plane blue = signal::channel_plane(img, Channel::Blue);
  HaarBands bands = signal::haar_dwt_forward(blue);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    bands.lh.values[i] = embed_parity(bands.lh.values[i], bits[i], params.dwt_quant_step);
  }
  signal::haar_dwt_inverse_into(bands, blue);
  Raster out = img;
  signal::store_channel(out, Channel::Blue, blue);
  return out;
}

BitStream decode_dwt_bits(const Raster& img, std::size_t bit_length, const BitCodecParams& params) {
  params.validate();
  require_capacity(dwt_capacity(img.width, img.height), bit_length, "DWT");
  const HaarBands bands = signal::haar_dwt_forward(signal::channel_plane(img, Channel::Blue));
  BitStream bits(bit_length);
  for (std::size_t i = 0; i < bit_length; ++i) bits[i] = read_parity(bands.lh.values[i], params.dwt_quant_step);
  return bits;
}

// ---- signature wrappers ---------------------------------------------------

Raster encode_lsb(const Raster& img, const SignedPayload& sp) { return encode_lsb(img, bytes_to_bits(sp.signature)); }
Bytes decode_lsb(const Raster& img, std::size_t bit_length) { return bits_to_bytes(decode_lsb_bits(img, bit_length)); }

Raster encode_dct(const Raster& img, const SignedPayload& sp, const BitCodecParams& params) {
  return encode_dct(img, bytes_to_bits(sp.signature), params);
}
Bytes decode_dct(const Raster& img, std::size_t bit_length, const BitCodecParams& params) {
  return bits_to_bytes(decode_dct_bits(img, bit_length, params));
}

Raster encode_dwt(const Raster& img, const SignedPayload& sp, const BitCodecParams& params) {
  return encode_dwt(img, bytes_to_bits(sp.signature), params);
}
Bytes decode_dwt(const Raster& img, std::size_t bit_length, const BitCodecParams& params) {
  return bits_to_bytes(decode_dwt_bits(img, bit_length, params));
}

std::vector<std::size_t> dct_parity_flips(const Raster& encoded, const BitStream& bits, const BitCodecParams& params) {
  const BitStream got = decode_dct_bits(encoded, bits.size(), params);
  std::vector<std::size_t> flips;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (got[i] != bits[i]) flips.push_back(i);
  return flips;
}

std::vector<std::size_t> dwt_parity_flips(const Raster& encoded, const BitStream& bits, const BitCodecParams& params) {
  const BitStream got = decode_dwt_bits(encoded, bits.size(), params);
  std::vector<std::size_t> flips;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (got[i] != bits[i]) flips.push_back(i);
  return flips;
}

}  // namespace wmtrace::bitlevel
