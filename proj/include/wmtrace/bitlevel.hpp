#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wmtrace/payload.hpp"
#include "wmtrace/signal.hpp"

namespace wmtrace::bitlevel {

using BitStream = std::vector<bool>;

// MSB-first within each byte.
BitStream bytes_to_bits(std::span<const std::uint8_t> bytes);
Bytes bits_to_bytes(const BitStream& bits);

struct BitCodecParams {
  int dct_row = 3;
  int dct_col = 2;
  double dct_quant_step = 16.0;
  double dwt_quant_step = 8.0;

  // Throws InvalidArgument unless the position is mid-frequency and steps > 0.
  void validate() const;
};

// Parity-quantizes `coeff` so that parity(round(coeff/step)) == bit, moving
// the quantization index to whichever neighbour is closer (ties go up).
double embed_parity(double coeff, bool bit, double step);
bool read_parity(double coeff, double step);

// All three schemes carry the bits in the blue channel.
Raster encode_lsb(const Raster& img, const BitStream& bits);
BitStream decode_lsb_bits(const Raster& img, std::size_t bit_length);

Raster encode_dct(const Raster& img, const BitStream& bits, const BitCodecParams& params = {});
BitStream decode_dct_bits(const Raster& img, std::size_t bit_length, const BitCodecParams& params = {});

Raster encode_dwt(const Raster& img, const BitStream& bits, const BitCodecParams& params = {});
BitStream decode_dwt_bits(const Raster& img, std::size_t bit_length, const BitCodecParams& params = {});

// Signature-level wrappers. Decoders return bit_length/8 bytes.
Raster encode_lsb(const Raster& img, const SignedPayload& sp);
Bytes decode_lsb(const Raster& img, std::size_t bit_length = kRsaBits);
Raster encode_dct(const Raster& img, const SignedPayload& sp, const BitCodecParams& params = {});
Bytes decode_dct(const Raster& img, std::size_t bit_length = kRsaBits, const BitCodecParams& params = {});
Raster encode_dwt(const Raster& img, const SignedPayload& sp, const BitCodecParams& params = {});
Bytes decode_dwt(const Raster& img, std::size_t bit_length = kRsaBits, const BitCodecParams& params = {});

std::size_t lsb_capacity(int width, int height);
std::size_t dct_capacity(int width, int height);
std::size_t dwt_capacity(int width, int height);

// Diagnostic for clean-image failures: indices whose parity read back from
// `encoded` disagrees with `bits`.
std::vector<std::size_t> dct_parity_flips(const Raster& encoded, const BitStream& bits,
                                          const BitCodecParams& params = {});
std::vector<std::size_t> dwt_parity_flips(const Raster& encoded, const BitStream& bits,
                                          const BitCodecParams& params = {});

}  // namespace wmtrace::bitlevel
