#pragma once

#include <array>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wmtrace/bitlevel.hpp"
#include "wmtrace/detector.hpp"
#include "wmtrace/payload.hpp"
#include "wmtrace/signal.hpp"
#include "wmtrace/spread.hpp"

namespace wmtrace {

// Embedding schemes, in the order every per-image pass runs them.
enum class Scheme { Lsb, Dct, Dwt, Ss, DwtSs };
inline constexpr std::array<Scheme, 5> kAllSchemes = {Scheme::Lsb, Scheme::Dct, Scheme::Dwt, Scheme::Ss,
                                                      Scheme::DwtSs};

std::string_view scheme_name(Scheme s);   // LSB, DCT, DWT, SS, DWT-SS
std::string_view scheme_file(Scheme s);   // LSB, DCT, DWT, SS, DWT_SS
std::string_view scheme_token(Scheme s);  // lsb, dct, dwt, ss, dwtss
Scheme parse_scheme(std::string_view token);
inline bool is_bit_level(Scheme s) { return s == Scheme::Lsb || s == Scheme::Dct || s == Scheme::Dwt; }

struct SchemeParams {
  bitlevel::BitCodecParams bit;
  spread::SpreadParams spread;
};

// ---- payload registry -------------------------------------------------------

struct RegistryEntry {
  PayloadSpec spec;
  Bytes payload;
  Bytes signature;
  Fingerprint32 fingerprint;
  std::string label;
};

/// Issued payloads per key_id, persisted as one JSON document. Lets a
/// verifier check a flagged image against every payload a key has signed.
class PayloadRegistry {
 public:
  static constexpr std::string_view kFileName = "payload_registry.json";

  // A missing file yields an empty registry; a malformed one is a FormatError.
  static PayloadRegistry load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Returns false when the signature is already registered under key_id.
  bool add(const std::string& key_id, const SignedPayload& sp);
  std::vector<RegistryEntry> entries(const std::string& key_id) const;
  std::string to_json() const;

 private:
  std::vector<std::pair<std::string, RegistryEntry>> rows_;
};

RegistryEntry registry_entry(const SignedPayload& sp);

// ---- verification -----------------------------------------------------------

struct SchemeVerdict {
  Scheme scheme = Scheme::Lsb;
  bool valid = false;
  std::string error;  // set when the scheme could not run (e.g. CapacityError)
  // bit-level
  std::optional<bool> signature_verified;
  Bytes recovered_signature;
  // spread spectrum
  std::optional<Fingerprint32> recovered_fingerprint;
  std::optional<double> correlation;
  std::optional<double> ber;
  // index into the candidate list that verified, if any
  std::optional<std::size_t> matched_candidate;
};

struct VerificationResult {
  std::array<SchemeVerdict, 5> verdicts;

  const SchemeVerdict& at(Scheme s) const { return verdicts[static_cast<std::size_t>(s)]; }
  SchemeVerdict& at(Scheme s) { return verdicts[static_cast<std::size_t>(s)]; }
  bool flag(Scheme s) const { return at(s).valid; }
  bool any_valid() const;
};

Raster encode_scheme(Scheme s, const Raster& img, const SignedPayload& sp, const SchemeParams& params);

// Decodes scheme `s` from `candidate_img` and checks it against each
// candidate payload (RSA verify for bit-level schemes, fingerprint
// correlation for spread spectrum). Capacity failures become an invalid
// verdict with `error` set.
SchemeVerdict verify_scheme(Scheme s, const Raster& candidate_img, std::span<const RegistryEntry> candidates,
                            const PublicKey& pk, const SchemeParams& params);

// Spread params with the PRN seed derived from pk.
SchemeParams keyed_params(const SchemeParams& base, const PublicKey& pk);

// ---- per-image processing ---------------------------------------------------

std::string summary_header();  // image,v_lsb,v_dct,v_dwt,v_ss,v_dwt_ss
std::string summary_row(std::string_view image_name, const VerificationResult& v);

// Appends rows to a CSV, writing the header first when the file is new.
class SummaryWriter {
 public:
  explicit SummaryWriter(std::filesystem::path path);
  void append(std::string_view image_name, const VerificationResult& v);

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

struct ProcessResult {
  std::string image_name;
  std::array<std::optional<Raster>, 5> encoded;
  VerificationResult verification;
};

// Encodes and verifies all five schemes in order. When `output_root` is set,
// writes Original_image/, <name>/Encoded_image/, <name>/Decoded_output/,
// <name>/Comparison/, <name>/Spatial_encoded/, <name>/Spatial_decoded/ and
// <name>/Spread_comparison/, and appends a row to <root>/summary.csv.
ProcessResult process_single_image(std::string_view image_name, const Raster& img, const SignedPayload& sp,
                                   const PublicKey& pk, const SchemeParams& params,
                                   const std::optional<std::filesystem::path>& output_root = std::nullopt,
                                   SummaryWriter* summary = nullptr);

// ---- attribution --------------------------------------------------------------

struct IdentityEvidence {
  Scheme source = Scheme::Lsb;
  std::optional<PayloadSpec> identity;  // from a verified bit-level signature
  // spread-spectrum evidence when no bit-level scheme verified
  std::optional<Fingerprint32> fingerprint;
  std::optional<double> correlation;
  std::optional<double> ber;
  std::string matched_user_id;
};

struct AttributionReport {
  std::string sample_id;
  double harmful_probability = 0.0;
  int decision = 0;
  std::optional<VerificationResult> verification;  // present iff decision == 1
  std::optional<IdentityEvidence> identity;
  std::string key_id;
};

AttributionReport trace(const Raster& img, const detector::EmbeddingPair& pair, const detector::DetectorModel& model,
                        const PublicKey& pk, std::span<const RegistryEntry> candidates, const SchemeParams& params);

std::string report_to_json(const AttributionReport& report);

struct QualityReport {
  double psnr_db = 0.0;  // +infinity for identical images
  int max_abs_diff = 0;
  double mean_abs_diff = 0.0;
};

QualityReport quality_report(const Raster& original, const Raster& watermarked);

}  // namespace wmtrace
