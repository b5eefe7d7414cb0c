#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Forward declaration so OpenSSL headers stay out of the public surface.
struct evp_pkey_st;

namespace wmtrace {

using Bytes = std::vector<std::uint8_t>;

inline constexpr int kRsaBits = 1024;
inline constexpr std::size_t kSignatureBytes = kRsaBits / 8;
inline constexpr std::size_t kFingerprintBits = 32;

class PublicKey {
 public:
  PublicKey() = default;

  static PublicKey from_pem(std::string_view pem);
  std::string to_pem() const;

  bool empty() const { return !key_; }
  // DER SubjectPublicKeyInfo.
  const Bytes& der() const { return der_; }
  // Hex SHA-256 of der().
  const std::string& key_id() const { return key_id_; }
  int modulus_bits() const;
  evp_pkey_st* handle() const { return key_.get(); }

 private:
  friend class KeyPair;
  explicit PublicKey(std::shared_ptr<evp_pkey_st> key);

  std::shared_ptr<evp_pkey_st> key_;
  Bytes der_;
  std::string key_id_;
};

class KeyPair {
 public:
  KeyPair() = default;

  static KeyPair generate();
  static KeyPair from_pem(std::string_view private_pem);
  std::string private_pem() const;

  const PublicKey& public_key() const { return public_; }
  const std::string& key_id() const { return public_.key_id(); }
  evp_pkey_st* handle() const { return private_.get(); }

 private:
  explicit KeyPair(std::shared_ptr<evp_pkey_st> key);

  std::shared_ptr<evp_pkey_st> private_;
  PublicKey public_;
};

inline constexpr std::string_view kPrivateKeyFile = "rsa_private.pem";
inline constexpr std::string_view kPublicKeyFile = "rsa_public.pem";

// Returns the pair stored under `store_dir`, or generates and persists a new
// RSA-1024 pair when neither key file exists. A present but unreadable key
// file is a KeyStoreError; it is never silently replaced.
KeyPair keypair_load_or_generate(const std::filesystem::path& store_dir);
PublicKey load_public_key(const std::filesystem::path& store_dir);

struct PayloadSpec {
  std::string user_id;
  int rules_version = 1;
  std::int64_t timestamp = 0;

  bool operator==(const PayloadSpec&) const = default;
};

/// Canonical payload bytes: `v<rules_version>|<user_id>|<timestamp>` (UTF-8).
Bytes generate_payload(const PayloadSpec& spec);
/// Inverse of generate_payload; nullopt when the bytes do not follow the format.
std::optional<PayloadSpec> parse_payload(std::span<const std::uint8_t> bytes);

struct SignedPayload {
  Bytes payload_bytes;
  Bytes signature;
  int bit_length = 0;
  std::string plaintext_label;
};

// RSA PKCS#1 v1.5 over SHA-256; deterministic for a fixed key and payload.
SignedPayload sign_payload(const KeyPair& kp, std::span<const std::uint8_t> payload,
                           std::string label = {});
bool verify_signature(const PublicKey& pk, std::span<const std::uint8_t> payload,
                      std::span<const std::uint8_t> candidate_signature);

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data);

struct Fingerprint32 {
  std::uint32_t value = 0;

  bool bit(std::size_t i) const { return (value >> (31 - i)) & 1U; }
  int bipolar(std::size_t i) const { return bit(i) ? 1 : -1; }
  std::array<int, kFingerprintBits> bipolar_vector() const;

  static Fingerprint32 from_bits(std::span<const bool> bits);
  bool operator==(const Fingerprint32&) const = default;
};

// First 32 bits, most significant first, of SHA-256 over the raw bytes.
Fingerprint32 fingerprint_of(std::span<const std::uint8_t> signature);
Fingerprint32 derive_fingerprint(const SignedPayload& sp);

struct FingerprintMatch {
  double correlation = 0.0;
  double ber = 0.0;
  bool valid = false;
};

inline constexpr double kDefaultCorrThreshold = 0.5;

FingerprintMatch fingerprint_match(const Fingerprint32& recovered, const Fingerprint32& expected,
                                   double corr_threshold = kDefaultCorrThreshold);

// Seed for the spread-spectrum carriers: first 8 bytes of SHA-256 over the
// DER public key, big-endian. A verifier holding only pk can regenerate it.
std::uint64_t prn_seed_from(const PublicKey& pk);

std::string to_hex(std::span<const std::uint8_t> bytes);
Bytes from_hex(std::string_view hex);

}  // namespace wmtrace
