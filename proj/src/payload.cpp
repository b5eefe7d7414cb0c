#include "wmtrace/payload.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>

#include <openssl/bio.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rsa.h>
#include <openssl/x509.h>

#include "wmtrace/error.hpp"

namespace wmtrace {
namespace {

using PkeyPtr = std::shared_ptr<EVP_PKEY>;
using BioPtr = std::unique_ptr<BIO, decltype(&BIO_free)>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>;

PkeyPtr wrap(EVP_PKEY* raw) { return PkeyPtr(raw, EVP_PKEY_free); }

std::string bio_to_string(BIO* bio) {
  char* data = nullptr;
  const long len = BIO_get_mem_data(bio, &data);
  return std::string(data, static_cast<std::size_t>(len));
}

BioPtr mem_bio(std::string_view text) {
  return BioPtr(BIO_new_mem_buf(text.data(), static_cast<int>(text.size())), BIO_free);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::KeyStoreError, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw Error(ErrorCode::KeyStoreError, "cannot write " + p.string());
}

PkeyPtr public_half(EVP_PKEY* key) {
  unsigned char* der = nullptr;
  const int len = i2d_PUBKEY(key, &der);
  if (len <= 0) throw Error(ErrorCode::KeyStoreError, "cannot encode public key");
  const unsigned char* p = der;
  EVP_PKEY* pub = d2i_PUBKEY(nullptr, &p, len);
  OPENSSL_free(der);
  if (!pub) throw Error(ErrorCode::KeyStoreError, "cannot decode public key");
  return wrap(pub);
}

void require_rsa1024(EVP_PKEY* key) {
  if (EVP_PKEY_get_base_id(key) != EVP_PKEY_RSA || EVP_PKEY_get_bits(key) != kRsaBits) {
    throw Error(ErrorCode::KeyStoreError, "key is not RSA-1024");
  }
}

}  // namespace

// ---- keys -----------------------------------------------------------------

PublicKey::PublicKey(std::shared_ptr<evp_pkey_st> key) : key_(std::move(key)) {
  unsigned char* der = nullptr;
  const int len = i2d_PUBKEY(key_.get(), &der);
  if (len <= 0) throw Error(ErrorCode::KeyStoreError, "cannot encode public key");
  der_.assign(der, der + len);
  OPENSSL_free(der);
  key_id_ = to_hex(sha256(der_));
}

PublicKey PublicKey::from_pem(std::string_view pem) {
  BioPtr bio = mem_bio(pem);
  EVP_PKEY* raw = PEM_read_bio_PUBKEY(bio.get(), nullptr, nullptr, nullptr);
  if (!raw) throw Error(ErrorCode::KeyStoreError, "malformed public key PEM");
  PkeyPtr key = wrap(raw);
  require_rsa1024(key.get());
  return PublicKey(std::move(key));
}

std::string PublicKey::to_pem() const {
  BioPtr bio(BIO_new(BIO_s_mem()), BIO_free);
  if (!PEM_write_bio_PUBKEY(bio.get(), key_.get())) {
    throw Error(ErrorCode::KeyStoreError, "cannot serialize public key");
  }
  return bio_to_string(bio.get());
}

int PublicKey::modulus_bits() const { return key_ ? EVP_PKEY_get_bits(key_.get()) : 0; }

KeyPair::KeyPair(std::shared_ptr<evp_pkey_st> key)
    : private_(std::move(key)), public_(public_half(private_.get())) {}

KeyPair KeyPair::generate() {
  EVP_PKEY* raw = EVP_RSA_gen(kRsaBits);
  if (!raw) throw Error(ErrorCode::KeyStoreError, "RSA key generation failed");
  return KeyPair(wrap(raw));
}

KeyPair KeyPair::from_pem(std::string_view private_pem) {
  BioPtr bio = mem_bio(private_pem);
  EVP_PKEY* raw = PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr);
  if (!raw) throw Error(ErrorCode::KeyStoreError, "malformed private key PEM");
  PkeyPtr key = wrap(raw);
  require_rsa1024(key.get());
  return KeyPair(std::move(key));
}

std::string KeyPair::private_pem() const {
  BioPtr bio(BIO_new(BIO_s_mem()), BIO_free);
  if (!PEM_write_bio_PrivateKey(bio.get(), private_.get(), nullptr, nullptr, 0, nullptr, nullptr)) {
    throw Error(ErrorCode::KeyStoreError, "cannot serialize private key");
  }
  return bio_to_string(bio.get());
}

KeyPair keypair_load_or_generate(const std::filesystem::path& store_dir) {
  const auto priv_path = store_dir / kPrivateKeyFile;
  const auto pub_path = store_dir / kPublicKeyFile;
  const bool have_priv = std::filesystem::exists(priv_path);
  const bool have_pub = std::filesystem::exists(pub_path);

  if (have_priv) {
    KeyPair kp = KeyPair::from_pem(read_file(priv_path));
    if (have_pub) {
      const PublicKey stored = PublicKey::from_pem(read_file(pub_path));
      if (stored.der() != kp.public_key().der()) {
        throw Error(ErrorCode::KeyStoreError, "public key file does not match private key");
      }
    }
    return kp;
  }
  if (have_pub) {
    throw Error(ErrorCode::KeyStoreError, "public key present without its private key in " + store_dir.string());
  }

  std::error_code ec;
  std::filesystem::create_directories(store_dir, ec);
  if (ec) throw Error(ErrorCode::KeyStoreError, "cannot create key store: " + ec.message());
  KeyPair kp = KeyPair::generate();
  write_file(priv_path, kp.private_pem());
  std::filesystem::permissions(priv_path, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write,
                               ec);
  write_file(pub_path, kp.public_key().to_pem());
  return kp;
}

PublicKey load_public_key(const std::filesystem::path& store_dir) {
  const auto pub_path = store_dir / kPublicKeyFile;
  if (!std::filesystem::exists(pub_path)) {
    throw Error(ErrorCode::KeyStoreError, "no public key in " + store_dir.string());
  }
  return PublicKey::from_pem(read_file(pub_path));
}

// ---- payload --------------------------------------------------------------

Bytes generate_payload(const PayloadSpec& spec) {
  if (spec.user_id.empty()) throw Error(ErrorCode::InvalidIdentity, "user_id is empty");
  if (spec.user_id.find('|') != std::string::npos) {
    throw Error(ErrorCode::InvalidIdentity, "user_id may not contain '|'");
  }
  if (spec.rules_version < 0) throw Error(ErrorCode::InvalidIdentity, "rules_version must be non-negative");
  const std::string text =
      "v" + std::to_string(spec.rules_version) + "|" + spec.user_id + "|" + std::to_string(spec.timestamp);
  return Bytes(text.begin(), text.end());
}

std::optional<PayloadSpec> parse_payload(std::span<const std::uint8_t> bytes) {
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const auto first = text.find('|');
  const auto last = text.rfind('|');
  if (text.size() < 2 || text[0] != 'v' || first == std::string_view::npos || first == last) return std::nullopt;

  PayloadSpec spec;
  const std::string_view version = text.substr(1, first - 1);
  const std::string_view ts = text.substr(last + 1);
  spec.user_id = std::string(text.substr(first + 1, last - first - 1));
  auto r1 = std::from_chars(version.data(), version.data() + version.size(), spec.rules_version);
  auto r2 = std::from_chars(ts.data(), ts.data() + ts.size(), spec.timestamp);
  if (r1.ec != std::errc{} || r1.ptr != version.data() + version.size() || r2.ec != std::errc{} ||
      r2.ptr != ts.data() + ts.size() || spec.user_id.empty()) {
    return std::nullopt;
  }
  return spec;
}

SignedPayload sign_payload(const KeyPair& kp, std::span<const std::uint8_t> payload, std::string label) {
  if (!kp.handle()) throw Error(ErrorCode::KeyStoreError, "key pair is empty");
  MdCtxPtr ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_PKEY_CTX* pctx = nullptr;
  if (EVP_DigestSignInit(ctx.get(), &pctx, EVP_sha256(), nullptr, kp.handle()) != 1 ||
      EVP_PKEY_CTX_set_rsa_padding(pctx, RSA_PKCS1_PADDING) != 1) {
    throw Error(ErrorCode::KeyStoreError, "cannot initialise signer");
  }
  std::size_t len = 0;
  if (EVP_DigestSign(ctx.get(), nullptr, &len, payload.data(), payload.size()) != 1) {
    throw Error(ErrorCode::KeyStoreError, "signing failed");
  }
  SignedPayload sp;
  sp.signature.resize(len);
  if (EVP_DigestSign(ctx.get(), sp.signature.data(), &len, payload.data(), payload.size()) != 1) {
    throw Error(ErrorCode::KeyStoreError, "signing failed");
  }
  sp.signature.resize(len);
  sp.payload_bytes.assign(payload.begin(), payload.end());
  sp.bit_length = static_cast<int>(sp.signature.size() * 8);
  sp.plaintext_label = std::move(label);
  return sp;
}

bool verify_signature(const PublicKey& pk, std::span<const std::uint8_t> payload,
                      std::span<const std::uint8_t> candidate_signature) {
  if (pk.empty() || candidate_signature.size() != kSignatureBytes) return false;
  MdCtxPtr ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_PKEY_CTX* pctx = nullptr;
  if (EVP_DigestVerifyInit(ctx.get(), &pctx, EVP_sha256(), nullptr, pk.handle()) != 1 ||
      EVP_PKEY_CTX_set_rsa_padding(pctx, RSA_PKCS1_PADDING) != 1) {
    return false;
  }
  return EVP_DigestVerify(ctx.get(), candidate_signature.data(), candidate_signature.size(), payload.data(),
                          payload.size()) == 1;
}

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32) {
    throw Error(ErrorCode::InvalidArgument, "SHA-256 failed");
  }
  return out;
}

// ---- fingerprint ----------------------------------------------------------

std::array<int, kFingerprintBits> Fingerprint32::bipolar_vector() const {
  std::array<int, kFingerprintBits> v{};
  for (std::size_t i = 0; i < kFingerprintBits; ++i) v[i] = bipolar(i);
  return v;
}

Fingerprint32 Fingerprint32::from_bits(std::span<const bool> bits) {
  if (bits.size() != kFingerprintBits) throw Error(ErrorCode::ShapeError, "fingerprint needs 32 bits");
  Fingerprint32 f;
  for (bool b : bits) f.value = (f.value << 1) | (b ? 1U : 0U);
  return f;
}

Fingerprint32 fingerprint_of(std::span<const std::uint8_t> signature) {
  const auto digest = sha256(signature);
  Fingerprint32 f;
  f.value = (std::uint32_t{digest[0]} << 24) | (std::uint32_t{digest[1]} << 16) | (std::uint32_t{digest[2]} << 8) |
            std::uint32_t{digest[3]};
  return f;
}

Fingerprint32 derive_fingerprint(const SignedPayload& sp) { return fingerprint_of(sp.signature); }

FingerprintMatch fingerprint_match(const Fingerprint32& recovered, const Fingerprint32& expected,
                                   double corr_threshold) {
  const int errors = std::popcount(recovered.value ^ expected.value);
  FingerprintMatch m;
  // Σ bipolar products = matches - errors = 32 - 2·errors, so corr = 1 - 2·ber exactly.
  m.correlation = static_cast<double>(static_cast<int>(kFingerprintBits) - 2 * errors) / kFingerprintBits;
  m.ber = static_cast<double>(errors) / kFingerprintBits;
  m.valid = m.correlation >= corr_threshold;
  return m;
}

std::uint64_t prn_seed_from(const PublicKey& pk) {
  const auto digest = sha256(pk.der());
  std::uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) seed = (seed << 8) | digest[i];
  return seed;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(ErrorCode::FormatError, "hex string has odd length");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error(ErrorCode::FormatError, "invalid hex digit");
  };
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return out;
}

}  // namespace wmtrace
