#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "wmtrace/error.hpp"
#include "wmtrace/payload.hpp"

namespace fs = std::filesystem;
using namespace wmtrace;

namespace {

const fs::path kFixtures = WMTRACE_FIXTURE_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const KeyPair& fixture_key() {
  static const KeyPair kp = KeyPair::from_pem(slurp(kFixtures / "keys" / kPrivateKeyFile));
  return kp;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wmtrace_payload_" + name);
  fs::remove_all(p);
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::IoError;
}

Bytes text(std::string_view s) { return Bytes(s.begin(), s.end()); }

}  // namespace

TEST(Payload, CanonicalFormat) {
  EXPECT_EQ(generate_payload({"alice", 1, 1700000000}), text("v1|alice|1700000000"));
  EXPECT_EQ(generate_payload({"bob", 3, -5}), text("v3|bob|-5"));
}

TEST(Payload, ParseInvertsGenerate) {
  const PayloadSpec spec{"user-42", 2, 1234567890123};
  const auto back = parse_payload(generate_payload(spec));
  ASSERT_TRUE(back);
  EXPECT_EQ(*back, spec);
  EXPECT_FALSE(parse_payload(text("x1|a|2")));
  EXPECT_FALSE(parse_payload(text("v1|a")));
  EXPECT_FALSE(parse_payload(text("v1||2")));
  EXPECT_FALSE(parse_payload(text("v1|a|2z")));
}

TEST(Payload, InvalidIdentity) {
  EXPECT_EQ(code_of([] { generate_payload({"", 1, 0}); }), ErrorCode::InvalidIdentity);
  EXPECT_EQ(code_of([] { generate_payload({"a|b", 1, 0}); }), ErrorCode::InvalidIdentity);
}

TEST(Crypto, Sha256Vectors) {
  EXPECT_EQ(to_hex(sha256({})), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(to_hex(sha256(text("abc"))), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Crypto, SignVerifyDeterministic) {
  const auto& kp = fixture_key();
  EXPECT_EQ(kp.public_key().modulus_bits(), 1024);
  const Bytes payload = generate_payload({"alice", 1, 1700000000});
  const SignedPayload a = sign_payload(kp, payload, "alice");
  const SignedPayload b = sign_payload(kp, payload);
  EXPECT_EQ(a.signature.size(), kSignatureBytes);
  EXPECT_EQ(a.bit_length, 1024);
  EXPECT_EQ(a.signature, b.signature);
  EXPECT_EQ(a.plaintext_label, "alice");
  EXPECT_TRUE(verify_signature(kp.public_key(), payload, a.signature));
  EXPECT_FALSE(verify_signature(kp.public_key(), text("v1|alice|1700000001"), a.signature));
}

TEST(Crypto, EverySingleBitFlipFails) {
  const auto& kp = fixture_key();
  const Bytes payload = generate_payload({"carol", 1, 42});
  const SignedPayload sp = sign_payload(kp, payload);
  for (int bit = 0; bit < 1024; bit += 3) {
    Bytes sig = sp.signature;
    sig[bit / 8] ^= static_cast<std::uint8_t>(0x80 >> (bit % 8));
    EXPECT_FALSE(verify_signature(kp.public_key(), payload, sig)) << "bit " << bit;
  }
}

TEST(Crypto, WrongLengthAndForeignKeyFail) {
  const auto& kp = fixture_key();
  const Bytes payload = generate_payload({"dave", 1, 1});
  const SignedPayload sp = sign_payload(kp, payload);
  EXPECT_FALSE(verify_signature(kp.public_key(), payload, Bytes(127, 0)));
  EXPECT_FALSE(verify_signature(kp.public_key(), payload, Bytes{}));
  const KeyPair other = KeyPair::generate();
  EXPECT_FALSE(verify_signature(other.public_key(), payload, sp.signature));
  EXPECT_FALSE(verify_signature(PublicKey{}, payload, sp.signature));
}

TEST(KeyStore, GeneratesThenReloadsSamePair) {
  const fs::path dir = scratch("gen");
  const KeyPair a = keypair_load_or_generate(dir);
  EXPECT_TRUE(fs::exists(dir / kPrivateKeyFile));
  EXPECT_TRUE(fs::exists(dir / kPublicKeyFile));
  const KeyPair b = keypair_load_or_generate(dir);
  EXPECT_EQ(a.key_id(), b.key_id());
  EXPECT_EQ(load_public_key(dir).der(), a.public_key().der());
  EXPECT_EQ(a.key_id().size(), 64u);
}

TEST(KeyStore, LoadsCheckedInFixture) {
  const KeyPair kp = keypair_load_or_generate(kFixtures / "keys");
  EXPECT_EQ(kp.key_id(), fixture_key().key_id());
  EXPECT_EQ(PublicKey::from_pem(kp.public_key().to_pem()).der(), kp.public_key().der());
}

TEST(KeyStore, CorruptKeyIsNeverReplaced) {
  const fs::path dir = scratch("corrupt");
  fs::create_directories(dir);
  std::ofstream(dir / kPrivateKeyFile) << "not a key";
  EXPECT_EQ(code_of([&] { keypair_load_or_generate(dir); }), ErrorCode::KeyStoreError);
  EXPECT_EQ(slurp(dir / kPrivateKeyFile), "not a key");
}

TEST(KeyStore, PublicWithoutPrivateIsError) {
  const fs::path dir = scratch("pubonly");
  fs::create_directories(dir);
  fs::copy_file(kFixtures / "keys" / kPublicKeyFile, dir / kPublicKeyFile);
  EXPECT_EQ(code_of([&] { keypair_load_or_generate(dir); }), ErrorCode::KeyStoreError);
  EXPECT_EQ(code_of([&] { load_public_key(scratch("empty")); }), ErrorCode::KeyStoreError);
}

TEST(KeyStore, MismatchedPublicKeyIsError) {
  const fs::path dir = scratch("mismatch");
  keypair_load_or_generate(dir);
  const KeyPair other = KeyPair::generate();
  std::ofstream(dir / kPublicKeyFile, std::ios::trunc) << other.public_key().to_pem();
  EXPECT_EQ(code_of([&] { keypair_load_or_generate(dir); }), ErrorCode::KeyStoreError);
}

TEST(Fingerprint, EmptySignatureIsShaPrefix) {
  EXPECT_EQ(fingerprint_of({}).value, 0xE3B0C442u);
  SignedPayload sp;
  EXPECT_EQ(derive_fingerprint(sp).value, 0xE3B0C442u);
}

TEST(Fingerprint, BitsAreMsbFirst) {
  const Fingerprint32 f{0x80000001u};
  EXPECT_TRUE(f.bit(0));
  EXPECT_FALSE(f.bit(1));
  EXPECT_TRUE(f.bit(31));
  EXPECT_EQ(f.bipolar(0), 1);
  EXPECT_EQ(f.bipolar(1), -1);
  std::array<bool, 32> bits{};
  for (int i = 0; i < 32; ++i) bits[i] = f.bit(i);
  EXPECT_EQ(Fingerprint32::from_bits(bits), f);
}

TEST(Fingerprint, SevenBitErrors) {
  const Fingerprint32 a{0xDEADBEEFu};
  const Fingerprint32 b{a.value ^ 0x0101010Fu};  // 7 differing bits
  const auto m = fingerprint_match(b, a);
  EXPECT_DOUBLE_EQ(m.ber, 0.21875);
  EXPECT_DOUBLE_EQ(m.correlation, 0.5625);
  EXPECT_TRUE(m.valid);
}

TEST(Fingerprint, CorrelationIdentityExact) {
  for (std::uint32_t x = 0; x < 2000; ++x) {
    const Fingerprint32 a{x * 2654435761u}, b{~x * 40503u};
    const auto m = fingerprint_match(a, b);
    EXPECT_EQ(m.correlation, 1.0 - 2.0 * m.ber);
    double corr = 0.0;
    for (int i = 0; i < 32; ++i) corr += a.bipolar(i) * b.bipolar(i);
    EXPECT_EQ(m.correlation, corr / 32.0);
  }
  EXPECT_DOUBLE_EQ(fingerprint_match(Fingerprint32{5}, Fingerprint32{5}).correlation, 1.0);
  EXPECT_DOUBLE_EQ(fingerprint_match(Fingerprint32{5}, Fingerprint32{~5u}).correlation, -1.0);
  // 8 wrong: corr exactly 0.5, valid at the inclusive threshold; 9 wrong is not.
  EXPECT_EQ(fingerprint_match(Fingerprint32{0}, Fingerprint32{0xFFu}, 0.5).correlation, 0.5);
  EXPECT_TRUE(fingerprint_match(Fingerprint32{0}, Fingerprint32{0xFFu}, 0.5).valid);
  EXPECT_FALSE(fingerprint_match(Fingerprint32{0}, Fingerprint32{0x1FFu}, 0.5).valid);
}

TEST(Fingerprint, PrnSeedFromDer) {
  const auto& pk = fixture_key().public_key();
  const auto digest = sha256(pk.der());
  std::uint64_t expect = 0;
  for (int i = 0; i < 8; ++i) expect = (expect << 8) | digest[i];
  EXPECT_EQ(prn_seed_from(pk), expect);
}

TEST(Hex, RoundTrip) {
  const Bytes b{0x00, 0x0f, 0xa5, 0xff};
  EXPECT_EQ(to_hex(b), "000fa5ff");
  EXPECT_EQ(from_hex("000FA5ff"), b);
}
