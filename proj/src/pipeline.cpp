#include "wmtrace/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "wmtrace/error.hpp"
#include "wmtrace/image_io.hpp"

namespace wmtrace {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

bool is_capacity_failure(const Error& e) {
  return e.code() == ErrorCode::CapacityError || e.code() == ErrorCode::CarrierTooSmall;
}

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

Raster diff_image(const Raster& a, const Raster& b) {
  // |a - b| scaled by 32 so single-level changes are visible.
  Raster out(a.width, a.height);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const int d = std::abs(static_cast<int>(a.data[i]) - static_cast<int>(b.data[i]));
    out.data[i] = static_cast<std::uint8_t>(std::min(255, d * 32));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out || !(out << text)) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

std::string verdict_text(const SchemeVerdict& v) {
  std::ostringstream os;
  os << "scheme=" << scheme_name(v.scheme) << "\n";
  os << "valid=" << (v.valid ? 1 : 0) << "\n";
  if (!v.error.empty()) os << "error=" << v.error << "\n";
  if (v.signature_verified) os << "signature_verified=" << (*v.signature_verified ? 1 : 0) << "\n";
  if (!v.recovered_signature.empty()) os << "recovered_signature=" << to_hex(v.recovered_signature) << "\n";
  if (v.recovered_fingerprint) os << "recovered_fingerprint=" << hex32(v.recovered_fingerprint->value) << "\n";
  if (v.correlation) os << "correlation=" << *v.correlation << "\n";
  if (v.ber) os << "ber=" << *v.ber << "\n";
  return os.str();
}

ordered_json verdict_json(const SchemeVerdict& v) {
  ordered_json j;
  j["scheme"] = scheme_name(v.scheme);
  j["valid"] = v.valid;
  if (!v.error.empty()) j["error"] = v.error;
  if (v.signature_verified) j["signature_verified"] = *v.signature_verified;
  if (v.recovered_fingerprint) j["recovered_fingerprint"] = hex32(v.recovered_fingerprint->value);
  if (v.correlation) j["correlation"] = *v.correlation;
  if (v.ber) j["ber"] = *v.ber;
  return j;
}

}  // namespace

std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Lsb: return "LSB";
    case Scheme::Dct: return "DCT";
    case Scheme::Dwt: return "DWT";
    case Scheme::Ss: return "SS";
    case Scheme::DwtSs: return "DWT-SS";
  }
  return "?";
}

std::string_view scheme_file(Scheme s) { return s == Scheme::DwtSs ? "DWT_SS" : scheme_name(s); }

std::string_view scheme_token(Scheme s) {
  switch (s) {
    case Scheme::Lsb: return "lsb";
    case Scheme::Dct: return "dct";
    case Scheme::Dwt: return "dwt";
    case Scheme::Ss: return "ss";
    case Scheme::DwtSs: return "dwtss";
  }
  return "?";
}

Scheme parse_scheme(std::string_view token) {
  std::string t(token);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "dwt-ss" || t == "dwt_ss") t = "dwtss";
  for (Scheme s : kAllSchemes)
    if (scheme_token(s) == t) return s;
  throw Error(ErrorCode::InvalidArgument, "unknown scheme '" + std::string(token) + "'");
}

bool VerificationResult::any_valid() const {
  return std::any_of(verdicts.begin(), verdicts.end(), [](const SchemeVerdict& v) { return v.valid; });
}

SchemeParams keyed_params(const SchemeParams& base, const PublicKey& pk) {
  SchemeParams p = base;
  p.spread.prn_seed = prn_seed_from(pk);
  return p;
}

Raster encode_scheme(Scheme s, const Raster& img, const SignedPayload& sp, const SchemeParams& params) {
  switch (s) {
    case Scheme::Lsb: return bitlevel::encode_lsb(img, sp);
    case Scheme::Dct: return bitlevel::encode_dct(img, sp, params.bit);
    case Scheme::Dwt: return bitlevel::encode_dwt(img, sp, params.bit);
    case Scheme::Ss: return spread::encode_ss(img, derive_fingerprint(sp), params.spread);
    case Scheme::DwtSs: return spread::encode_dwtss(img, derive_fingerprint(sp), params.spread);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown scheme");
}

SchemeVerdict verify_scheme(Scheme s, const Raster& candidate_img, std::span<const RegistryEntry> candidates,
                            const PublicKey& pk, const SchemeParams& params) {
  SchemeVerdict v;
  v.scheme = s;
  try {
    if (is_bit_level(s)) {
      const std::size_t bits = static_cast<std::size_t>(pk.modulus_bits());
      switch (s) {
        case Scheme::Lsb: v.recovered_signature = bitlevel::decode_lsb(candidate_img, bits); break;
        case Scheme::Dct: v.recovered_signature = bitlevel::decode_dct(candidate_img, bits, params.bit); break;
        default: v.recovered_signature = bitlevel::decode_dwt(candidate_img, bits, params.bit); break;
      }
      v.signature_verified = false;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (verify_signature(pk, candidates[i].payload, v.recovered_signature)) {
          v.signature_verified = true;
          v.matched_candidate = i;
          break;
        }
      }
      v.valid = *v.signature_verified;
      return v;
    }
    // The recovered bits do not depend on the expected fingerprint.
    const Fingerprint32 probe = candidates.empty() ? Fingerprint32{} : candidates.front().fingerprint;
    const spread::Detection d = s == Scheme::Ss ? spread::detect_ss(candidate_img, probe, params.spread)
                                                : spread::detect_dwtss(candidate_img, probe, params.spread);
    v.recovered_fingerprint = d.recovered;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const FingerprintMatch m =
          fingerprint_match(d.recovered, candidates[i].fingerprint, params.spread.corr_threshold);
      if (!v.correlation || m.correlation > *v.correlation) {
        v.correlation = m.correlation;
        v.ber = m.ber;
        v.valid = m.valid;
        v.matched_candidate = i;
      }
    }
    if (!v.valid) v.matched_candidate.reset();
  } catch (const Error& e) {
    if (!is_capacity_failure(e)) throw;
    v = SchemeVerdict{};
    v.scheme = s;
    v.error = e.what();
  }
  return v;
}

// ---- per-image --------------------------------------------------------------

std::string summary_header() { return "image,v_lsb,v_dct,v_dwt,v_ss,v_dwt_ss"; }

std::string summary_row(std::string_view image_name, const VerificationResult& v) {
  std::string row(image_name);
  for (Scheme s : kAllSchemes) row += v.flag(s) ? ",1" : ",0";
  return row;
}

SummaryWriter::SummaryWriter(fs::path path) : path_(std::move(path)) {}

void SummaryWriter::append(std::string_view image_name, const VerificationResult& v) {
  std::lock_guard lock(mu_);
  const bool fresh = !fs::exists(path_) || fs::file_size(path_) == 0;
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path_.string());
  if (fresh) out << summary_header() << "\n";
  out << summary_row(image_name, v) << "\n";
}

ProcessResult process_single_image(std::string_view image_name, const Raster& img, const SignedPayload& sp,
                                   const PublicKey& pk, const SchemeParams& params,
                                   const std::optional<fs::path>& output_root, SummaryWriter* summary) {
  const SchemeParams keyed = keyed_params(params, pk);
  const RegistryEntry expected = registry_entry(sp);
  const std::span<const RegistryEntry> candidates(&expected, 1);

  ProcessResult result;
  result.image_name = std::string(image_name);
  for (Scheme s : kAllSchemes) {
    const auto idx = static_cast<std::size_t>(s);
    try {
      result.encoded[idx] = encode_scheme(s, img, sp, keyed);
    } catch (const Error& e) {
      if (!is_capacity_failure(e)) throw;
      SchemeVerdict& v = result.verification.at(s);
      v.scheme = s;
      v.error = e.what();
      continue;
    }
    result.verification.at(s) = verify_scheme(s, *result.encoded[idx], candidates, pk, keyed);
  }

  if (output_root) {
    const fs::path root = *output_root;
    const fs::path dir = root / result.image_name;
    io::save_image(img, root / "Original_image" / (result.image_name + ".png"));
    for (Scheme s : kAllSchemes) {
      const auto idx = static_cast<std::size_t>(s);
      const std::string file(scheme_file(s));
      const bool bit = is_bit_level(s);
      const fs::path enc_dir = dir / (bit ? "Encoded_image" : "Spatial_encoded");
      const fs::path dec_dir = dir / (bit ? "Decoded_output" : "Spatial_decoded");
      const fs::path cmp_dir = dir / (bit ? "Comparison" : "Spread_comparison");
      write_text(dec_dir / (file + ".txt"), verdict_text(result.verification.at(s)));
      if (!result.encoded[idx]) continue;
      io::save_image(*result.encoded[idx], enc_dir / (file + ".png"));
      io::save_image(diff_image(img, *result.encoded[idx]), cmp_dir / (file + "_diff.png"));
    }
    if (summary) {
      summary->append(result.image_name, result.verification);
    } else {
      SummaryWriter local(root / "summary.csv");
      local.append(result.image_name, result.verification);
    }
  } else if (summary) {
    summary->append(result.image_name, result.verification);
  }
  return result;
}

// ---- attribution --------------------------------------------------------------

AttributionReport trace(const Raster& img, const detector::EmbeddingPair& pair, const detector::DetectorModel& model,
                        const PublicKey& pk, std::span<const RegistryEntry> candidates, const SchemeParams& params) {
  if (pk.empty()) throw Error(ErrorCode::KeyStoreError, "no public key available for verification");
  AttributionReport report;
  report.sample_id = pair.id;
  report.key_id = pk.key_id();
  const detector::Classification c = detector::classify(model, pair);
  report.harmful_probability = c.p;
  report.decision = c.label;
  if (report.decision == 0) return report;

  const SchemeParams keyed = keyed_params(params, pk);
  VerificationResult vr;
  for (Scheme s : kAllSchemes) vr.at(s) = verify_scheme(s, img, candidates, pk, keyed);

  for (Scheme s : {Scheme::Lsb, Scheme::Dct, Scheme::Dwt}) {
    const SchemeVerdict& v = vr.at(s);
    if (v.valid && v.matched_candidate) {
      IdentityEvidence id;
      id.source = s;
      id.identity = candidates[*v.matched_candidate].spec;
      id.matched_user_id = id.identity->user_id;
      report.identity = id;
      break;
    }
  }
  if (!report.identity) {
    const SchemeVerdict* best = nullptr;
    for (Scheme s : {Scheme::Ss, Scheme::DwtSs}) {
      const SchemeVerdict& v = vr.at(s);
      if (v.valid && (!best || *v.correlation > *best->correlation)) best = &v;
    }
    if (best) {
      IdentityEvidence id;
      id.source = best->scheme;
      id.fingerprint = best->recovered_fingerprint;
      id.correlation = best->correlation;
      id.ber = best->ber;
      id.matched_user_id = candidates[*best->matched_candidate].spec.user_id;
      report.identity = id;
    }
  }
  report.verification = std::move(vr);
  return report;
}

std::string report_to_json(const AttributionReport& report) {
  ordered_json j;
  j["sample_id"] = report.sample_id;
  j["harmful_probability"] = report.harmful_probability;
  j["decision"] = report.decision;
  j["key_id"] = report.key_id;
  if (report.verification) {
    ordered_json flags;
    constexpr std::array<const char*, 5> keys = {"v_lsb", "v_dct", "v_dwt", "v_ss", "v_dwt_ss"};
    for (Scheme s : kAllSchemes) flags[keys[static_cast<std::size_t>(s)]] = report.verification->flag(s);
    j["verification"] = flags;
    ordered_json detail = ordered_json::array();
    for (const auto& v : report.verification->verdicts) detail.push_back(verdict_json(v));
    j["schemes"] = detail;
  } else {
    j["verification"] = nullptr;
  }
  if (report.identity) {
    const IdentityEvidence& id = *report.identity;
    ordered_json e;
    e["source"] = scheme_name(id.source);
    e["user_id"] = id.matched_user_id;
    if (id.identity) {
      e["rules_version"] = id.identity->rules_version;
      e["timestamp"] = id.identity->timestamp;
    }
    if (id.fingerprint) e["fingerprint"] = hex32(id.fingerprint->value);
    if (id.correlation) e["correlation"] = *id.correlation;
    if (id.ber) e["ber"] = *id.ber;
    j["identity"] = e;
  } else {
    j["identity"] = nullptr;
  }
  return j.dump(2) + "\n";
}

QualityReport quality_report(const Raster& original, const Raster& watermarked) {
  if (original.width != watermarked.width || original.height != watermarked.height ||
      original.data.size() != watermarked.data.size()) {
    throw Error(ErrorCode::ShapeError, "quality_report needs images of equal size");
  }
  if (original.data.empty()) throw Error(ErrorCode::ShapeError, "quality_report on empty images");
  QualityReport q;
  double sq = 0.0, abs_sum = 0.0;
  for (std::size_t i = 0; i < original.data.size(); ++i) {
    const int d = std::abs(static_cast<int>(original.data[i]) - static_cast<int>(watermarked.data[i]));
    q.max_abs_diff = std::max(q.max_abs_diff, d);
    abs_sum += d;
    sq += static_cast<double>(d) * d;
  }
  const double n = static_cast<double>(original.data.size());
  q.mean_abs_diff = abs_sum / n;
  const double mse = sq / n;
  q.psnr_db = mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(255.0 * 255.0 / mse);
  return q;
}

}  // namespace wmtrace
