#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wmtrace/error.hpp"
#include "wmtrace/pipeline.hpp"

namespace wmtrace {

using nlohmann::ordered_json;

RegistryEntry registry_entry(const SignedPayload& sp) {
  auto spec = parse_payload(sp.payload_bytes);
  if (!spec) throw Error(ErrorCode::FormatError, "payload does not follow the v<R>|<user>|<t> format");
  return RegistryEntry{*spec, sp.payload_bytes, sp.signature, derive_fingerprint(sp), sp.plaintext_label};
}

PayloadRegistry PayloadRegistry::load(const std::filesystem::path& path) {
  PayloadRegistry reg;
  if (!std::filesystem::exists(path)) return reg;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
    for (const auto& [key_id, list] : j.at("keys").items()) {
      for (const auto& e : list) {
        SignedPayload sp;
        const std::string payload = e.at("payload").get<std::string>();
        sp.payload_bytes.assign(payload.begin(), payload.end());
        sp.signature = from_hex(e.at("signature").get<std::string>());
        sp.bit_length = static_cast<int>(sp.signature.size() * 8);
        sp.plaintext_label = e.value("label", "");
        reg.rows_.emplace_back(key_id, registry_entry(sp));
      }
    }
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorCode::FormatError, "malformed registry " + path.string() + ": " + e.what());
  }
  return reg;
}

std::string PayloadRegistry::to_json() const {
  ordered_json j;
  j["format_version"] = 1;
  j["keys"] = ordered_json::object();
  for (const auto& [key_id, e] : rows_) {
    ordered_json row;
    row["user_id"] = e.spec.user_id;
    row["rules_version"] = e.spec.rules_version;
    row["timestamp"] = e.spec.timestamp;
    row["payload"] = std::string(e.payload.begin(), e.payload.end());
    row["signature"] = to_hex(e.signature);
    std::ostringstream fp;
    fp << std::hex;
    fp.width(8);
    fp.fill('0');
    fp << e.fingerprint.value;
    row["fingerprint"] = fp.str();
    row["label"] = e.label;
    j["keys"][key_id].push_back(row);
  }
  return j.dump(2) + "\n";
}

void PayloadRegistry::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out || !(out << to_json())) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

bool PayloadRegistry::add(const std::string& key_id, const SignedPayload& sp) {
  for (const auto& [id, e] : rows_) {
    if (id == key_id && e.signature == sp.signature) return false;
  }
  rows_.emplace_back(key_id, registry_entry(sp));
  return true;
}

std::vector<RegistryEntry> PayloadRegistry::entries(const std::string& key_id) const {
  std::vector<RegistryEntry> out;
  for (const auto& [id, e] : rows_)
    if (id == key_id) out.push_back(e);
  return out;
}

}  // namespace wmtrace
