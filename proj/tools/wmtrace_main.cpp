// wmtrace command-line tool.
//
// Machine-readable results (CSV, JSON, verdict lines) go to stdout; progress
// and diagnostics go to stderr. Exit status: 0 ok, 1 domain error, 2 usage.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wmtrace/attacks.hpp"
#include "wmtrace/bench.hpp"
#include "wmtrace/detector.hpp"
#include "wmtrace/error.hpp"
#include "wmtrace/image_io.hpp"
#include "wmtrace/payload.hpp"
#include "wmtrace/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wmtrace;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CliConfig {
  fs::path key_dir = "keys";
  fs::path output_root = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> timestamp;
  fs::path config_file;

  SchemeParams params;
  detector::TrainConfig train;
  std::optional<double> threshold;  // classification threshold override
  fs::path checkpoint;
  int bench_runs = 10;
  int bench_workers = 0;
};

template <typename T>
void take(const json& obj, const char* key, T& dst) {
  if (auto it = obj.find(key); it != obj.end()) dst = it->get<T>();
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw UsageError("config: " + where + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw UsageError("config: unknown key '" + where + "." + k + "'");
  }
}

// Layout:
// {"spread": {...}, "bitlevel": {...}, "train": {...},
//  "detector": {"checkpoint", "threshold"}, "bench": {"runs", "workers"}}
void apply_config_file(CliConfig& cfg) {
  std::ifstream in(cfg.config_file);
  if (!in) throw UsageError("cannot read config file " + cfg.config_file.string());
  json doc;
  try {
    doc = json::parse(in);
    check_keys(doc, "", {"spread", "bitlevel", "train", "detector", "bench"});
    if (doc.contains("spread")) {
      const json& s = doc["spread"];
      check_keys(s, "spread", {"strength", "corr_threshold", "ss_max_chip", "dwtss_max_chip"});
      take(s, "strength", cfg.params.spread.strength);
      take(s, "corr_threshold", cfg.params.spread.corr_threshold);
      take(s, "ss_max_chip", cfg.params.spread.ss_max_chip);
      take(s, "dwtss_max_chip", cfg.params.spread.dwtss_max_chip);
    }
    if (doc.contains("bitlevel")) {
      const json& b = doc["bitlevel"];
      check_keys(b, "bitlevel", {"dct_row", "dct_col", "dct_quant_step", "dwt_quant_step"});
      take(b, "dct_row", cfg.params.bit.dct_row);
      take(b, "dct_col", cfg.params.bit.dct_col);
      take(b, "dct_quant_step", cfg.params.bit.dct_quant_step);
      take(b, "dwt_quant_step", cfg.params.bit.dwt_quant_step);
    }
    if (doc.contains("train")) {
      const json& t = doc["train"];
      check_keys(t, "train", {"learning_rate", "epochs", "batch_size", "rng_seed", "validation_fraction", "hidden1",
                              "hidden2", "dropout_rate", "threshold"});
      take(t, "learning_rate", cfg.train.learning_rate);
      take(t, "epochs", cfg.train.epochs);
      take(t, "batch_size", cfg.train.batch_size);
      take(t, "rng_seed", cfg.train.rng_seed);
      take(t, "validation_fraction", cfg.train.validation_fraction);
      take(t, "hidden1", cfg.train.hidden1);
      take(t, "hidden2", cfg.train.hidden2);
      take(t, "dropout_rate", cfg.train.dropout_rate);
      take(t, "threshold", cfg.train.threshold);
    }
    if (doc.contains("detector")) {
      const json& d = doc["detector"];
      check_keys(d, "detector", {"checkpoint", "threshold"});
      if (d.contains("checkpoint")) cfg.checkpoint = d["checkpoint"].get<std::string>();
      if (d.contains("threshold")) cfg.threshold = d["threshold"].get<double>();
    }
    if (doc.contains("bench")) {
      const json& b = doc["bench"];
      check_keys(b, "bench", {"runs", "workers"});
      take(b, "runs", cfg.bench_runs);
      take(b, "workers", cfg.bench_workers);
    }
  } catch (const json::exception& e) {
    throw UsageError("config " + cfg.config_file.string() + ": " + e.what());
  }
  cfg.params.spread.validate();
  cfg.params.bit.validate();
}

std::int64_t payload_timestamp(const CliConfig& cfg) {
  if (cfg.timestamp) return *cfg.timestamp;
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

fs::path registry_path(const CliConfig& cfg) { return cfg.key_dir / PayloadRegistry::kFileName; }

std::vector<RegistryEntry> registered_entries(const CliConfig& cfg, const PublicKey& pk) {
  return PayloadRegistry::load(registry_path(cfg)).entries(pk.key_id());
}

std::vector<Scheme> parse_scheme_list(const std::string& arg) {
  if (arg == "all") return {kAllSchemes.begin(), kAllSchemes.end()};
  std::vector<Scheme> out;
  std::stringstream ss(arg);
  for (std::string tok; std::getline(ss, tok, ',');) out.push_back(parse_scheme(tok));
  return out;
}

std::string fingerprint_hex(const Fingerprint32& f) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", f.value);
  return buf;
}

void print_verdict(const SchemeVerdict& v, std::span<const RegistryEntry> entries) {
  std::cout << "scheme=" << scheme_name(v.scheme) << " verdict=" << (v.valid ? "VALID" : "INVALID");
  std::cout << std::fixed << std::setprecision(4);
  if (v.correlation) std::cout << " corr=" << *v.correlation;
  if (v.ber) std::cout << " ber=" << *v.ber;
  if (v.recovered_fingerprint) std::cout << " fingerprint=" << fingerprint_hex(*v.recovered_fingerprint);
  if (v.matched_candidate) {
    const RegistryEntry& e = entries[*v.matched_candidate];
    std::cout << " payload=" << std::string(e.payload.begin(), e.payload.end());
  }
  if (!v.error.empty()) std::cout << " error=\"" << v.error << "\"";
  std::cout << "\n";
}

detector::DetectorModel load_model(const CliConfig& cfg) {
  if (cfg.checkpoint.empty()) throw UsageError("a detector checkpoint is required (--checkpoint)");
  detector::DetectorModel m = detector::load_checkpoint(cfg.checkpoint);
  if (cfg.threshold) m.threshold = *cfg.threshold;
  m.validate();
  return m;
}

// ---- subcommands -------------------------------------------------------------

int cmd_keygen(const CliConfig& cfg) {
  const KeyPair kp = keypair_load_or_generate(cfg.key_dir);
  std::cout << "key_id=" << kp.key_id() << "\n";
  std::cerr << "keys in " << cfg.key_dir.string() << "\n";
  return kExitOk;
}

struct EmbedArgs {
  std::string image;
  std::string user_id;
  std::string scheme = "all";
  int rules_version = 1;
  std::string name;
};

int cmd_embed(const CliConfig& cfg, const EmbedArgs& a) {
  const KeyPair kp = keypair_load_or_generate(cfg.key_dir);
  const Raster img = io::load_image(a.image);
  const std::string name = a.name.empty() ? fs::path(a.image).stem().string() : a.name;
  const SignedPayload sp =
      sign_payload(kp, generate_payload({a.user_id, a.rules_version, payload_timestamp(cfg)}), a.user_id);

  PayloadRegistry reg = PayloadRegistry::load(registry_path(cfg));
  if (reg.add(kp.key_id(), sp)) reg.save(registry_path(cfg));

  const std::vector<Scheme> schemes = parse_scheme_list(a.scheme);
  std::cerr << "payload " << std::string(sp.payload_bytes.begin(), sp.payload_bytes.end()) << " fingerprint "
            << fingerprint_hex(derive_fingerprint(sp)) << "\n";
  if (schemes.size() == kAllSchemes.size()) {
    const ProcessResult r = process_single_image(name, img, sp, kp.public_key(), cfg.params, cfg.output_root);
    std::cout << summary_header() << "\n" << summary_row(name, r.verification) << "\n";
    return kExitOk;
  }
  const SchemeParams keyed = keyed_params(cfg.params, kp.public_key());
  for (Scheme s : schemes) {
    const fs::path path = cfg.output_root / name / (is_bit_level(s) ? "Encoded_image" : "Spatial_encoded") /
                          (std::string(scheme_file(s)) + ".png");
    io::save_image(encode_scheme(s, img, sp, keyed), path);
    std::cout << scheme_name(s) << "," << path.string() << "\n";
  }
  return kExitOk;
}

int cmd_decode(const CliConfig& cfg, const std::string& image, const std::string& scheme) {
  const PublicKey pk = load_public_key(cfg.key_dir);
  const Raster img = io::load_image(image);
  const auto entries = registered_entries(cfg, pk);
  if (entries.empty()) std::cerr << "warning: no registered payloads for key " << pk.key_id() << "\n";
  const SchemeParams keyed = keyed_params(cfg.params, pk);
  for (Scheme s : parse_scheme_list(scheme)) print_verdict(verify_scheme(s, img, entries, pk, keyed), entries);
  return kExitOk;
}

int cmd_verify(const CliConfig& cfg, const std::vector<std::string>& images) {
  const PublicKey pk = load_public_key(cfg.key_dir);
  const auto entries = registered_entries(cfg, pk);
  const SchemeParams keyed = keyed_params(cfg.params, pk);
  std::cout << summary_header() << "\n";
  for (const auto& path : images) {
    VerificationResult vr;
    const Raster img = io::load_image(path);
    for (Scheme s : kAllSchemes) vr.at(s) = verify_scheme(s, img, entries, pk, keyed);
    std::cout << summary_row(fs::path(path).stem().string(), vr) << "\n";
  }
  return kExitOk;
}

struct AttackArgs {
  std::string image;
  std::string kind;
  attacks::AttackSpec spec;
  std::string output;
};

int cmd_attack(const CliConfig& cfg, AttackArgs a) {
  a.spec.kind = attacks::parse_kind(a.kind);
  a.spec.validate();
  const Raster out = attacks::apply_attack(io::load_image(a.image), a.spec);
  const fs::path src(a.image);
  const fs::path path = a.output.empty()
                            ? cfg.output_root / attacks::attacked_dir_name(src.stem().string(), a.spec.kind) /
                                  (src.stem().string() + ".png")
                            : fs::path(a.output);
  io::save_image(out, path);
  std::cout << path.string() << "\n";
  return kExitOk;
}

struct BenchArgs {
  std::string corpus;
  std::string schemes = "all";
  std::string user_id = "bench-user";
  std::string report;
};

int cmd_bench(const CliConfig& cfg, const BenchArgs& a) {
  const KeyPair kp = keypair_load_or_generate(cfg.key_dir);
  bench::BenchConfig bc;
  bc.corpus_dir = a.corpus;
  bc.runs = cfg.bench_runs;
  bc.workers = cfg.bench_workers;
  bc.schemes = parse_scheme_list(a.schemes);
  bc.user_id = a.user_id;
  if (cfg.timestamp) bc.timestamp_base = *cfg.timestamp;
  bc.params = cfg.params;
  const bench::BenchReport r = bench::run_bench(bc, kp, [](int run, std::size_t done, std::size_t total) {
    if (done == total) std::cerr << "run " << run + 1 << ": " << done << "/" << total << " images\n";
  });
  for (const auto& s : r.skipped) std::cerr << "skipped unreadable " << s << "\n";
  const fs::path path = a.report.empty() ? cfg.output_root / "bench_report.csv" : fs::path(a.report);
  bench::write_report(r, path);
  std::cout << bench::report_to_csv(r);
  std::cerr << "report written to " << path.string() << "\n";
  return kExitOk;
}

int cmd_train(CliConfig cfg, const std::string& dataset) {
  if (cfg.seed) cfg.train.rng_seed = *cfg.seed;
  if (cfg.threshold) cfg.train.threshold = *cfg.threshold;
  const auto data = detector::load_jsonl(dataset);
  const detector::TrainResult r = detector::train(data, cfg.train);
  const fs::path ckpt = cfg.checkpoint.empty() ? cfg.output_root / "detector.json" : cfg.checkpoint;
  detector::save_checkpoint(r.model, ckpt);
  detector::write_history_csv(r.history, cfg.output_root / "history.csv");
  for (const auto& e : r.history)
    std::fprintf(stderr, "epoch %d loss %.4f acc %.4f val_loss %.4f val_acc %.4f\n", e.epoch, e.train_loss,
                 e.train_accuracy, e.val_loss, e.val_accuracy);
  std::cout << "checkpoint=" << ckpt.string() << "\nbest_epoch=" << r.best_epoch << "\n";
  return kExitOk;
}

int cmd_classify(const CliConfig& cfg, const std::string& dataset) {
  const detector::DetectorModel model = load_model(cfg);
  const auto data = detector::load_jsonl(dataset);
  std::vector<double> scores;
  std::vector<int> labels;
  bool all_labeled = true;
  std::cout << "id,p,label\n";
  for (const auto& pair : data) {
    const detector::Classification c = detector::classify(model, pair);
    std::printf("%s,%.6f,%d\n", pair.id.c_str(), c.p, c.label);
    scores.push_back(c.p);
    if (pair.label) labels.push_back(*pair.label);
    else all_labeled = false;
  }
  std::fflush(stdout);
  if (all_labeled && !data.empty()) {
    try {
      const auto m = detector::metrics_from_scores(scores, labels, model.threshold);
      std::fprintf(stderr, "accuracy %.4f precision %.4f recall %.4f auc %.4f n=%zu\n", m.accuracy, m.precision,
                   m.recall, m.auc, m.count);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateDataset) throw;
      std::cerr << "metrics skipped: single-class dataset\n";
    }
  }
  return kExitOk;
}

struct TraceArgs {
  std::string image;
  std::string embeddings;
  std::string record_id;
};

int cmd_trace(const CliConfig& cfg, const TraceArgs& a) {
  const detector::DetectorModel model = load_model(cfg);
  const PublicKey pk = load_public_key(cfg.key_dir);
  const auto data = detector::load_jsonl(a.embeddings);
  const detector::EmbeddingPair* pair = nullptr;
  for (const auto& p : data)
    if (a.record_id.empty() || p.id == a.record_id) {
      pair = &p;
      break;
    }
  if (!pair) throw Error(ErrorCode::EmptyRequest, "no embedding record '" + a.record_id + "' in " + a.embeddings);
  const auto entries = registered_entries(cfg, pk);
  const AttributionReport r = trace(io::load_image(a.image), *pair, model, pk, entries, cfg.params);
  std::cout << report_to_json(r) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wmtrace: image watermark embedding, verification and tracing"};
  app.require_subcommand(1);
  app.fallthrough();

  CliConfig cfg;
  std::string key_dir = cfg.key_dir.string(), out = cfg.output_root.string(), config, checkpoint;
  std::optional<double> threshold;
  app.add_option("--key-dir", key_dir, "RSA key store directory")->capture_default_str();
  app.add_option("--out", out, "output root directory")->capture_default_str();
  app.add_option("--seed", cfg.seed, "RNG seed for training");
  app.add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--timestamp", cfg.timestamp, "payload timestamp override (seconds)");

  app.add_subcommand("keygen", "load or create the RSA key pair");

  EmbedArgs embed;
  auto* sub_embed = app.add_subcommand("embed", "sign a payload and embed it");
  sub_embed->add_option("image", embed.image)->required()->check(CLI::ExistingFile);
  sub_embed->add_option("--user", embed.user_id, "user id carried in the payload")->required();
  sub_embed->add_option("--scheme", embed.scheme, "lsb|dct|dwt|ss|dwtss|all (comma list allowed)")
      ->capture_default_str();
  sub_embed->add_option("--rules-version", embed.rules_version)->capture_default_str();
  sub_embed->add_option("--name", embed.name, "output name (default: image stem)");

  std::string decode_image, decode_scheme = "all";
  auto* sub_decode = app.add_subcommand("decode", "recover and verify a watermark");
  sub_decode->add_option("image", decode_image)->required()->check(CLI::ExistingFile);
  sub_decode->add_option("--scheme", decode_scheme)->capture_default_str();

  std::vector<std::string> verify_images;
  auto* sub_verify = app.add_subcommand("verify", "five-scheme verification flags as CSV");
  sub_verify->add_option("images", verify_images)->required()->check(CLI::ExistingFile);

  AttackArgs attack;
  auto* sub_attack = app.add_subcommand("attack", "apply a distortion");
  sub_attack->add_option("image", attack.image)->required()->check(CLI::ExistingFile);
  sub_attack->add_option("--kind", attack.kind, "none|gaussian_blur|jpeg|resize")->required();
  sub_attack->add_option("--sigma", attack.spec.blur_sigma)->capture_default_str();
  sub_attack->add_option("--quality", attack.spec.jpeg_quality)->capture_default_str();
  sub_attack->add_option("--factor", attack.spec.resize_factor)->capture_default_str();
  sub_attack->add_option("-o,--output", attack.output, "output file");

  BenchArgs bench_args;
  std::optional<int> runs, workers;
  auto* sub_bench = app.add_subcommand("bench", "robustness benchmark over a corpus");
  sub_bench->add_option("corpus", bench_args.corpus)->required()->check(CLI::ExistingDirectory);
  sub_bench->add_option("--runs", runs);
  sub_bench->add_option("--workers", workers);
  sub_bench->add_option("--schemes", bench_args.schemes)->capture_default_str();
  sub_bench->add_option("--user", bench_args.user_id)->capture_default_str();
  sub_bench->add_option("--report", bench_args.report, "report CSV path");

  std::string dataset;
  auto* sub_train = app.add_subcommand("train", "train the harmful-content detector");
  sub_train->add_option("dataset", dataset)->required()->check(CLI::ExistingFile);
  sub_train->add_option("--checkpoint", checkpoint, "output checkpoint path");
  sub_train->add_option("--threshold", threshold);

  auto* sub_classify = app.add_subcommand("classify", "score embedding pairs");
  sub_classify->add_option("dataset", dataset)->required()->check(CLI::ExistingFile);
  sub_classify->add_option("--checkpoint", checkpoint);
  sub_classify->add_option("--threshold", threshold);

  TraceArgs trace_args;
  auto* sub_trace = app.add_subcommand("trace", "classify, then verify and attribute an image");
  sub_trace->add_option("image", trace_args.image)->required()->check(CLI::ExistingFile);
  sub_trace->add_option("--embeddings", trace_args.embeddings, "JSONL embedding records")
      ->required()
      ->check(CLI::ExistingFile);
  sub_trace->add_option("--record-id", trace_args.record_id, "record to use (default: first)");
  sub_trace->add_option("--checkpoint", checkpoint);
  sub_trace->add_option("--threshold", threshold);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    cfg.key_dir = key_dir;
    cfg.output_root = out;
    if (!config.empty()) {
      cfg.config_file = config;
      apply_config_file(cfg);
    }
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
    if (threshold) cfg.threshold = threshold;
    if (runs) cfg.bench_runs = *runs;
    if (workers) cfg.bench_workers = *workers;

    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "keygen") return cmd_keygen(cfg);
    if (name == "embed") return cmd_embed(cfg, embed);
    if (name == "decode") return cmd_decode(cfg, decode_image, decode_scheme);
    if (name == "verify") return cmd_verify(cfg, verify_images);
    if (name == "attack") return cmd_attack(cfg, attack);
    if (name == "bench") return cmd_bench(cfg, bench_args);
    if (name == "train") return cmd_train(cfg, dataset);
    if (name == "classify") return cmd_classify(cfg, dataset);
    if (name == "trace") return cmd_trace(cfg, trace_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}
