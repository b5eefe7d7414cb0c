#include "wmtrace/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "wmtrace/error.hpp"
#include "wmtrace/image_io.hpp"

namespace wmtrace::bench {
namespace fs = std::filesystem;

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void fill_stats(BenchCell& c) {
  const auto n = static_cast<double>(c.successes_per_run.size());
  double mean = 0.0;
  for (int s : c.successes_per_run) mean += s;
  mean /= n;
  double var = 0.0;
  for (int s : c.successes_per_run) var += (s - mean) * (s - mean);
  var /= n;
  c.success_avg = mean;
  c.success_std = std::sqrt(var);
  c.failure_avg = c.total - mean;
  c.failure_std = c.success_std;  // failures = total - successes
  c.success_rate_pct = c.total > 0 ? 100.0 * mean / c.total : 0.0;
}

}  // namespace

void BenchConfig::validate() const {
  if (runs < 1) throw Error(ErrorCode::InvalidArgument, "runs must be >= 1");
  if (schemes.empty()) throw Error(ErrorCode::EmptyRequest, "no schemes selected");
  if (attacks.empty()) throw Error(ErrorCode::EmptyRequest, "no attacks selected");
  if (workers < 0) throw Error(ErrorCode::InvalidArgument, "workers must be >= 0");
  for (const auto& a : attacks) a.validate();
  params.bit.validate();
  params.spread.validate();
}

const BenchCell& BenchReport::cell(Scheme s, attacks::AttackKind kind) const {
  for (const auto& c : cells)
    if (c.scheme == s && c.attack.kind == kind) return c;
  throw Error(ErrorCode::InvalidArgument, "no bench cell for " + std::string(scheme_name(s)) + "/" +
                                              std::string(attacks::kind_name(kind)));
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && io::is_image_file(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

BenchReport run_bench(const BenchConfig& cfg, const KeyPair& kp, const ProgressFn& progress) {
  cfg.validate();
  BenchReport report;
  report.runs = cfg.runs;
  report.key_id = kp.key_id();

  std::vector<Raster> images;
  for (const auto& p : list_images(cfg.corpus_dir)) {
    try {
      images.push_back(io::load_image(p));
      report.images.push_back(p.filename().string());
    } catch (const Error&) {
      report.skipped.push_back(p.filename().string());
    }
  }
  if (images.empty()) throw Error(ErrorCode::EmptyRequest, "no readable images in " + cfg.corpus_dir.string());

  const PublicKey& pk = kp.public_key();
  const SchemeParams keyed = keyed_params(cfg.params, pk);
  const std::size_t ns = cfg.schemes.size(), na = cfg.attacks.size(), ni = images.size();
  // hits[run][image][scheme][attack]
  std::vector<std::uint8_t> hits(static_cast<std::size_t>(cfg.runs) * ni * ns * na, 0);
  auto slot = [&](int r, std::size_t i, std::size_t s, std::size_t a) {
    return ((static_cast<std::size_t>(r) * ni + i) * ns + s) * na + a;
  };

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(cfg.workers > 0 ? cfg.workers : hw, ni);

  for (int r = 0; r < cfg.runs; ++r) {
    const PayloadSpec spec{cfg.user_id, 1, cfg.timestamp_base + r};
    const SignedPayload sp = sign_payload(kp, generate_payload(spec));
    const RegistryEntry expected = registry_entry(sp);
    const std::span<const RegistryEntry> candidates(&expected, 1);

    std::atomic<std::size_t> next{0}, done{0};
    std::mutex err_mu, progress_mu;
    std::optional<std::string> failure;
    auto work = [&] {
      for (std::size_t i = next++; i < ni; i = next++) {
        try {
          for (std::size_t s = 0; s < ns; ++s) {
            Raster encoded;
            try {
              encoded = encode_scheme(cfg.schemes[s], images[i], sp, keyed);
            } catch (const Error& e) {
              if (e.code() == ErrorCode::CapacityError || e.code() == ErrorCode::CarrierTooSmall) continue;
              throw;
            }
            for (std::size_t a = 0; a < na; ++a) {
              Raster attacked;
              try {
                attacked = attacks::apply_attack(encoded, cfg.attacks[a]);
              } catch (const Error& e) {
                if (e.code() == ErrorCode::CarrierTooSmall) continue;
                throw;
              }
              if (verify_scheme(cfg.schemes[s], attacked, candidates, pk, keyed).valid) hits[slot(r, i, s, a)] = 1;
            }
          }
        } catch (const std::exception& e) {
          std::lock_guard lock(err_mu);
          if (!failure) failure = report.images[i] + ": " + e.what();
        }
        const std::size_t d = ++done;
        if (progress) {
          std::lock_guard lock(progress_mu);
          progress(r, d, ni);
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) throw Error(ErrorCode::IoError, "bench failed on " + *failure);
  }

  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      BenchCell c;
      c.scheme = cfg.schemes[s];
      c.attack = cfg.attacks[a];
      c.total = static_cast<int>(ni);
      for (int r = 0; r < cfg.runs; ++r) {
        int k = 0;
        for (std::size_t i = 0; i < ni; ++i) k += hits[slot(r, i, s, a)];
        c.successes_per_run.push_back(k);
      }
      fill_stats(c);
      report.cells.push_back(std::move(c));
    }
  }
  return report;
}

std::string report_csv_header() {
  return "scheme,attack,total,success_avg,success_std,success_rate_pct,failure_avg,failure_std";
}

std::string report_to_csv(const BenchReport& report) {
  std::string out = report_csv_header() + "\n";
  for (const auto& c : report.cells) {
    out += std::string(scheme_name(c.scheme)) + "," + std::string(attacks::kind_name(c.attack.kind)) + "," +
           std::to_string(c.total) + "," + fixed4(c.success_avg) + "," + fixed4(c.success_std) + "," +
           fixed4(c.success_rate_pct) + "," + fixed4(c.failure_avg) + "," + fixed4(c.failure_std) + "\n";
  }
  return out;
}

std::string report_to_json(const BenchReport& report) {
  nlohmann::ordered_json j;
  j["runs"] = report.runs;
  j["key_id"] = report.key_id;
  j["images"] = report.images;
  j["skipped"] = report.skipped;
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : report.cells) {
    nlohmann::ordered_json e;
    e["scheme"] = scheme_name(c.scheme);
    e["attack"] = attacks::kind_name(c.attack.kind);
    e["total"] = c.total;
    e["successes_per_run"] = c.successes_per_run;
    e["success_avg"] = c.success_avg;
    e["success_std"] = c.success_std;
    e["success_rate_pct"] = c.success_rate_pct;
    e["failure_avg"] = c.failure_avg;
    e["failure_std"] = c.failure_std;
    cells.push_back(e);
  }
  j["cells"] = cells;
  return j.dump(2) + "\n";
}

void write_report(const BenchReport& report, const fs::path& csv_path) {
  if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
  std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << report_to_csv(report))) throw Error(ErrorCode::IoError, "cannot write " + csv_path.string());
}

BenchReport parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != report_csv_header())
    throw Error(ErrorCode::FormatError, "bench CSV header mismatch");
  BenchReport report;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string tok; std::getline(ls, tok, ',');) f.push_back(tok);
    if (f.size() != 8) throw Error(ErrorCode::FormatError, "bench CSV line " + std::to_string(lineno) + ": 8 fields");
    BenchCell c;
    try {
      c.scheme = parse_scheme(f[0]);
      c.attack.kind = attacks::parse_kind(f[1]);
      c.total = std::stoi(f[2]);
      c.success_avg = std::stod(f[3]);
      c.success_std = std::stod(f[4]);
      c.success_rate_pct = std::stod(f[5]);
      c.failure_avg = std::stod(f[6]);
      c.failure_std = std::stod(f[7]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::FormatError, "bench CSV line " + std::to_string(lineno) + ": bad number");
    }
    report.cells.push_back(c);
  }
  return report;
}

}  // namespace wmtrace::bench
