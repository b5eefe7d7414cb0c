#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wmtrace/attacks.hpp"
#include "wmtrace/payload.hpp"
#include "wmtrace/pipeline.hpp"

namespace wmtrace::bench {

struct BenchConfig {
  std::filesystem::path corpus_dir;
  int runs = 10;
  std::vector<Scheme> schemes{kAllSchemes.begin(), kAllSchemes.end()};
  std::vector<attacks::AttackSpec> attacks = attacks::attack_suite();
  // Run r signs the payload v1|user_id|timestamp_base + r.
  std::int64_t timestamp_base = 1700000000;
  std::string user_id = "bench-user";
  int workers = 0;  // 0: hardware concurrency
  SchemeParams params;

  void validate() const;
};

struct BenchCell {
  Scheme scheme = Scheme::Lsb;
  attacks::AttackSpec attack;
  int total = 0;  // images per run
  double success_avg = 0.0;
  double success_std = 0.0;  // population standard deviation over runs
  double success_rate_pct = 0.0;
  double failure_avg = 0.0;
  double failure_std = 0.0;
  std::vector<int> successes_per_run;
};

struct BenchReport {
  std::vector<std::string> images;   // sorted file names that loaded
  std::vector<std::string> skipped;  // unreadable files
  int runs = 0;
  std::string key_id;
  std::vector<BenchCell> cells;  // scheme-major, then attack order

  const BenchCell& cell(Scheme s, attacks::AttackKind kind) const;
};

// Sorted regular files in `dir` with an image extension.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

using ProgressFn = std::function<void(int run, std::size_t done, std::size_t total)>;

BenchReport run_bench(const BenchConfig& cfg, const KeyPair& kp, const ProgressFn& progress = {});

std::string report_csv_header();  // scheme,attack,total,success_avg,...
std::string report_to_csv(const BenchReport& report);
std::string report_to_json(const BenchReport& report);
void write_report(const BenchReport& report, const std::filesystem::path& csv_path);

// Parses a CSV written by report_to_csv (per-run counts are not stored).
BenchReport parse_report_csv(const std::string& text);

}  // namespace wmtrace::bench
