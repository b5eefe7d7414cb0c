// Acceptance suite: one PASS/FAIL line per primary criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>

#include "synth.hpp"
#include "wmtrace/attacks.hpp"
#include "wmtrace/bench.hpp"
#include "wmtrace/bitlevel.hpp"
#include "wmtrace/detector.hpp"
#include "wmtrace/error.hpp"
#include "wmtrace/image_io.hpp"
#include "wmtrace/payload.hpp"
#include "wmtrace/pipeline.hpp"
#include "wmtrace/signal.hpp"
#include "wmtrace/spread.hpp"

namespace fs = std::filesystem;
using namespace wmtrace;
using attacks::AttackKind;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] C%d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double rate(const bench::BenchReport& r, Scheme s, AttackKind k) { return r.cell(s, k).success_rate_pct; }

// Two Gaussian clusters in embedding space; labels alternate.
std::vector<detector::EmbeddingPair> clusters(int per_class, int d, std::uint64_t seed) {
  detector::Rng rng(seed);
  auto normal = [&] {
    const double u1 = std::max(rng.uniform(), 1e-300), u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  };
  detector::Vector mu_img[2], mu_txt[2];
  for (int c = 0; c < 2; ++c) {
    mu_img[c] = detector::Vector(d);
    mu_txt[c] = detector::Vector(d);
    for (int i = 0; i < d; ++i) {
      mu_img[c][i] = normal();
      mu_txt[c][i] = normal();
    }
  }
  std::vector<detector::EmbeddingPair> out;
  for (int n = 0; n < 2 * per_class; ++n) {
    const int c = n % 2;
    detector::EmbeddingPair p;
    p.id = "s" + std::to_string(n);
    p.label = c;
    p.e_img = detector::Vector(d);
    p.e_txt = detector::Vector(d);
    for (int i = 0; i < d; ++i) {
      p.e_img[i] = mu_img[c][i] + 0.5 * normal();
      p.e_txt[i] = mu_txt[c][i] + 0.5 * normal();
    }
    out.push_back(std::move(p));
  }
  return out;
}

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        den += 1.0;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return num / den;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "wmtrace_acceptance";
  const fs::path fixtures = WMTRACE_FIXTURE_DIR;
  fs::create_directories(work);

  const KeyPair kp = KeyPair::from_pem(read_file(fixtures / "keys" / kPrivateKeyFile));
  const PublicKey& pk = kp.public_key();
  const fs::path corpus = work / "corpus";
  fs::remove_all(corpus);
  const auto paths = testkit::write_corpus(corpus, 50, 20240601);
  std::fprintf(stderr, "corpus: %zu images in %s\n", paths.size(), corpus.string().c_str());

  // C1: LSB clean round trip, timed end to end.
  {
    const auto t0 = Clock::now();
    const SignedPayload sp = sign_payload(kp, generate_payload({"acceptance-user", 1, 1700000000}));
    int ok = 0;
    for (const auto& p : paths) {
      const Raster img = io::load_image(p);
      const Bytes sig = bitlevel::decode_lsb(bitlevel::encode_lsb(img, sp), kRsaBits);
      ok += verify_signature(pk, sp.payload_bytes, sig) ? 1 : 0;
    }
    const double dt = seconds_since(t0);
    report(1, "lsb_clean_round_trip", ok == 50 && dt < 30.0,
           std::to_string(ok) + "/50 verified in " + fmt("%.2f s (limit 30 s)", dt));
  }

  bench::BenchConfig cfg;
  cfg.corpus_dir = corpus;
  cfg.runs = 10;
  const auto tb = Clock::now();
  const bench::BenchReport br = bench::run_bench(cfg, kp);
  std::fprintf(stderr, "bench: %.1f s\n%s", seconds_since(tb), bench::report_to_csv(br).c_str());

  // C1 (bench form): LSB clean 100% with std 0.
  {
    const auto& c = br.cell(Scheme::Lsb, AttackKind::None);
    report(1, "lsb_clean_bench_cell", c.success_rate_pct == 100.0 && c.success_std == 0.0,
           "rate " + fmt("%.4f%%", c.success_rate_pct) + ", std " + fmt("%.4f", c.success_std));
  }

  // C2: JPEG collapse of the bit-level schemes, exactly zero successes.
  {
    bool ok = true;
    std::string detail;
    for (Scheme s : {Scheme::Lsb, Scheme::Dct, Scheme::Dwt}) {
      const auto& c = br.cell(s, AttackKind::Jpeg);
      int total = 0;
      for (int k : c.successes_per_run) total += k;
      ok = ok && total == 0;
      detail += std::string(scheme_name(s)) + "=" + std::to_string(total) + " ";
    }
    report(2, "jpeg_collapse_bit_level", ok, "successes over all runs: " + detail);
  }

  // C3: spread-spectrum robustness.
  {
    struct Req {
      Scheme s;
      AttackKind k;
      double min;
    };
    const Req reqs[] = {{Scheme::Ss, AttackKind::GaussianBlur, 85},    {Scheme::Ss, AttackKind::Jpeg, 85},
                        {Scheme::Ss, AttackKind::Resize, 85},          {Scheme::DwtSs, AttackKind::GaussianBlur, 85},
                        {Scheme::DwtSs, AttackKind::Jpeg, 60},         {Scheme::DwtSs, AttackKind::Resize, 85}};
    bool ok = true;
    std::string detail;
    for (const auto& r : reqs) {
      const double v = rate(br, r.s, r.k);
      ok = ok && v >= r.min;
      detail += std::string(scheme_name(r.s)) + "/" + std::string(attacks::kind_name(r.k)) + "=" +
                fmt("%.1f", v) + (v >= r.min ? "" : "(<" + fmt("%.0f", r.min) + ")") + " ";
    }
    report(3, "spread_spectrum_robustness", ok, detail);
  }

  // C4: qualitative ordering.
  {
    bool ok = true;
    std::string detail;
    for (AttackKind k : {AttackKind::GaussianBlur, AttackKind::Resize}) {
      const double ss = std::min(rate(br, Scheme::Ss, k), rate(br, Scheme::DwtSs, k));
      const double bit = std::max(rate(br, Scheme::Dct, k), rate(br, Scheme::Dwt, k));
      ok = ok && ss > bit;
      detail += std::string(attacks::kind_name(k)) + ": minSS " + fmt("%.1f", ss) + " > maxDCT/DWT " +
                fmt("%.1f", bit) + "; ";
    }
    for (Scheme s : kAllSchemes) {
      const double clean = rate(br, s, AttackKind::None);
      for (AttackKind k : {AttackKind::GaussianBlur, AttackKind::Jpeg, AttackKind::Resize}) {
        if (clean < rate(br, s, k)) {
          ok = false;
          detail += std::string(scheme_name(s)) + " clean<" + std::string(attacks::kind_name(k)) + "; ";
        }
      }
    }
    report(4, "robustness_ordering", ok, detail + "clean >= attacked checked for all schemes");
  }

  // C5: crypto soundness.
  bool corr_identity = true;
  {
    // Single-bit tampering of LSB-embedded signatures.
    int false_ok = 0;
    std::vector<Raster> imgs;
    for (std::size_t i = 0; i < 10; ++i) imgs.push_back(io::load_image(paths[i]));
    for (int t = 0; t < 1000; ++t) {
      const SignedPayload sp =
          sign_payload(kp, generate_payload({"tamper-" + std::to_string(t % 7), 1, 1700000000 + t}));
      Raster enc = bitlevel::encode_lsb(imgs[t % imgs.size()], sp);
      const int bit = (t * 389) % kRsaBits;  // 389 is coprime with 1024: covers every position
      enc.data[static_cast<std::size_t>(bit) * 3 + 2] ^= 1;
      if (verify_signature(pk, sp.payload_bytes, bitlevel::decode_lsb(enc, kRsaBits))) ++false_ok;
    }
    // Spread-spectrum detection on unwatermarked images.
    const SignedPayload sp = sign_payload(kp, generate_payload({"acceptance-user", 1, 1700000000}));
    const Fingerprint32 fp = derive_fingerprint(sp);
    spread::SpreadParams params;
    params.prn_seed = prn_seed_from(pk);
    int fv_ss = 0, fv_dwt = 0;
    for (int i = 0; i < 500; ++i) {
      const auto [w, h] = testkit::corpus_sizes()[i % testkit::corpus_sizes().size()];
      const Raster img = testkit::synth_image(w, h, 900000 + i);
      for (int which = 0; which < 2; ++which) {
        const auto d = which == 0 ? spread::detect_ss(img, fp, params) : spread::detect_dwtss(img, fp, params);
        corr_identity = corr_identity && d.match.correlation == 1.0 - 2.0 * d.match.ber;
        (which == 0 ? fv_ss : fv_dwt) += d.match.valid ? 1 : 0;
      }
    }
    // Chance of corr >= 0.5 (>= 24 of 32 bits agreeing) for an unrelated fingerprint.
    double tail = 0.0;
    for (int k = 24; k <= 32; ++k) tail += std::exp(std::lgamma(33) - std::lgamma(k + 1) - std::lgamma(33 - k)) / 4294967296.0;
    const double r_ss = fv_ss / 500.0, r_dwt = fv_dwt / 500.0;
    report(5, "crypto_soundness", false_ok == 0 && r_ss < 1e-3 && r_dwt < 1e-3,
           "tamper false verifications " + std::to_string(false_ok) + "/1000; false-valid SS " +
               std::to_string(fv_ss) + "/500, DWT-SS " + std::to_string(fv_dwt) + "/500 (binomial tail per image " +
               fmt("%.2e", tail) + ")");
  }

  // C6: numerical identities.
  {
    std::string detail;
    bool ok = corr_identity;
    // corr = 1 - 2 ber over every pair of 32-bit patterns in a sweep.
    for (std::uint32_t a = 0; a < 4096; ++a) {
      const Fingerprint32 x{a * 2654435761u}, y{a * 40503u + 7};
      const auto m = fingerprint_match(x, y);
      ok = ok && m.correlation == 1.0 - 2.0 * m.ber;
    }
    detail += std::string("corr=1-2ber ") + (ok ? "exact" : "violated");
    detector::Rng rng(7);
    Plane p(64, 48);
    for (auto& v : p.values) v = rng.uniform() * 255.0;
    const Plane back = signal::block_dct_inverse(signal::block_dct_forward(p));
    double dct_err = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dct_err = std::max(dct_err, std::abs(back.values[i] - p.values[i]));
    const HaarBands b = signal::haar_dwt_forward(p);
    const Plane hb = signal::haar_dwt_inverse(b);
    double dwt_err = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dwt_err = std::max(dwt_err, std::abs(hb.values[i] - p.values[i]));
    auto energy = [](const Plane& q) {
      double e = 0.0;
      for (double v : q.values) e += v * v;
      return e;
    };
    const double e0 = energy(p);
    const double parseval_dct = std::abs(energy(signal::block_dct_forward(p)) - e0) / e0;
    const double parseval_dwt = std::abs(energy(b.ll) + energy(b.lh) + energy(b.hl) + energy(b.hh) - e0) / e0;
    ok = ok && dct_err <= 1e-9 && dwt_err <= 1e-9 && parseval_dct <= 1e-6 && parseval_dwt <= 1e-6;
    const double half[] = {0.5};
    const int one[] = {1};
    const double quarter[] = {0.25};
    const double bce1 = detector::bce_loss(half, one), bce2 = detector::bce_loss(quarter, one);
    const bool bce_ok = std::abs(bce1 - std::log(2.0)) <= 1e-9 && std::abs(bce2 + std::log(0.25)) <= 1e-9;
    detector::EmbeddingPair pair;
    pair.e_img = detector::Vector(2);
    pair.e_img << 1, 0;
    pair.e_txt = detector::Vector(2);
    pair.e_txt << 0, 1;
    detector::Vector expect(9);
    expect << 1, 0, 0, 1, 1, -1, 0, 0, 0;
    const bool fuse_ok = detector::fuse(pair) == expect;
    ok = ok && bce_ok && fuse_ok;
    detail += "; dct rt " + fmt("%.1e", dct_err) + ", dwt rt " + fmt("%.1e", dwt_err) + ", parseval " +
              fmt("%.1e", std::max(parseval_dct, parseval_dwt)) + ", bce " + (bce_ok ? "ok" : "off") +
              ", fusion d=2 " + (fuse_ok ? "exact" : "mismatch");
    report(6, "numerical_identities", ok, detail);
  }

  // C7: detector.
  detector::DetectorModel trained;
  std::vector<detector::EmbeddingPair> cluster_data;
  {
    // Gradient check against central differences on a small random model.
    detector::Rng rng(11);
    detector::DetectorModel m = detector::DetectorModel::zeros(detector::fused_dim(4), 5, 3);
    auto fill = [&](auto& x) {
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform() * 2.0 - 1.0;
    };
    fill(m.W1), fill(m.b1), fill(m.W2), fill(m.b2), fill(m.w3);
    m.b3 = 0.1;
    detector::Matrix X(6, m.input_dim());
    fill(X);
    detector::Vector y(6);
    y << 1, 0, 1, 1, 0, 0;
    const auto g = detector::loss_and_gradients(m, X, y);
    double worst = 0.0;
    auto check = [&](auto& param, const auto& grad) {
      for (Eigen::Index i = 0; i < param.size(); ++i) {
        const double keep = param.data()[i];
        param.data()[i] = keep + 1e-5;
        const double lp = detector::loss_and_gradients(m, X, y).loss;
        param.data()[i] = keep - 1e-5;
        const double lm = detector::loss_and_gradients(m, X, y).loss;
        param.data()[i] = keep;
        const double num = (lp - lm) / 2e-5, ana = grad.data()[i];
        worst = std::max(worst, std::abs(num - ana) / std::max(1.0, std::abs(num) + std::abs(ana)));
      }
    };
    check(m.W1, g.grad.W1), check(m.b1, g.grad.b1), check(m.W2, g.grad.W2), check(m.b2, g.grad.b2);
    check(m.w3, g.grad.w3);
    {
      const double keep = m.b3;
      m.b3 = keep + 1e-5;
      const double lp = detector::loss_and_gradients(m, X, y).loss;
      m.b3 = keep - 1e-5;
      const double lm = detector::loss_and_gradients(m, X, y).loss;
      m.b3 = keep;
      const double num = (lp - lm) / 2e-5;
      worst = std::max(worst, std::abs(num - g.grad.b3) / std::max(1.0, std::abs(num) + std::abs(g.grad.b3)));
    }

    cluster_data = clusters(500, 32, 2024);
    detector::TrainConfig tc;
    tc.rng_seed = 5;
    const auto t0 = Clock::now();
    const detector::TrainResult tr = detector::train(cluster_data, tc);
    const double dt = seconds_since(t0);
    trained = tr.model;
    std::vector<detector::EmbeddingPair> val;
    for (std::size_t i : tr.validation_indices) val.push_back(cluster_data[i]);
    const detector::Metrics vm = detector::evaluate(tr.model, val);

    bool auc_ok = true;
    detector::Rng arng(99);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = 2 + arng.below(99);
      std::vector<double> s(n);
      std::vector<int> yy(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<double>(arng.below(12)) / 11.0;  // coarse grid forces ties
        yy[i] = arng.uniform() < 0.5 ? 1 : 0;
      }
      yy[0] = 1, yy[1] = 0;
      auc_ok = auc_ok && std::abs(detector::auc_roc(s, yy) - brute_auc(s, yy)) <= 1e-12;
    }
    const bool ok = worst <= 1e-4 && vm.accuracy >= 0.98 && vm.auc >= 0.98 && dt < 60.0 && auc_ok;
    report(7, "detector", ok,
           "grad rel err " + fmt("%.2e", worst) + "; val acc " + fmt("%.4f", vm.accuracy) + ", val AUC " +
               fmt("%.4f", vm.auc) + " after " + std::to_string(tc.epochs) + " epochs in " + fmt("%.1f s", dt) +
               "; brute-force AUC " + (auc_ok ? "equal on 300 datasets" : "MISMATCH"));
  }

  // C8: gating contract over the checked-in fixture set.
  const SignedPayload trace_sp = sign_payload(kp, generate_payload({"trace-user", 1, 1700000123}));
  const RegistryEntry trace_entry = registry_entry(trace_sp);
  const SchemeParams sparams;
  const Raster trace_img =
      encode_scheme(Scheme::Lsb, io::load_image(paths[0]), trace_sp, keyed_params(sparams, pk));
  {
    const auto fixture = detector::load_jsonl(fixtures / "embeddings_gating.jsonl");
    detector::TrainConfig tc;
    tc.rng_seed = 3;
    tc.hidden1 = 32;
    tc.hidden2 = 16;
    tc.epochs = 30;
    const detector::DetectorModel gate = detector::train(fixture, tc).model;
    int n0 = 0, n1 = 0;
    bool ok = true;
    for (const auto& pair : fixture) {
      const auto r = trace(trace_img, pair, gate, pk, std::span(&trace_entry, 1), sparams);
      const bool should = r.harmful_probability >= gate.threshold;
      ok = ok && r.verification.has_value() == should && r.decision == (should ? 1 : 0);
      if (r.identity) ok = ok && r.verification && r.verification->any_valid();
      (should ? n1 : n0)++;
    }
    ok = ok && n0 > 0 && n1 > 0;
    report(8, "gating_contract", ok,
           std::to_string(fixture.size()) + " fixture pairs: " + std::to_string(n1) + " gated to attribution, " +
               std::to_string(n0) + " benign; verification present iff p >= tau");
  }

  // C9: determinism of bench CSV and attribution JSON.
  {
    bench::BenchConfig small;
    small.corpus_dir = work / "det_corpus";
    fs::remove_all(small.corpus_dir);
    testkit::write_corpus(small.corpus_dir, 6, 77);
    small.runs = 2;
    const std::string a = bench::report_to_csv(bench::run_bench(small, kp));
    small.workers = 1;
    const std::string b = bench::report_to_csv(bench::run_bench(small, kp));
    const std::string ra = report_to_json(trace(trace_img, cluster_data[1], trained, pk, std::span(&trace_entry, 1), sparams));
    const std::string rb = report_to_json(trace(trace_img, cluster_data[1], trained, pk, std::span(&trace_entry, 1), sparams));
    const bool round = bench::report_to_csv(bench::parse_report_csv(a)) == a;
    report(9, "determinism", a == b && ra == rb && round,
           std::string("bench CSV ") + (a == b ? "identical" : "DIFFERS") + " across runs (parallel vs serial), " +
               "report JSON " + (ra == rb ? "identical" : "DIFFERS") + ", CSV reparse " +
               (round ? "byte-identical" : "DIFFERS"));
  }

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
