// Acceptance suite: prints one PASS/FAIL line per criterion, with details
// indented below it. Exit status is the number of failed criteria that
// could be evaluated; a criterion whose input data is absent still prints
// FAIL but is counted separately (see the summary line).

#include "sigtime/bench.hpp"
#include "sigtime/bundle.hpp"

#include "gradcheck.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <random>
#include <sstream>

using namespace sigtime;
namespace fs = std::filesystem;

namespace {

// Tolerances and limits, fixed here rather than configurable.
constexpr double kOracleTol = 1e-12;
constexpr int kOracleInstances = 200;
constexpr double kOracleSeconds = 60.0;
constexpr double kGradTol = 1e-4;
constexpr std::size_t kGradSamplesPerKind = 100;
constexpr double kGradSeconds = 120.0;
constexpr double kSoftminTol = 1e-6;
constexpr double kSoftminGap = 0.01;
constexpr double kKdePeak = 7.9788;
constexpr double kKdePeakTol = 1e-3;
constexpr double kKdeMassTol = 1e-3;
constexpr double kSyntheticAccuracy = 0.95;
constexpr double kSyntheticLocalized = 0.80;
constexpr double kSyntheticSeconds = 180.0;
constexpr double kBenchTargetSeconds = 45.0 * 60.0;
constexpr double kSfeMin = 0.95;
constexpr double kSptMax = 0.65;
constexpr double kScalingRatio = 4.0;

struct BenchTarget
{
  const char* name;
  double minimum;
  double reported;
};

constexpr BenchTarget kBenchTargets[] = {
  { "GunPoint", 0.90, 0.961 },
  { "ECG200", 0.80, 0.853 },
  { "Coffee", 0.90, 0.957 },
  { "Strawberry", 0.90, 0.950 },
  { "SonyAIBORobotSurface1", 0.82, 0.879 },
};

enum class Outcome
{
  Pass,
  Fail,
  Unavailable
};

struct Verdict
{
  Outcome outcome = Outcome::Pass;
  std::string summary;
  std::vector<std::string> details;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Verdict oracle_equivalence()
{
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double err_seq = 0, err_win = 0, err_dtw = 0, err_ig = 0;
  std::size_t offset_mismatch = 0, theta_mismatch = 0;
  for (int trial = 0; trial < kOracleInstances; ++trial) {
    std::size_t m = 10 + rng() % 41;
    auto t = oracle::random_series(rng, m);
    auto s = oracle::random_series(rng, 1 + rng() % 10);
    auto r = seq_dist(s, t);
    auto [d, o] = oracle::seq_dist(s, t);
    err_seq = std::max(err_seq, std::abs(r.dist - d));
    offset_mismatch += r.best_offset != o;

    std::size_t len = 10 + rng() % (m - 9), step = 1 + rng() % len;
    std::vector<std::vector<double>> sigs;
    for (int j = 0; j < 3; ++j)
      sigs.push_back(oracle::random_series(rng, 1 + rng() % std::min<std::size_t>(10, len)));
    WindowGrid grid(m, len, step);
    auto f = windowed_features<double>(t, sigs, grid, 10.0, DistMode::Hard);
    auto ref = oracle::windowed_hard(t, sigs, len, step);
    for (std::size_t j = 0; j < sigs.size(); ++j)
      for (std::size_t q = 0; q < grid.count; ++q)
        err_win = std::max(err_win, std::abs(f[j * grid.count + q] - ref[j][q]));

    auto a = oracle::random_series(rng, 1 + rng() % 8);
    auto b = oracle::random_series(rng, 1 + rng() % 8);
    err_dtw = std::max(err_dtw, std::abs(dtw_distance(a, b) - oracle::dtw_exhaustive(a, b)));

    std::size_t n = 4 + rng() % 30;
    std::vector<double> dist = oracle::random_series(rng, n);
    for (auto& v : dist)
      v = std::round(v * 8.0) / 8.0; // ties exercise the split search
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i)
      labels[i] = static_cast<int>(rng() % 2);
    labels[0] = 0;
    labels[1] = 1;
    auto split = information_gain(dist, labels);
    auto [theta, ig] = oracle::information_gain(dist, labels);
    err_ig = std::max(err_ig, std::abs(split.ig - ig));
    theta_mismatch += std::abs(split.theta - theta) > kOracleTol;
  }
  double secs = seconds_since(t0);
  double worst = std::max({ err_seq, err_win, err_dtw, err_ig });
  Verdict v;
  bool ok = worst <= kOracleTol && offset_mismatch == 0 && theta_mismatch == 0 &&
            secs < kOracleSeconds;
  v.outcome = ok ? Outcome::Pass : Outcome::Fail;
  v.summary = std::to_string(kOracleInstances) + " instances, max abs error " +
              fmt("%.3g", worst) + " (tol 1e-12), " + fmt("%.2f", secs) + " s";
  v.details = { "seq_dist " + fmt("%.3g", err_seq) + ", offset mismatches " +
                  std::to_string(offset_mismatch),
                "windowed_features " + fmt("%.3g", err_win),
                "dtw_distance " + fmt("%.3g", err_dtw),
                "information_gain " + fmt("%.3g", err_ig) + ", threshold mismatches " +
                  std::to_string(theta_mismatch) };
  return v;
}

Verdict gradient_correctness()
{
  auto t0 = std::chrono::steady_clock::now();
  // Small data, but wide enough that every parameter class holds at least
  // kGradSamplesPerKind entries.
  gradcheck::ProblemSpec spec;
  spec.d_model = 100;
  spec.heads = 4;
  spec.ffn_dim = 16;
  spec.sig_lengths.clear();
  for (std::size_t j = 0; j < 24; ++j)
    spec.sig_lengths.push_back(3 + j % 4);
  auto p = gradcheck::make_problem(spec, 17);
  auto res = gradcheck::check(p, kGradSamplesPerKind, 18);

  auto tiny = gradcheck::make_problem({}, 19);
  auto all = gradcheck::check(tiny, std::numeric_limits<std::size_t>::max(), 20);
  double secs = seconds_since(t0);

  Verdict v;
  bool ok = secs < kGradSeconds;
  double worst = 0.0;
  for (auto kind : { ParamKind::Input, ParamKind::Signature, ParamKind::Attention,
                     ParamKind::LayerNorm, ParamKind::FeedForward, ParamKind::Head }) {
    auto it = res.find(kind);
    std::size_t checked = it == res.end() ? 0 : it->second.checked;
    double err = it == res.end() ? 0.0 : it->second.max_rel_error;
    double tiny_err = all.count(kind) ? all.at(kind).max_rel_error : 0.0;
    ok = ok && checked >= kGradSamplesPerKind && err < kGradTol && tiny_err < kGradTol;
    worst = std::max({ worst, err, tiny_err });
    v.details.push_back(to_string(kind) + ": " + std::to_string(checked) + " sampled, max rel " +
                        fmt("%.3g", err) + "; exhaustive tiny model " +
                        std::to_string(all.count(kind) ? all.at(kind).checked : 0) +
                        " params, max rel " + fmt("%.3g", tiny_err));
  }
  v.outcome = ok ? Outcome::Pass : Outcome::Fail;
  v.summary = "max relative error " + fmt("%.3g", worst) + " (tol 1e-4), " + fmt("%.1f", secs) +
              " s";
  return v;
}

Verdict softmin_limit()
{
  std::mt19937_64 rng(5);
  const double alphas[] = { 1, 10, 100, 1e3, 1e4 };
  int instances = 0;
  std::size_t non_monotone = 0;
  double worst_at_max = 0.0;
  while (instances < 100) {
    auto t = oracle::random_series(rng, 10 + rng() % 40);
    auto s = oracle::random_series(rng, 2 + rng() % 8);
    auto profile = offset_distances<double>(s, t);
    if (profile.size() < 2)
      continue;
    std::vector<double> sorted(profile);
    std::sort(sorted.begin(), sorted.end());
    if (sorted[1] - sorted[0] < kSoftminGap)
      continue;
    ++instances;
    double hard = seq_dist(s, t).dist;
    double prev = std::numeric_limits<double>::infinity();
    for (double a : alphas) {
      double gap = std::abs(soft_seq_dist(s, t, a) - hard);
      non_monotone += gap > prev;
      prev = gap;
    }
    worst_at_max = std::max(worst_at_max, prev);
  }
  Verdict v;
  v.outcome = non_monotone == 0 && worst_at_max < kSoftminTol ? Outcome::Pass : Outcome::Fail;
  v.summary = std::to_string(instances) + " instances with gap >= 0.01, |soft - hard| at alpha 1e4 <= " +
              fmt("%.3g", worst_at_max) + ", monotonicity violations " +
              std::to_string(non_monotone);
  return v;
}

Verdict kde_check()
{
  std::vector<double> one{ 0.5 };
  double peak = kde_density(one, kKdeBandwidth, one)[0];
  std::mt19937_64 rng(9);
  auto scores = oracle::random_series(rng, 40);
  auto grid = linear_grid(-0.3, 1.3, 4001);
  double mass = oracle::trapezoid(grid, kde_density(scores, kKdeBandwidth, grid));
  Verdict v;
  v.outcome = std::abs(peak - kKdePeak) <= kKdePeakTol && std::abs(mass - 1.0) <= kKdeMassTol
                ? Outcome::Pass
                : Outcome::Fail;
  v.summary = "peak " + fmt("%.6f", peak) + " (expect 7.9788 +- 1e-3), mass on [-0.3,1.3] " +
              fmt("%.6f", mass);
  return v;
}

RunConfig synthetic_config()
{
  RunConfig cfg;
  cfg.dataset_name = "motif";
  cfg.epochs = 50;
  return cfg;
}

Verdict synthetic_end_to_end()
{
  auto t0 = std::chrono::steady_clock::now();
  auto train = synthetic::motif_dataset(60, 60, 1);
  auto test = synthetic::motif_dataset(60, 60, 2);
  auto fitted = fit(train.data, synthetic_config());
  double acc = predict(fitted.model, test.data).accuracy;

  const auto& sigs = fitted.model.signatures;
  std::size_t top = 0;
  for (std::size_t j = 1; j < sigs.size(); ++j)
    if (sigs[j].ig > sigs[top].ig)
      top = j;
  const auto& s = sigs[top].values;
  std::size_t positives = 0, localized = 0;
  for (std::size_t i = 0; i < test.data.size(); ++i) {
    if (!test.motif_start[i])
      continue;
    ++positives;
    std::size_t off = seq_dist(s, test.data[i].values).best_offset;
    std::size_t lo = std::max(off, *test.motif_start[i]);
    std::size_t hi = std::min(off + s.size(), *test.motif_start[i] + synthetic::kMotifLength);
    std::size_t need = (std::min(s.size(), synthetic::kMotifLength) + 1) / 2;
    localized += hi > lo && hi - lo >= need;
  }
  double frac = static_cast<double>(localized) / static_cast<double>(positives);
  double secs = seconds_since(t0);
  Verdict v;
  v.outcome = acc >= kSyntheticAccuracy && frac >= kSyntheticLocalized &&
                  fitted.model.history.size() <= 50 && secs < kSyntheticSeconds
                ? Outcome::Pass
                : Outcome::Fail;
  v.summary = "test accuracy " + fmt("%.3f", acc) + " (>= 0.95), top signature on spike in " +
              std::to_string(localized) + "/" + std::to_string(positives) + " positives (" +
              fmt("%.2f", frac) + " >= 0.80), " + fmt("%.1f", secs) + " s";
  v.details = { "epochs run " + std::to_string(fitted.model.history.size()) + ", best epoch " +
                  std::to_string(fitted.model.best_epoch),
                "top signature: length " + std::to_string(s.size()) + ", IG " +
                  fmt("%.4f", sigs[top].ig) };
  return v;
}

fs::path ucr_dir()
{
  if (const char* env = std::getenv("SIGTIME_UCR_DIR"))
    return env;
  return fs::path(SIGTIME_TEST_DATA_DIR) / "ucr";
}

Verdict benchmark()
{
  auto t0 = std::chrono::steady_clock::now();
  auto dir = ucr_dir();
  Verdict v;
  std::size_t evaluated = 0, below = 0, missing = 0;
  for (const auto& target : kBenchTargets) {
    auto pair = find_ucr_pair(dir, target.name);
    if (!pair) {
      ++missing;
      v.details.push_back(std::string(target.name) + ": not evaluated, no " + target.name +
                          "_TRAIN/_TEST under " + dir.string());
      continue;
    }
    // every dataset uses the default configuration, which is also the
    // Strawberry ablation configuration
    RunConfig cfg;
    cfg.dataset_name = target.name;
    auto train = load_ucr_tsv(pair->train.string());
    auto test = load_ucr_tsv(pair->test.string());
    auto r = run_variant(target.name, train, test, Variant::JT, cfg, kBenchSeeds);
    ++evaluated;
    bool ok = r.mean_accuracy >= target.minimum;
    below += !ok;
    std::ostringstream acc;
    for (std::size_t i = 0; i < r.accuracies.size(); ++i)
      acc << (i ? "," : "") << fmt("%.3f", r.accuracies[i]);
    v.details.push_back(std::string(target.name) + ": mean " + fmt("%.3f", r.mean_accuracy) +
                        (ok ? " >= " : " < ") + fmt("%.2f", target.minimum) + " (reported " +
                        fmt("%.3f", target.reported) + "), seeds [" + acc.str() + "], " +
                        fmt("%.1f", r.seconds) + " s");
  }
  double secs = seconds_since(t0);
  v.outcome = below > 0      ? Outcome::Fail
              : missing > 0  ? Outcome::Unavailable
                             : Outcome::Pass;
  v.summary = std::to_string(evaluated) + "/5 datasets evaluated, " + std::to_string(below) +
              " below target, " + std::to_string(missing) + " missing, " + fmt("%.0f", secs) +
              " s (target < " + fmt("%.0f", kBenchTargetSeconds) + " s)";
  return v;
}

Verdict variant_ordering()
{
  auto train = synthetic::offset_dataset(100, 60, 11);
  auto test = synthetic::offset_dataset(100, 60, 12);
  RunConfig cfg;
  cfg.dataset_name = "offset";
  cfg.epochs = 100;
  auto sfe = run_variant("offset", train, test, Variant::SFE, cfg, { 0 });
  auto spt = run_variant("offset", synthetic::normalize_samples(train),
                         synthetic::normalize_samples(test), Variant::SPT, cfg, { 0 });
  Verdict v;
  v.outcome = sfe.mean_accuracy >= kSfeMin && spt.mean_accuracy <= kSptMax ? Outcome::Pass
                                                                           : Outcome::Fail;
  v.summary = "S-FE " + fmt("%.3f", sfe.mean_accuracy) + " (>= 0.95), SP-T on normalized " +
              fmt("%.3f", spt.mean_accuracy) + " (<= 0.65)";
  return v;
}

Verdict scalability()
{
  RunConfig cfg;
  cfg.epochs = 5;
  auto rows = scalability_sweep({ 200, 400, 800 }, { 100 }, cfg);
  double r1 = rows[1].seconds / rows[0].seconds, r2 = rows[2].seconds / rows[1].seconds;
  Verdict v;
  v.outcome = r1 < kScalingRatio && r2 < kScalingRatio ? Outcome::Pass : Outcome::Fail;
  v.summary = "t(400)/t(200) " + fmt("%.2f", r1) + ", t(800)/t(400) " + fmt("%.2f", r2) +
              " (< 4), m 100, 5 epochs";
  for (const auto& r : rows)
    v.details.push_back("N " + std::to_string(r.n) + ": " + fmt("%.2f", r.seconds) + " s");
  return v;
}

Verdict determinism()
{
  auto data = synthetic::motif_dataset(40, 60, 3).data;
  RunConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 7;
  auto dir = fs::temp_directory_path() / "sigtime_acceptance";
  fs::create_directories(dir);
  std::vector<std::string> bytes;
  for (int run = 0; run < 2; ++run) {
    auto fitted = fit(data, cfg);
    auto path = dir / ("bundle" + std::to_string(run) + ".json");
    write_bundle(path, export_bundle(fitted.model, data, data, {}));
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    bytes.push_back(ss.str());
  }
  fs::remove_all(dir);
  Verdict v;
  v.outcome = bytes[0] == bytes[1] && !bytes[0].empty() ? Outcome::Pass : Outcome::Fail;
  v.summary = "two runs, bundle sizes " + std::to_string(bytes[0].size()) + " and " +
              std::to_string(bytes[1].size()) + " bytes, " +
              (bytes[0] == bytes[1] ? "identical" : "different");
  return v;
}

} // namespace

int main()
{
  struct Criterion
  {
    const char* name;
    Verdict (*run)();
  };
  const Criterion criteria[] = {
    { "oracle-equivalence", oracle_equivalence },
    { "gradient-correctness", gradient_correctness },
    { "softmin-limit", softmin_limit },
    { "kde", kde_check },
    { "synthetic-end-to-end", synthetic_end_to_end },
    { "benchmark-reproduction", benchmark },
    { "variant-ordering", variant_ordering },
    { "scalability-trend", scalability },
    { "determinism", determinism },
  };

  int failed = 0, unavailable = 0, passed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.outcome = Outcome::Fail;
      v.summary = std::string("exception: ") + e.what();
    }
    const char* tag = v.outcome == Outcome::Pass ? "PASS" : "FAIL";
    std::cout << tag << "  " << c.name << ": " << v.summary
              << (v.outcome == Outcome::Unavailable ? " [input data unavailable]" : "") << "\n";
    for (const auto& d : v.details)
      std::cout << "      " << d << "\n";
    std::cout.flush();
    passed += v.outcome == Outcome::Pass;
    failed += v.outcome == Outcome::Fail;
    unavailable += v.outcome == Outcome::Unavailable;
  }
  std::cout << "summary: " << passed << " passed, " << failed << " failed, " << unavailable
            << " failed for lack of input data\n";
  return failed;
}
