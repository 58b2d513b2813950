#pragma once

#include "sigtime/io.hpp"
#include "sigtime/synthetic.hpp"
#include "sigtime/train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace sigtime {

//! Seeds used for every benchmark row.
inline const std::vector<std::uint64_t> kBenchSeeds = { 0, 1, 2, 3, 4 };

struct BenchResult
{
  std::string dataset;
  Variant variant = Variant::JT;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;
  double mean_accuracy = 0.0;
  double seconds = 0.0; // wall-clock training time summed over seeds
};

using BenchLog = std::function<void(const std::string&)>;

//! Trains one variant per seed on train and scores it on test.
inline BenchResult run_variant(const std::string& name, const Dataset& train,
                               const Dataset& test, Variant variant, const RunConfig& config,
                               const std::vector<std::uint64_t>& seeds = kBenchSeeds,
                               const BenchLog& log = {})
{
  if (seeds.empty())
    throw Error("run_variant: no seeds");
  BenchResult r;
  r.dataset = name;
  r.variant = variant;
  r.seeds = seeds;
  for (auto seed : seeds) {
    RunConfig cfg = config;
    cfg.variant = variant;
    cfg.seed = seed;
    auto t0 = std::chrono::steady_clock::now();
    auto fitted = fit(train, cfg);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double acc = predict(fitted.model, test).accuracy;
    r.accuracies.push_back(acc);
    r.seconds += secs;
    if (log) {
      std::ostringstream msg;
      msg << name << " " << to_string(variant) << " seed=" << seed << " accuracy=" << acc
          << " epochs=" << fitted.model.history.size()
          << " best_epoch=" << fitted.model.best_epoch << " seconds=" << secs;
      log(msg.str());
    }
  }
  r.mean_accuracy = std::accumulate(r.accuracies.begin(), r.accuracies.end(), 0.0) /
                    static_cast<double>(r.accuracies.size());
  return r;
}

//! Tab-separated results table with a header row.
inline std::string results_table(const std::vector<BenchResult>& rows)
{
  std::ostringstream out;
  out << "dataset\tvariant\tmean_accuracy\taccuracies\tseconds\n";
  for (const auto& r : rows) {
    out << r.dataset << '\t' << to_string(r.variant) << '\t' << r.mean_accuracy << '\t';
    for (std::size_t i = 0; i < r.accuracies.size(); ++i)
      out << (i ? "," : "") << r.accuracies[i];
    out << '\t' << r.seconds << '\n';
  }
  return out.str();
}

struct UcrPair
{
  std::filesystem::path train;
  std::filesystem::path test;
};

//! Locates NAME_TRAIN / NAME_TEST files (.tsv, .txt or .csv) either
//! directly in dir or in dir/NAME.
inline std::optional<UcrPair> find_ucr_pair(const std::filesystem::path& dir,
                                            const std::string& name)
{
  for (const auto& base : { dir / name, dir })
    for (const char* ext : { ".tsv", ".txt", ".csv" }) {
      UcrPair p{ base / (name + "_TRAIN" + ext), base / (name + "_TEST" + ext) };
      if (std::filesystem::is_regular_file(p.train) && std::filesystem::is_regular_file(p.test))
        return p;
    }
  return std::nullopt;
}

struct SweepRow
{
  std::size_t n = 0;
  std::size_t m = 0;
  double seconds = 0.0;
};

//! Fixed-epoch JT runs (no early stopping) on seeded motif data for every
//! (N, m) pair.
inline std::vector<SweepRow> scalability_sweep(const std::vector<std::size_t>& ns,
                                               const std::vector<std::size_t>& ms,
                                               const RunConfig& config,
                                               const BenchLog& log = {})
{
  std::vector<SweepRow> rows;
  for (auto m : ms)
    for (auto n : ns) {
      auto data = synthetic::motif_dataset(n, m, config.seed + 101);
      RunConfig cfg = config;
      cfg.variant = Variant::JT;
      cfg.patience = 0;
      cfg.valid_fraction = 0.0;
      auto t0 = std::chrono::steady_clock::now();
      fit(data.data, cfg);
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rows.push_back({ n, m, secs });
      if (log)
        log("sweep n=" + std::to_string(n) + " m=" + std::to_string(m) +
            " seconds=" + std::to_string(secs));
    }
  return rows;
}

inline std::string sweep_table(const std::vector<SweepRow>& rows)
{
  std::ostringstream out;
  out << "n\tm\tseconds\n";
  for (const auto& r : rows)
    out << r.n << '\t' << r.m << '\t' << r.seconds << '\n';
  return out.str();
}

} // namespace sigtime
