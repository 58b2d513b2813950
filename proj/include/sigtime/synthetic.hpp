#pragma once

#include "sigtime/core.hpp"
#include "sigtime/preprocess.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

// Seeded generators for controlled experiments. They draw from
// std::mt19937_64 through their own transforms so the data is identical
// across standard library implementations.
namespace sigtime::synthetic {

inline constexpr std::size_t kMotifLength = 8;

class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : engine_(seed)
  {
  }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal()
  {
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300)
      u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

private:
  std::mt19937_64 engine_;
};

struct MotifData
{
  Dataset data;
  //! Start of the planted motif per sample; empty for class 0.
  std::vector<std::optional<std::size_t>> motif_start;
};

//! Smooth background: two random low-frequency sinusoids plus noise.
inline std::vector<double> background(Rng& rng, std::size_t m, double noise)
{
  std::vector<double> v(m);
  double f1 = 1.0 + 2.0 * rng.uniform(), f2 = 3.0 + 3.0 * rng.uniform();
  double p1 = 2.0 * std::numbers::pi * rng.uniform(), p2 = 2.0 * std::numbers::pi * rng.uniform();
  for (std::size_t t = 0; t < m; ++t) {
    double x = static_cast<double>(t) / static_cast<double>(m);
    v[t] = 0.5 * std::sin(2.0 * std::numbers::pi * f1 * x + p1) +
           0.25 * std::sin(2.0 * std::numbers::pi * f2 * x + p2) + noise * rng.normal();
  }
  return v;
}

//! Balanced binary dataset; every class-1 series carries a sharp triangular
//! spike of kMotifLength samples at a random position. Backgrounds are
//! normalized to [0,1] before the spike is added, so nothing but the spike
//! tells the classes apart.
inline MotifData motif_dataset(std::size_t n, std::size_t m, std::uint64_t seed)
{
  if (m < kMotifLength + 10)
    throw Error("motif_dataset needs m >= " + std::to_string(kMotifLength + 10));
  Rng rng(seed);
  MotifData out;
  std::vector<TimeSeries> samples;
  for (std::size_t i = 0; i < n; ++i) {
    int label = static_cast<int>(i % 2);
    auto v = normalize(background(rng, m, 0.05));
    std::optional<std::size_t> start;
    if (label == 1) {
      start = 5 + rng.below(m - kMotifLength - 9);
      for (std::size_t j = 0; j < kMotifLength; ++j) {
        double half = static_cast<double>(kMotifLength - 1) / 2.0;
        double tri = 1.0 - std::abs(static_cast<double>(j) - half) / (half + 1.0);
        v[*start + j] += 1.5 * tri;
      }
    }
    samples.push_back({ i, std::move(v), label });
    out.motif_start.push_back(start);
  }
  out.data = Dataset(std::move(samples));
  return out;
}

//! Offset-only dataset: both classes share one distribution of shapes
//! drawn in [0, 0.5]; class 1 is lifted by exactly 0.5. Values stay in
//! [0,1] but are not normalized per sample, so the offset is visible to
//! level statistics and vanishes under normalize_samples().
inline Dataset offset_dataset(std::size_t n, std::size_t m, std::uint64_t seed)
{
  Rng rng(seed);
  std::vector<TimeSeries> samples;
  for (std::size_t i = 0; i < n; ++i) {
    int label = static_cast<int>(i % 2);
    auto v = normalize(background(rng, m, 0.1));
    for (auto& x : v)
      x = 0.5 * x + (label == 1 ? 0.5 : 0.0);
    samples.push_back({ i, std::move(v), label });
  }
  return Dataset(std::move(samples));
}

//! Per-sample min-max normalization of a whole dataset.
inline Dataset normalize_samples(const Dataset& d)
{
  std::vector<TimeSeries> out;
  out.reserve(d.size());
  for (const auto& s : d.samples())
    out.push_back({ s.id, normalize(s.values), s.label });
  return Dataset(std::move(out));
}

} // namespace sigtime::synthetic
