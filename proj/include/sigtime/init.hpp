#pragma once

#include "sigtime/config.hpp"
#include "sigtime/core.hpp"
#include "sigtime/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <vector>

namespace sigtime {

//! z-normalized positions 1..m (population standard deviation).
inline std::vector<double> znorm_positions(std::size_t m)
{
  if (m < 2)
    throw DegenerateInput("znorm_positions needs m >= 2");
  const double n = static_cast<double>(m);
  const double mean = (n + 1.0) / 2.0;
  const double sd = std::sqrt((n * n - 1.0) / 12.0);
  std::vector<double> p(m);
  for (std::size_t i = 0; i < m; ++i)
    p[i] = (static_cast<double>(i + 1) - mean) / sd;
  return p;
}

//! Distance of point pos to the chord joining (P_s, T_s) and (P_e, T_e).
inline double perpendicular_distance(std::size_t pos, std::size_t s,
                                     std::size_t e, std::span<const double> series,
                                     std::span<const double> positions)
{
  const double slope = (series[e] - series[s]) / (positions[e] - positions[s]);
  const double intercept = series[e] - slope * positions[e];
  return std::abs(slope * positions[pos] - series[pos] + intercept) /
         std::sqrt(slope * slope + 1.0);
}

//! Distances closer than this count as ties (collinear points leave
//! rounding residue around zero).
inline constexpr double kPipTieTolerance = 1e-12;

//! Sorted PIP indices.
struct PipSet
{
  std::vector<std::size_t> indices;
};

//! Recursive PIP selection: starting from both endpoints, repeatedly add the
//! interior point farthest from the chord of its enclosing PIP segment.
//! Ties go to the smallest index.
inline PipSet extract_pips(std::span<const double> series, std::size_t num_pips)
{
  const std::size_t m = series.size();
  if (m < 2 || num_pips < 2 || num_pips > m)
    throw Error("extract_pips: need 2 <= num_pips <= m");
  auto positions = znorm_positions(m);
  PipSet pips{ { 0, m - 1 } };
  while (pips.indices.size() < num_pips) {
    double best = -1.0;
    std::size_t best_pos = 0, insert_at = 0;
    for (std::size_t seg = 0; seg + 1 < pips.indices.size(); ++seg) {
      std::size_t s = pips.indices[seg], e = pips.indices[seg + 1];
      for (std::size_t pos = s + 1; pos < e; ++pos) {
        double pd = perpendicular_distance(pos, s, e, series, positions);
        if (pd > best + kPipTieTolerance) {
          best = pd;
          best_pos = pos;
          insert_at = seg + 1;
        }
      }
    }
    pips.indices.insert(pips.indices.begin() + static_cast<std::ptrdiff_t>(insert_at),
                        best_pos);
  }
  return pips;
}

struct Candidate
{
  std::vector<double> values;
  SignatureSource source;
  double ig = 0.0;
  double theta = 0.0;
};

//! One candidate per PIP pair (i < j) whose inclusive span length lies in
//! [min_len, max_len]. With adjacent_only, only consecutive PIPs pair up.
inline std::vector<Candidate> generate_candidates(const PipSet& pips,
                                                  const TimeSeries& series,
                                                  std::size_t min_len,
                                                  std::size_t max_len,
                                                  bool adjacent_only = false)
{
  std::vector<Candidate> out;
  const auto& idx = pips.indices;
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      if (adjacent_only && b != a + 1)
        break;
      std::size_t len = idx[b] - idx[a] + 1;
      if (len < min_len || len > max_len)
        continue;
      Candidate c;
      c.source = { series.id, idx[a], idx[b] };
      c.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(idx[a]),
                      series.values.begin() + static_cast<std::ptrdiff_t>(idx[b] + 1));
      out.push_back(std::move(c));
    }
  return out;
}

//! Two-class entropy in nats; 0 log 0 = 0. Symmetric bit-for-bit.
inline double entropy(std::size_t count_a, std::size_t count_b)
{
  if (count_a + count_b == 0)
    throw DegenerateInput("entropy of an empty set");
  const double n = static_cast<double>(count_a + count_b);
  auto term = [n](std::size_t c) {
    if (c == 0)
      return 0.0;
    double p = static_cast<double>(c) / n;
    return -p * std::log(p);
  };
  std::size_t lo = std::min(count_a, count_b), hi = std::max(count_a, count_b);
  return term(lo) + term(hi);
}

//! Gain of the split {d <= theta} / {d > theta} given class counts on the
//! left side and in total.
inline double split_gain(std::size_t left_a, std::size_t left_b,
                         std::size_t total_a, std::size_t total_b)
{
  const std::size_t n = total_a + total_b;
  const std::size_t nl = left_a + left_b, nr = n - nl;
  double child = 0.0;
  if (nl > 0)
    child += static_cast<double>(nl) / static_cast<double>(n) * entropy(left_a, left_b);
  if (nr > 0)
    child += static_cast<double>(nr) / static_cast<double>(n) *
             entropy(total_a - left_a, total_b - left_b);
  return entropy(total_a, total_b) - child;
}

//! Gains closer than this are treated as equal (the smaller threshold wins).
inline constexpr double kGainTieTolerance = 1e-12;

struct Split
{
  double theta = 0.0;
  double ig = 0.0;
};

//! Best threshold over midpoints of consecutive distinct sorted distances.
inline Split information_gain(std::span<const double> distances,
                              std::span<const int> labels)
{
  const std::size_t n = distances.size();
  if (n < 2 || labels.size() != n)
    throw DegenerateInput("information_gain needs >= 2 labelled distances");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return distances[a] < distances[b];
  });
  std::size_t total_b = static_cast<std::size_t>(
    std::count(labels.begin(), labels.end(), 1));
  std::size_t total_a = n - total_b;
  if (total_a == 0 || total_b == 0)
    throw UnsupportedDataset("information_gain needs both classes");

  Split best{ distances[order[0]], 0.0 };
  bool found = false;
  std::size_t left_a = 0, left_b = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    (labels[order[i]] == 1 ? left_b : left_a)++;
    double here = distances[order[i]], next = distances[order[i + 1]];
    if (!(next > here))
      continue;
    double gain = split_gain(left_a, left_b, total_a, total_b);
    if (!found || gain > best.ig + kGainTieTolerance) {
      best = { here + (next - here) / 2.0, gain };
      found = true;
    }
  }
  best.ig = std::max(best.ig, 0.0);
  return best;
}

inline std::size_t pip_count(double pips_rate, std::size_t m)
{
  auto n = static_cast<std::size_t>(std::lround(pips_rate * static_cast<double>(m)));
  return std::min(std::max<std::size_t>(3, n), m);
}

struct InitResult
{
  std::vector<Signature> signatures;
  std::size_t candidates_generated = 0;
  std::size_t candidates_scored = 0;
  bool saturated = false; // fewer than k candidates were available
};

//! Ranking used for initial signatures: higher gain, then shorter, then
//! lower sample id, then earlier start.
inline bool candidate_before(const Candidate& a, const Candidate& b)
{
  if (a.ig != b.ig)
    return a.ig > b.ig;
  if (a.values.size() != b.values.size())
    return a.values.size() < b.values.size();
  if (a.source.sample != b.source.sample)
    return a.source.sample < b.source.sample;
  return a.source.start < b.source.start;
}

//! Scores one candidate against every training sample.
inline void score_candidate(Candidate& c, const Dataset& train,
                            std::span<const int> labels)
{
  std::vector<double> dist(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    dist[i] = seq_dist(c.values, train[i].values).dist;
  auto split = information_gain(dist, labels);
  c.ig = split.ig;
  c.theta = split.theta;
}

//! PIP-anchored candidates from every training series, ranked by
//! information gain; the best k become the initial signatures. When the
//! candidate pool exceeds config.max_candidates a seeded subset is scored.
inline InitResult init_signatures(const Dataset& train, const RunConfig& config)
{
  train.require_trainable("init_signatures");
  const RunConfig cfg = config.resolve(train.length());
  const std::size_t num_pips = pip_count(cfg.pips_rate, train.length());

  std::vector<Candidate> pool;
  std::set<std::array<std::size_t, 3>> seen;
  for (const auto& s : train.samples()) {
    auto pips = extract_pips(s.values, num_pips);
    auto cands = generate_candidates(pips, s, cfg.min_sig_len, cfg.max_sig_len,
                                     cfg.adjacent_pips_only);
    for (auto& c : cands)
      if (seen.insert({ c.source.sample, c.source.start, c.source.end }).second)
        pool.push_back(std::move(c));
  }

  InitResult out;
  out.candidates_generated = pool.size();
  if (cfg.max_candidates > 0 && pool.size() > cfg.max_candidates) {
    std::mt19937_64 rng(cfg.seed ^ 0x5167ULL);
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < cfg.max_candidates; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(cfg.max_candidates);
    std::sort(idx.begin(), idx.end());
    std::vector<Candidate> subset;
    subset.reserve(idx.size());
    for (auto i : idx)
      subset.push_back(std::move(pool[i]));
    pool = std::move(subset);
  }
  out.candidates_scored = pool.size();

  const auto labels = train.labels();
  for (auto& c : pool)
    score_candidate(c, train, labels);
  std::sort(pool.begin(), pool.end(), candidate_before);

  const std::size_t take = std::min(cfg.k, pool.size());
  out.saturated = take < cfg.k;
  for (std::size_t i = 0; i < take; ++i) {
    Signature s;
    s.id = i;
    s.values = std::move(pool[i].values);
    s.ig = pool[i].ig;
    s.theta = pool[i].theta;
    s.source = pool[i].source;
    out.signatures.push_back(std::move(s));
  }
  return out;
}

} // namespace sigtime
