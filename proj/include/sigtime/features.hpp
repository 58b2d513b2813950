#pragma once

#include "sigtime/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace sigtime {

struct SeqDistResult
{
  double dist = 0.0;
  std::size_t best_offset = 0;
};

//! Euclidean distance between S and every length-|S| subsequence of T,
//! indexed by start offset.
template<class T>
std::vector<T> offset_distances(std::span<const T> sig, std::span<const T> series)
{
  if (sig.empty())
    throw DegenerateInput("signature is empty");
  if (sig.size() > series.size())
    throw Error("signature length " + std::to_string(sig.size()) +
                " exceeds series length " + std::to_string(series.size()));
  const std::size_t l = sig.size();
  const std::size_t n = series.size() - l + 1;
  std::vector<T> out(n);
  for (std::size_t o = 0; o < n; ++o) {
    T acc = 0;
    for (std::size_t i = 0; i < l; ++i) {
      T d = sig[i] - series[o + i];
      acc += d * d;
    }
    out[o] = std::sqrt(acc);
  }
  return out;
}

//! Hard minimum of a distance profile; first index wins ties.
template<class T>
std::pair<T, std::size_t> profile_min(std::span<const T> profile)
{
  auto it = std::min_element(profile.begin(), profile.end());
  return { *it, static_cast<std::size_t>(it - profile.begin()) };
}

//! Exponentially weighted mean of a distance profile,
//! sum d e^{-a d} / sum e^{-a d}, shifted by the minimum for stability.
template<class T>
T profile_softmin(std::span<const T> profile, T alpha)
{
  T lo = *std::min_element(profile.begin(), profile.end());
  T num = 0, den = 0;
  for (T d : profile) {
    T e = std::exp(-alpha * (d - lo));
    num += d * e;
    den += e;
  }
  return num / den;
}

//! Minimum Euclidean distance of S over all offsets of T, with the argmin.
inline SeqDistResult seq_dist(std::span<const double> sig,
                              std::span<const double> series)
{
  auto profile = offset_distances<double>(sig, series);
  auto [d, o] = profile_min<double>(profile);
  return { d, o };
}

inline double soft_seq_dist(std::span<const double> sig,
                            std::span<const double> series, double alpha)
{
  if (!(alpha > 0.0))
    throw Error("softmin alpha must be positive");
  auto profile = offset_distances<double>(sig, series);
  return profile_softmin<double>(profile, alpha);
}

//! N x k shapelet-transform matrix with per-column extremes.
struct SigMatrix
{
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;      // row-major
  std::vector<std::size_t> offsets; // best offsets, row-major
  std::vector<double> col_min;
  std::vector<double> col_max;

  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  std::size_t offset(std::size_t i, std::size_t j) const
  {
    return offsets[i * cols + j];
  }
};

inline SigMatrix signature_transform(const Dataset& data,
                                     const std::vector<Signature>& sigs)
{
  SigMatrix m;
  m.rows = data.size();
  m.cols = sigs.size();
  m.values.resize(m.rows * m.cols);
  m.offsets.resize(m.rows * m.cols);
  m.col_min.assign(m.cols, std::numeric_limits<double>::infinity());
  m.col_max.assign(m.cols, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) {
      auto r = seq_dist(sigs[j].values, data[i].values);
      m.values[i * m.cols + j] = r.dist;
      m.offsets[i * m.cols + j] = r.best_offset;
      m.col_min[j] = std::min(m.col_min[j], r.dist);
      m.col_max[j] = std::max(m.col_max[j], r.dist);
    }
  return m;
}

enum class DistMode
{
  Hard,
  Soft
};

//! Sliding window grid over a series of length m.
struct WindowGrid
{
  std::size_t window_len = 0;
  std::size_t window_step = 1;
  std::size_t count = 0;

  WindowGrid() = default;
  WindowGrid(std::size_t m, std::size_t len, std::size_t step)
    : window_len(len)
    , window_step(step)
  {
    if (len == 0 || step == 0 || len > m)
      throw Error("invalid window grid: len " + std::to_string(len) +
                  ", step " + std::to_string(step) + ", m " +
                  std::to_string(m));
    count = (m - len) / step + 1;
  }

  std::size_t start(std::size_t q) const { return q * window_step; }
};

//! Distance of one signature to each window, computed from the full-series
//! offset profile: window q covers offsets [start(q), start(q)+len-l].
template<class T>
void window_row_from_profile(std::span<const T> profile, std::size_t sig_len,
                             const WindowGrid& grid, T alpha, DistMode mode,
                             std::span<T> out)
{
  const std::size_t span = grid.window_len - sig_len + 1;
  for (std::size_t q = 0; q < grid.count; ++q) {
    auto sub = profile.subspan(grid.start(q), span);
    out[q] = mode == DistMode::Hard ? profile_min<T>(sub).first
                                    : profile_softmin<T>(sub, alpha);
  }
}

//! k x w matrix (row-major) of signature-to-window distances.
template<class T>
std::vector<T> windowed_features(std::span<const T> series,
                                 const std::vector<std::vector<T>>& sigs,
                                 const WindowGrid& grid, T alpha, DistMode mode)
{
  std::vector<T> out(sigs.size() * grid.count);
  for (std::size_t j = 0; j < sigs.size(); ++j) {
    if (sigs[j].size() > grid.window_len)
      throw Error("signature " + std::to_string(j) + " of length " +
                  std::to_string(sigs[j].size()) + " exceeds window length " +
                  std::to_string(grid.window_len));
    auto profile = offset_distances<T>(sigs[j], series);
    window_row_from_profile<T>(profile, sigs[j].size(), grid, alpha, mode,
                               std::span<T>(out).subspan(j * grid.count, grid.count));
  }
  return out;
}

//! Per-window statistics in fixed order: mean, median, std, rms, min, max,
//! least-squares slope per step, Haar detail spread.
template<class T>
std::array<T, 8> stat_features_window(std::span<const T> w)
{
  const std::size_t n = w.size();
  if (n < 2)
    throw DegenerateInput("statistical features need a window of >= 2 samples");
  T sum = 0, sq = 0;
  for (T v : w) {
    sum += v;
    sq += v * v;
  }
  const T nn = static_cast<T>(n);
  T mean = sum / nn;
  T var = 0;
  for (T v : w)
    var += (v - mean) * (v - mean);
  var /= nn;

  std::vector<T> sorted(w.begin(), w.end());
  std::sort(sorted.begin(), sorted.end());
  T median = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / T(2);

  T tmean = (nn - 1) / T(2);
  T cov = 0, tvar = 0;
  for (std::size_t i = 0; i < n; ++i) {
    T dt = static_cast<T>(i) - tmean;
    cov += dt * (w[i] - mean);
    tvar += dt * dt;
  }

  // Single-level Haar details; an odd trailing sample is dropped. The spread
  // is taken about zero, the expected mean of detail coefficients.
  const std::size_t pairs = n / 2;
  T haar = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    T d = (w[2 * i] - w[2 * i + 1]) / std::sqrt(T(2));
    haar += d * d;
  }
  haar = std::sqrt(haar / static_cast<T>(pairs));

  return { mean,          median,        std::sqrt(var), std::sqrt(sq / nn),
           sorted.front(), sorted.back(), cov / tvar,     haar };
}

//! r x w matrix (row-major) of window statistics; keeps the first r of the
//! fixed feature order.
template<class T>
std::vector<T> stat_features(std::span<const T> series, const WindowGrid& grid,
                             std::size_t r)
{
  std::vector<T> out(r * grid.count);
  for (std::size_t q = 0; q < grid.count; ++q) {
    auto f = stat_features_window<T>(series.subspan(grid.start(q), grid.window_len));
    for (std::size_t i = 0; i < r; ++i)
      out[i * grid.count + q] = f[i];
  }
  return out;
}

//! Row-wise concatenation of a k x w and an r x w matrix, signatures first.
template<class T>
std::vector<T> fuse(std::span<const T> sig, std::size_t k, std::span<const T> stat,
                    std::size_t r, std::size_t w)
{
  if (sig.size() != k * w || stat.size() != r * w)
    throw Error("fuse: window counts differ");
  std::vector<T> out;
  out.reserve((k + r) * w);
  out.insert(out.end(), sig.begin(), sig.end());
  out.insert(out.end(), stat.begin(), stat.end());
  return out;
}

struct MatchResult
{
  double score = 0.0;
  std::size_t best_offset = 0;
};

//! Score from an already computed distance, normalized by the training
//! column extremes and clamped to [0,1].
inline double match_score_from_dist(double dist, double col_min, double col_max)
{
  if (!(col_max > col_min))
    return dist <= col_min ? 1.0 : 0.0;
  double t = (dist - col_min) / (col_max - col_min);
  return 1.0 - std::clamp(t, 0.0, 1.0);
}

inline MatchResult match_score(std::span<const double> series,
                               std::span<const double> sig, double col_min,
                               double col_max)
{
  auto r = seq_dist(sig, series);
  return { match_score_from_dist(r.dist, col_min, col_max), r.best_offset };
}

//! Unconstrained DTW with absolute-difference local cost.
inline double dtw_distance(std::span<const double> a, std::span<const double> b)
{
  if (a.empty() || b.empty())
    throw DegenerateInput("dtw_distance: empty sequence");
  const std::size_t n = a.size(), m = b.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j)
      cur[j] = std::abs(a[i - 1] - b[j - 1]) +
               std::min({ prev[j], cur[j - 1], prev[j - 1] });
    std::swap(prev, cur);
  }
  return prev[m];
}

struct ClusterAssignment
{
  std::optional<std::size_t> cluster;
  std::vector<bool> members;
};

//! Threshold membership per signature; the cluster is the best-scoring
//! member (lowest index on ties).
inline ClusterAssignment assign_cluster(std::span<const double> scores,
                                        double threshold)
{
  ClusterAssignment out;
  out.members.resize(scores.size());
  double best = -1.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    out.members[j] = scores[j] >= threshold;
    if (out.members[j] && scores[j] > best) {
      best = scores[j];
      out.cluster = j;
    }
  }
  return out;
}

//! Row-major N x k score matrix to per-sample assignments.
inline std::vector<ClusterAssignment>
assign_clusters(std::span<const double> scores, std::size_t k, double threshold)
{
  std::vector<ClusterAssignment> out;
  if (k == 0)
    return out;
  for (std::size_t i = 0; i * k < scores.size(); ++i)
    out.push_back(assign_cluster(scores.subspan(i * k, k), threshold));
  return out;
}

} // namespace sigtime
