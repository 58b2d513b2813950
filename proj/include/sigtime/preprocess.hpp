#pragma once

#include "sigtime/core.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace sigtime {

struct FilterReport
{
  std::size_t kept = 0;
  std::size_t dropped_short = 0;
  std::size_t dropped_flat = 0;
  std::size_t dropped_nonfinite = 0;

  std::size_t total() const
  {
    return kept + dropped_short + dropped_flat + dropped_nonfinite;
  }
};

//! A raw recording: label plus values of arbitrary length.
struct RawSeries
{
  double label = 0.0;
  std::vector<double> values;
};

//! Drops series that are too short, contain non-finite values or have zero
//! variance. Rules are checked in that order; each dropped series is counted
//! once.
inline std::pair<std::vector<RawSeries>, FilterReport>
filter_series(const std::vector<RawSeries>& raw, std::size_t min_len)
{
  std::vector<RawSeries> kept;
  FilterReport report;
  for (const auto& s : raw) {
    if (s.values.size() < min_len || s.values.empty()) {
      ++report.dropped_short;
      continue;
    }
    if (!std::all_of(s.values.begin(), s.values.end(),
                     [](double v) { return std::isfinite(v); })) {
      ++report.dropped_nonfinite;
      continue;
    }
    auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
    if (*lo == *hi) {
      ++report.dropped_flat;
      continue;
    }
    kept.push_back(s);
    ++report.kept;
  }
  return { std::move(kept), report };
}

//! Cuts a long recording into windows of seg_len starting every seg_step
//! samples. Each segment inherits the parent's label.
inline std::vector<RawSeries> segment_series(const RawSeries& series,
                                             std::size_t seg_len,
                                             std::size_t seg_step)
{
  if (seg_step < 1)
    throw Error("seg_step must be >= 1");
  std::vector<RawSeries> out;
  if (seg_len == 0 || seg_len > series.values.size())
    return out;
  for (std::size_t start = 0; start + seg_len <= series.values.size();
       start += seg_step) {
    RawSeries seg;
    seg.label = series.label;
    seg.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(start),
                      series.values.begin() +
                        static_cast<std::ptrdiff_t>(start + seg_len));
    out.push_back(std::move(seg));
  }
  return out;
}

//! Per-sample min-max scaling onto [0,1].
inline std::vector<double> normalize(std::span<const double> series)
{
  if (series.empty())
    throw DegenerateInput("cannot normalize an empty series");
  auto [lo_it, hi_it] = std::minmax_element(series.begin(), series.end());
  double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo))
    throw DegenerateInput("cannot normalize a series with zero range");
  std::vector<double> out(series.size());
  double range = hi - lo;
  for (std::size_t i = 0; i < series.size(); ++i)
    out[i] = (series[i] - lo) / range;
  // Pin the extremes; (hi - lo) / range can round away from 1.
  out[static_cast<std::size_t>(lo_it - series.begin())] = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i)
    if (series[i] == hi)
      out[i] = 1.0;
  return out;
}

struct PreprocessResult
{
  std::vector<RawSeries> series; // normalized, equal length when segmented
  FilterReport report;           // filtering of the input recordings
  std::size_t segments = 0;      // segments cut before the flat-segment check
  std::size_t dropped_flat_segments = 0;
};

//! Filter, optionally segment (seg_len > 0; seg_step 0 means seg_len), then
//! normalize every series. Segments with zero range are dropped and counted.
inline PreprocessResult preprocess(const std::vector<RawSeries>& raw, std::size_t min_len,
                                   std::size_t seg_len = 0, std::size_t seg_step = 0)
{
  PreprocessResult out;
  auto [kept, report] = filter_series(raw, min_len);
  out.report = report;
  std::vector<RawSeries> pieces;
  if (seg_len > 0) {
    for (const auto& s : kept) {
      auto segs = segment_series(s, seg_len, seg_step == 0 ? seg_len : seg_step);
      out.segments += segs.size();
      for (auto& seg : segs) {
        auto [lo, hi] = std::minmax_element(seg.values.begin(), seg.values.end());
        if (*hi > *lo)
          pieces.push_back(std::move(seg));
        else
          ++out.dropped_flat_segments;
      }
    }
  } else {
    pieces = std::move(kept);
  }
  for (auto& p : pieces)
    out.series.push_back({ p.label, normalize(p.values) });
  return out;
}

} // namespace sigtime
