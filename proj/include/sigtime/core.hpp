#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sigtime {

//! Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Dataset does not satisfy the binary, univariate contract.
class UnsupportedDataset : public Error
{
public:
  using Error::Error;
};

//! Input violates a numeric precondition (zero range, empty input, ...).
class DegenerateInput : public Error
{
public:
  using Error::Error;
};

struct TimeSeries
{
  std::size_t id = 0;
  std::vector<double> values;
  int label = 0;

  std::size_t size() const { return values.size(); }
};

//! Equal-length collection of labelled univariate series.
class Dataset
{
public:
  Dataset() = default;

  explicit Dataset(std::vector<TimeSeries> samples)
    : samples_(std::move(samples))
  {
    if (samples_.empty())
      return;
    length_ = samples_.front().size();
    for (const auto& s : samples_) {
      if (s.size() != length_)
        throw Error("dataset samples differ in length: " +
                    std::to_string(length_) + " vs " +
                    std::to_string(s.size()));
      if (s.label != 0 && s.label != 1)
        throw UnsupportedDataset("labels must be 0 or 1");
      ++class_counts_[static_cast<std::size_t>(s.label)];
    }
  }

  const std::vector<TimeSeries>& samples() const { return samples_; }
  const TimeSeries& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t length() const { return length_; }
  std::array<std::size_t, 2> class_counts() const { return class_counts_; }
  bool has_both_classes() const
  {
    return class_counts_[0] > 0 && class_counts_[1] > 0;
  }

  std::vector<int> labels() const
  {
    std::vector<int> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_)
      out.push_back(s.label);
    return out;
  }

  void require_trainable(const char* what) const
  {
    if (empty())
      throw DegenerateInput(std::string(what) + ": empty dataset");
    if (!has_both_classes())
      throw UnsupportedDataset(std::string(what) +
                               ": both classes must be present");
  }

private:
  std::vector<TimeSeries> samples_;
  std::size_t length_ = 0;
  std::array<std::size_t, 2> class_counts_{ 0, 0 };
};

//! Provenance of a signature: series id and inclusive index span.
struct SignatureSource
{
  std::size_t sample = 0;
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  friend bool operator==(const SignatureSource&,
                         const SignatureSource&) = default;
};

struct Signature
{
  std::size_t id = 0;
  std::vector<double> values;
  double ig = 0.0;
  double theta = 0.0;
  SignatureSource source;

  std::size_t size() const { return values.size(); }
};

struct LabelMapping
{
  std::vector<int> labels;
  double negative = 0.0; // raw value mapped to 0
  double positive = 0.0; // raw value mapped to 1
};

//! Order-preserving relabel of a two-valued label column onto {0,1}.
inline LabelMapping map_labels(std::span<const double> raw)
{
  std::set<double> distinct(raw.begin(), raw.end());
  if (distinct.size() != 2)
    throw UnsupportedDataset("expected exactly two distinct labels, found " +
                             std::to_string(distinct.size()));
  LabelMapping out;
  out.negative = *distinct.begin();
  out.positive = *distinct.rbegin();
  out.labels.reserve(raw.size());
  for (double v : raw)
    out.labels.push_back(v == out.positive ? 1 : 0);
  return out;
}

//! Stratified, seeded split. Each class is shuffled independently and
//! round(test_fraction * class size) of it goes to the test side.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& data,
                                                 double test_fraction,
                                                 std::uint64_t seed)
{
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error("test_fraction must lie in (0,1)");
  auto counts = data.class_counts();
  if (counts[0] < 2 || counts[1] < 2)
    throw UnsupportedDataset("split needs at least 2 samples per class");

  std::mt19937_64 rng(seed);
  std::vector<TimeSeries> train, test;
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data[i].label == cls)
        idx.push_back(i);
    // Fisher-Yates with our own draws so the split does not depend on the
    // standard library's shuffle implementation.
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(idx[i - 1], idx[j]);
    }
    auto n_test = static_cast<std::size_t>(
      std::lround(test_fraction * static_cast<double>(idx.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_test ? test : train).push_back(data[idx[i]]);
  }
  auto by_id = [](const TimeSeries& a, const TimeSeries& b) {
    return a.id < b.id;
  };
  std::sort(train.begin(), train.end(), by_id);
  std::sort(test.begin(), test.end(), by_id);
  return { Dataset(std::move(train)), Dataset(std::move(test)) };
}

} // namespace sigtime
