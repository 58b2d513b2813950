#pragma once

#include "sigtime/config.hpp"
#include "sigtime/core.hpp"
#include "sigtime/features.hpp"
#include "sigtime/init.hpp"
#include "sigtime/model.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace sigtime {

struct EpochRecord
{
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double valid_loss = 0.0;
  double valid_accuracy = 0.0;
};

struct TrainedModel
{
  RunConfig config; // resolved snapshot
  ModelParams<double> params;
  std::vector<EpochRecord> history;
  std::vector<Signature> initial;
  //! Learned signatures with gain and threshold recomputed on the training set.
  std::vector<Signature> signatures;
  std::size_t best_epoch = 0;
  double seconds = 0.0;

  DistMode inference_mode() const
  {
    return config.soft_inference ? DistMode::Soft : DistMode::Hard;
  }
};

//! Series and fixed extra channels of a dataset, converted to T once.
template<class T>
struct PreparedData
{
  std::vector<std::vector<T>> series;
  std::vector<std::vector<T>> extra;
  std::vector<int> labels;

  PreparedData(const Dataset& d, const ModelShape& shape)
  {
    for (const auto& s : d.samples()) {
      series.emplace_back(s.values.begin(), s.values.end());
      extra.push_back(extra_channels<T>(shape, series.back()));
      labels.push_back(s.label);
    }
  }

  std::size_t size() const { return series.size(); }
  SampleView<T> view(std::size_t i) const { return { series[i], extra[i], labels[i] }; }

  std::vector<SampleView<T>> views() const
  {
    std::vector<SampleView<T>> out;
    for (std::size_t i = 0; i < size(); ++i)
      out.push_back(view(i));
    return out;
  }
};

//! Per-channel mean and inverse standard deviation of the training
//! features under the initial parameters. Kept fixed during training.
template<class T>
void fit_standardization(ModelParams<T>& p, const PreparedData<T>& data, DistMode mode)
{
  const std::size_t f = p.shape.channels();
  std::vector<double> sum(f, 0.0), sq(f, 0.0);
  double count = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto x = joint_features(p, data.view(i), mode);
    for (Eigen::Index q = 0; q < x.rows(); ++q)
      for (std::size_t c = 0; c < f; ++c) {
        double v = static_cast<double>(x(q, static_cast<Eigen::Index>(c)));
        sum[c] += v;
        sq[c] += v * v;
      }
    count += static_cast<double>(x.rows());
  }
  for (std::size_t c = 0; c < f; ++c) {
    double mean = sum[c] / count;
    double var = std::max(0.0, sq[c] / count - mean * mean);
    double sd = std::sqrt(var);
    p.feature_shift[c] = static_cast<T>(mean);
    p.feature_scale[c] = static_cast<T>(sd > 1e-8 ? 1.0 / sd : 1.0);
  }
}

//! Recomputes gain and threshold of each signature with hard distances.
inline std::vector<Signature> rescore_signatures(const Dataset& train,
                                                 std::vector<Signature> sigs)
{
  const auto labels = train.labels();
  std::vector<double> dist(train.size());
  for (auto& s : sigs) {
    for (std::size_t i = 0; i < train.size(); ++i)
      dist[i] = seq_dist(s.values, train[i].values).dist;
    auto split = information_gain(dist, labels);
    s.ig = split.ig;
    s.theta = split.theta;
  }
  return sigs;
}

namespace detail {

template<class T>
BatchStats evaluate(const ModelParams<T>& p, const PreparedData<T>& data, DistMode mode,
                    const Mat<T>& pe)
{
  auto views = data.views();
  return loss_and_grad<T>(p, views, mode, nullptr, &pe);
}

template<class T>
TrainedModel train_impl(const Dataset& train, const Dataset& valid,
                        const std::vector<Signature>& init_sigs, const RunConfig& cfg)
{
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> lengths;
  for (const auto& s : init_sigs)
    lengths.push_back(s.size());
  auto shape = shape_for(cfg, train.length(), lengths);

  ModelParams<T> p(shape, static_cast<T>(cfg.softmin_alpha));
  initialize_weights(p, cfg.seed);
  if (shape.k() > 0) {
    std::vector<std::vector<double>> values;
    for (const auto& s : init_sigs)
      values.push_back(s.values);
    set_signatures(p, values);
  }

  PreparedData<T> tr(train, shape);
  const bool has_valid = valid.size() > 0;
  PreparedData<T> va(has_valid ? valid : train, shape);
  fit_standardization(p, tr, DistMode::Soft);
  const auto pe = positional_encoding<T>(shape.windows(), shape.d_model);
  const DistMode eval_mode = cfg.soft_inference ? DistMode::Soft : DistMode::Hard;

  TrainedModel out;
  out.config = cfg;
  Adam<T> opt(p.values.size(), cfg.learning_rate);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(tr.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<T> grad;
  std::vector<SampleView<T>> batch;

  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<T> best_values = p.values;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      batch.clear();
      for (std::size_t i = b; i < std::min(order.size(), b + cfg.batch_size); ++i)
        batch.push_back(tr.view(order[i]));
      auto stats = loss_and_grad<T>(p, batch, DistMode::Soft, &grad, &pe);
      if (!std::isfinite(stats.loss))
        throw NumericalError("training diverged in epoch " + std::to_string(epoch));
      loss_sum += stats.loss * static_cast<double>(batch.size());
      correct += stats.correct;
      opt.step(p.values, grad);
    }

    auto vstats = evaluate(p, va, eval_mode, pe);
    if (!std::isfinite(vstats.loss))
      throw NumericalError("validation loss is not finite in epoch " +
                           std::to_string(epoch));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(tr.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(tr.size());
    rec.valid_loss = vstats.loss;
    rec.valid_accuracy = static_cast<double>(vstats.correct) / static_cast<double>(va.size());
    out.history.push_back(rec);

    if (vstats.loss < best_loss) {
      best_loss = vstats.loss;
      best_values = p.values;
      out.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience && cfg.patience > 0) {
      break;
    }
  }
  p.values = best_values;
  out.params = p.template cast<double>();

  out.initial = init_sigs;
  if (shape.k() > 0) {
    auto learned = p.signatures();
    std::vector<Signature> sigs = init_sigs;
    for (std::size_t j = 0; j < sigs.size(); ++j)
      sigs[j].values.assign(learned[j].begin(), learned[j].end());
    out.signatures = rescore_signatures(train, std::move(sigs));
  }
  out.seconds =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

} // namespace detail

//! Joint training of the classifier and the signature values. When valid
//! is empty the training set doubles as the early-stopping set.
inline TrainedModel train_model(const Dataset& train, const Dataset& valid,
                                const std::vector<Signature>& init_sigs,
                                const RunConfig& config)
{
  train.require_trainable("train_model");
  if (valid.size() > 0 && valid.length() != train.length())
    throw Error("validation series length differs from training series length");
  const RunConfig cfg = config.resolve(train.length());
  const bool uses_sigs = cfg.variant == Variant::JT || cfg.variant == Variant::SPT;
  if (uses_sigs && init_sigs.empty())
    throw Error("variant " + to_string(cfg.variant) + " needs initial signatures");
  for (const auto& s : init_sigs)
    if (uses_sigs && (s.size() < 1 || s.size() > cfg.window_len))
      throw Error("signature length " + std::to_string(s.size()) +
                  " does not fit the window length " + std::to_string(cfg.window_len));
  const auto& sigs = uses_sigs ? init_sigs : std::vector<Signature>{};
  if (cfg.precision == Precision::Float)
    return detail::train_impl<float>(train, valid, sigs, cfg);
  return detail::train_impl<double>(train, valid, sigs, cfg);
}

struct FitResult
{
  TrainedModel model;
  InitResult init;
};

//! Initialization plus training on one labelled set. A stratified
//! validation share (config.valid_fraction) is held out for early stopping
//! when both classes are large enough. A given init result is used as is
//! instead of running initialization on the fitting share.
inline FitResult fit(const Dataset& train, const RunConfig& config,
                     const std::optional<InitResult>& given_init = std::nullopt)
{
  train.require_trainable("fit");
  const RunConfig cfg = config.resolve(train.length());
  Dataset fit_set = train, valid;
  auto counts = train.class_counts();
  if (cfg.valid_fraction > 0.0 && std::min(counts[0], counts[1]) >= 4) {
    auto parts = split_dataset(train, cfg.valid_fraction, cfg.seed);
    fit_set = std::move(parts.first);
    valid = std::move(parts.second);
  }
  FitResult out;
  if (given_init)
    out.init = *given_init;
  else if (cfg.variant == Variant::JT || cfg.variant == Variant::SPT)
    out.init = init_signatures(fit_set, cfg);
  out.model = train_model(fit_set, valid, out.init.signatures, cfg);
  return out;
}

struct Prediction
{
  std::vector<double> probabilities;
  std::vector<int> labels;
  double accuracy = 0.0;
};

//! Inference with hard distances (soft when the model was configured so).
//! Probability 0.5 maps to label 1.
inline Prediction predict(const TrainedModel& model, const Dataset& data)
{
  if (data.size() == 0)
    throw Error("predict: empty dataset");
  if (data.length() != model.params.shape.length)
    throw Error("predict: series length " + std::to_string(data.length()) +
                " does not match model length " +
                std::to_string(model.params.shape.length));
  PreparedData<double> prepared(data, model.params.shape);
  auto views = prepared.views();
  Prediction out;
  out.probabilities = forward<double>(model.params, views, model.inference_mode());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    int label = out.probabilities[i] >= 0.5 ? 1 : 0;
    out.labels.push_back(label);
    correct += label == data[i].label;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return out;
}

} // namespace sigtime
