#pragma once

#include "sigtime/config.hpp"
#include "sigtime/core.hpp"
#include "sigtime/features.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace sigtime {

//! Raised when an activation or gradient stops being finite.
class NumericalError : public Error
{
public:
  using Error::Error;
};

enum class ParamKind
{
  Input,
  Attention,
  LayerNorm,
  FeedForward,
  Head,
  Signature
};

inline std::string to_string(ParamKind k)
{
  switch (k) {
    case ParamKind::Input:
      return "input";
    case ParamKind::Attention:
      return "attention";
    case ParamKind::LayerNorm:
      return "layer_norm";
    case ParamKind::FeedForward:
      return "ffn";
    case ParamKind::Head:
      return "head";
    case ParamKind::Signature:
      return "signature";
  }
  return "?";
}

//! A named, column-major matrix inside the flat parameter vector.
struct ParamBlock
{
  std::string name;
  ParamKind kind = ParamKind::Input;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
};

//! Architecture and input geometry of a joint model.
struct ModelShape
{
  Variant variant = Variant::JT;
  std::size_t length = 0; // series length m
  std::size_t window_len = 0;
  std::size_t window_step = 1;
  std::vector<std::size_t> sig_lengths; // one per signature channel
  std::size_t extra = 0;                // statistics (r) or raw samples (VT)
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t ffn_dim = 128;
  std::size_t layers = 2;

  std::size_t k() const { return sig_lengths.size(); }
  std::size_t channels() const { return k() + extra; }
  WindowGrid grid() const { return WindowGrid(length, window_len, window_step); }
  std::size_t windows() const { return grid().count; }
};

//! Channel counts of each variant for a resolved config and k signatures.
inline ModelShape shape_for(const RunConfig& resolved, std::size_t length,
                            const std::vector<std::size_t>& sig_lengths)
{
  ModelShape s;
  s.variant = resolved.variant;
  s.length = length;
  s.window_len = resolved.window_len;
  s.window_step = resolved.window_step;
  s.d_model = resolved.d_model;
  s.heads = resolved.heads;
  s.ffn_dim = resolved.ffn_dim;
  s.layers = resolved.layers;
  switch (resolved.variant) {
    case Variant::VT:
      s.extra = resolved.window_len;
      break;
    case Variant::SFE:
      s.extra = resolved.r;
      break;
    case Variant::SPT:
      s.sig_lengths = sig_lengths;
      break;
    case Variant::JT:
      s.sig_lengths = sig_lengths;
      s.extra = resolved.r;
      break;
  }
  if (s.channels() == 0)
    throw ConfigError("variant " + to_string(resolved.variant) +
                      " has no input channels");
  if (s.d_model % s.heads != 0)
    throw ConfigError("d_model must be divisible by heads");
  return s;
}

struct LayerBlocks
{
  std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
  std::size_t ln2_g, ln2_b, w1, b1, w2, b2;
};

//! Block indices of every parameter of a ModelShape.
struct ParamLayout
{
  std::vector<ParamBlock> blocks;
  std::size_t total = 0;
  std::size_t w_in = 0, b_in = 0;
  std::vector<LayerBlocks> layers;
  std::size_t lnf_g = 0, lnf_b = 0;
  std::size_t head_w = 0, head_b = 0;
  std::vector<std::size_t> sigs;

  explicit ParamLayout(const ModelShape& s = {})
  {
    if (s.channels() == 0)
      return;
    const std::size_t d = s.d_model, f = s.ffn_dim;
    w_in = add("input.W", ParamKind::Input, s.channels(), d);
    b_in = add("input.b", ParamKind::Input, 1, d);
    for (std::size_t l = 0; l < s.layers; ++l) {
      auto p = "layer" + std::to_string(l) + ".";
      LayerBlocks b{};
      b.ln1_g = add(p + "ln1.g", ParamKind::LayerNorm, 1, d);
      b.ln1_b = add(p + "ln1.b", ParamKind::LayerNorm, 1, d);
      b.wq = add(p + "attn.Wq", ParamKind::Attention, d, d);
      b.bq = add(p + "attn.bq", ParamKind::Attention, 1, d);
      b.wk = add(p + "attn.Wk", ParamKind::Attention, d, d);
      b.bk = add(p + "attn.bk", ParamKind::Attention, 1, d);
      b.wv = add(p + "attn.Wv", ParamKind::Attention, d, d);
      b.bv = add(p + "attn.bv", ParamKind::Attention, 1, d);
      b.wo = add(p + "attn.Wo", ParamKind::Attention, d, d);
      b.bo = add(p + "attn.bo", ParamKind::Attention, 1, d);
      b.ln2_g = add(p + "ln2.g", ParamKind::LayerNorm, 1, d);
      b.ln2_b = add(p + "ln2.b", ParamKind::LayerNorm, 1, d);
      b.w1 = add(p + "ffn.W1", ParamKind::FeedForward, d, f);
      b.b1 = add(p + "ffn.b1", ParamKind::FeedForward, 1, f);
      b.w2 = add(p + "ffn.W2", ParamKind::FeedForward, f, d);
      b.b2 = add(p + "ffn.b2", ParamKind::FeedForward, 1, d);
      layers.push_back(b);
    }
    lnf_g = add("final.ln.g", ParamKind::LayerNorm, 1, d);
    lnf_b = add("final.ln.b", ParamKind::LayerNorm, 1, d);
    head_w = add("head.w", ParamKind::Head, d, 1);
    head_b = add("head.b", ParamKind::Head, 1, 1);
    for (std::size_t j = 0; j < s.k(); ++j)
      sigs.push_back(add("signature." + std::to_string(j), ParamKind::Signature,
                         s.sig_lengths[j], 1));
  }

  const ParamBlock& operator[](std::size_t i) const { return blocks[i]; }

private:
  std::size_t add(std::string name, ParamKind kind, std::size_t rows, std::size_t cols)
  {
    blocks.push_back({ std::move(name), kind, total, rows, cols });
    total += rows * cols;
    return blocks.size() - 1;
  }
};

//! Every learnable value of the joint model in one flat vector, plus the
//! fixed per-channel input standardization and positional encoding.
template<class T>
struct ModelParams
{
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  ModelShape shape;
  ParamLayout layout;
  std::vector<T> values;
  std::vector<T> feature_shift;
  std::vector<T> feature_scale;
  T alpha = T(10);

  ModelParams() = default;
  explicit ModelParams(ModelShape s, T softmin_alpha = T(10))
    : shape(std::move(s))
    , layout(shape)
    , values(layout.total, T(0))
    , feature_shift(shape.channels(), T(0))
    , feature_scale(shape.channels(), T(1))
    , alpha(softmin_alpha)
  {
  }

  std::span<const T> block(std::size_t i) const
  {
    return std::span<const T>(values).subspan(layout[i].offset, layout[i].size());
  }
  std::span<T> block(std::size_t i)
  {
    return std::span<T>(values).subspan(layout[i].offset, layout[i].size());
  }

  Eigen::Map<const Mat> mat(std::size_t i) const
  {
    const auto& b = layout[i];
    return Eigen::Map<const Mat>(values.data() + b.offset,
                                 static_cast<Eigen::Index>(b.rows),
                                 static_cast<Eigen::Index>(b.cols));
  }

  std::span<const T> signature(std::size_t j) const { return block(layout.sigs[j]); }

  std::vector<std::vector<T>> signatures() const
  {
    std::vector<std::vector<T>> out;
    for (std::size_t j = 0; j < shape.k(); ++j) {
      auto s = signature(j);
      out.emplace_back(s.begin(), s.end());
    }
    return out;
  }

  template<class U>
  ModelParams<U> cast() const
  {
    ModelParams<U> out;
    out.shape = shape;
    out.layout = layout;
    out.values.assign(values.begin(), values.end());
    out.feature_shift.assign(feature_shift.begin(), feature_shift.end());
    out.feature_scale.assign(feature_scale.begin(), feature_scale.end());
    out.alpha = static_cast<U>(alpha);
    return out;
  }
};

//! Fixed sinusoidal encoding, windows x d_model.
template<class T>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> positional_encoding(std::size_t windows,
                                                                     std::size_t d)
{
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> pe(windows, d);
  for (std::size_t q = 0; q < windows; ++q)
    for (std::size_t i = 0; i < d; ++i) {
      double rate = std::pow(10000.0, static_cast<double>(i - i % 2) /
                                        static_cast<double>(d));
      double angle = static_cast<double>(q) / rate;
      pe(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(i)) =
        static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  return pe;
}

//! Fan-in scaled uniform weights, zero biases, unit layer-norm gains and a
//! zero head so that the untrained model predicts 0.5.
template<class T>
void initialize_weights(ModelParams<T>& p, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double bound) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return static_cast<T>((2.0 * u - 1.0) * bound);
  };
  std::fill(p.values.begin(), p.values.end(), T(0));
  for (std::size_t i = 0; i < p.layout.blocks.size(); ++i) {
    const auto& b = p.layout[i];
    bool is_gain = b.name.ends_with(".g");
    bool is_weight = b.rows > 1 && b.kind != ParamKind::Signature &&
                     b.kind != ParamKind::Head && b.kind != ParamKind::LayerNorm;
    auto dst = p.block(i);
    if (is_gain)
      std::fill(dst.begin(), dst.end(), T(1));
    else if (is_weight) {
      double bound = 1.0 / std::sqrt(static_cast<double>(b.rows));
      for (auto& v : dst)
        v = uniform(bound);
    }
  }
}

template<class T>
void set_signatures(ModelParams<T>& p, const std::vector<std::vector<double>>& sigs)
{
  if (sigs.size() != p.shape.k())
    throw Error("signature count does not match the model");
  for (std::size_t j = 0; j < sigs.size(); ++j) {
    auto dst = p.block(p.layout.sigs[j]);
    if (dst.size() != sigs[j].size())
      throw Error("signature length does not match the model");
    std::copy(sigs[j].begin(), sigs[j].end(), dst.begin());
  }
}

//! Per-sample input to the model: the series plus its precomputed
//! non-signature channels (extra x windows, row-major).
template<class T>
struct SampleView
{
  std::span<const T> series;
  std::span<const T> extra;
  int label = 0;
};

//! Non-signature channels of a series for the given shape.
template<class T>
std::vector<T> extra_channels(const ModelShape& shape, std::span<const T> series)
{
  auto grid = shape.grid();
  if (shape.variant == Variant::VT) {
    std::vector<T> out(shape.extra * grid.count);
    for (std::size_t q = 0; q < grid.count; ++q)
      for (std::size_t i = 0; i < shape.extra; ++i)
        out[i * grid.count + q] = series[grid.start(q) + i];
    return out;
  }
  if (shape.extra == 0)
    return {};
  return stat_features<T>(series, grid, shape.extra);
}

namespace detail {

template<class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template<class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

inline constexpr double kLayerNormEps = 1e-5;

template<class T>
struct LnCache
{
  Mat<T> xhat;
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std;
};

template<class T, class G, class B>
Mat<T> ln_forward(const Mat<T>& x, const G& gain, const B& bias, LnCache<T>& c)
{
  const auto rows = x.rows();
  const T d = static_cast<T>(x.cols());
  c.xhat.resize(rows, x.cols());
  c.inv_std.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    T mean = x.row(i).sum() / d;
    RowVec<T> centered = x.row(i).array() - mean;
    T var = centered.squaredNorm() / d;
    c.inv_std(i) = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    c.xhat.row(i) = centered * c.inv_std(i);
  }
  Mat<T> y = c.xhat.array().rowwise() * gain.array();
  y.array().rowwise() += bias.array();
  return y;
}

template<class T, class G, class DG, class DB>
Mat<T> ln_backward(const Mat<T>& dy, const G& gain, const LnCache<T>& c, DG dgain,
                   DB dbias)
{
  dgain += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  Mat<T> dxhat = dy.array().rowwise() * gain.array();
  const T d = static_cast<T>(dy.cols());
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    T mean_dxhat = dxhat.row(i).sum() / d;
    T mean_dot = dxhat.row(i).dot(c.xhat.row(i)) / d;
    dx.row(i) = c.inv_std(i) * (dxhat.row(i).array() - mean_dxhat -
                                c.xhat.row(i).array() * mean_dot)
                                 .matrix();
  }
  return dx;
}

template<class T>
T gelu(T x)
{
  constexpr T c = static_cast<T>(0.7978845608028654); // sqrt(2/pi)
  return T(0.5) * x * (T(1) + std::tanh(c * (x + T(0.044715) * x * x * x)));
}

template<class T>
T gelu_grad(T x)
{
  constexpr T c = static_cast<T>(0.7978845608028654);
  T t = std::tanh(c * (x + T(0.044715) * x * x * x));
  return T(0.5) * (T(1) + t) +
         T(0.5) * x * (T(1) - t * t) * c * (T(1) + T(3) * T(0.044715) * x * x);
}

template<class T>
void require_finite(const Mat<T>& m, const std::string& where)
{
  if (!m.allFinite())
    throw NumericalError("non-finite activation in " + where);
}

} // namespace detail

//! Intermediate values of one sample's forward pass.
template<class T>
struct ForwardCache
{
  struct Layer
  {
    detail::Mat<T> h_in, a, q, k, v, o, h1, b, u, g;
    detail::LnCache<T> ln1, ln2;
    std::vector<detail::Mat<T>> probs;
  };

  std::vector<std::vector<T>> profiles; // offset distances per signature
  detail::Mat<T> x, xn;                 // windows x channels
  std::vector<Layer> layers;
  detail::Mat<T> hf;
  detail::LnCache<T> lnf;
  detail::RowVec<T> pooled;
  T logit = 0;
  T prob = 0;
};

//! Windows x channels feature matrix: signature distances then extra
//! channels.
template<class T>
detail::Mat<T> joint_features(const ModelParams<T>& p, const SampleView<T>& s,
                              DistMode mode, ForwardCache<T>* cache = nullptr)
{
  const auto& shape = p.shape;
  const auto grid = shape.grid();
  const std::size_t k = shape.k(), w = grid.count;
  if (s.series.size() != shape.length)
    throw Error("series length " + std::to_string(s.series.size()) +
                " does not match model length " + std::to_string(shape.length));
  if (s.extra.size() != shape.extra * w)
    throw Error("extra channel block has the wrong size");
  detail::Mat<T> x(w, shape.channels());
  std::vector<T> row(w);
  if (cache)
    cache->profiles.assign(k, {});
  for (std::size_t j = 0; j < k; ++j) {
    auto sig = p.signature(j);
    auto profile = offset_distances<T>(sig, s.series);
    window_row_from_profile<T>(profile, sig.size(), grid, p.alpha, mode, row);
    for (std::size_t q = 0; q < w; ++q)
      x(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)) = row[q];
    if (cache)
      cache->profiles[j] = std::move(profile);
  }
  for (std::size_t i = 0; i < shape.extra; ++i)
    for (std::size_t q = 0; q < w; ++q)
      x(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(k + i)) =
        s.extra[i * w + q];
  return x;
}

//! Encoder + head on a windows x channels feature matrix. Returns the logit.
template<class T>
T encode(const ModelParams<T>& p, const detail::Mat<T>& x, const detail::Mat<T>& pe,
         ForwardCache<T>& c)
{
  using namespace detail;
  const auto& L = p.layout;
  const auto& shape = p.shape;
  const Eigen::Index dh = static_cast<Eigen::Index>(shape.d_model / shape.heads);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  c.x = x;
  c.xn = x;
  for (Eigen::Index ch = 0; ch < x.cols(); ++ch)
    c.xn.col(ch) = (x.col(ch).array() - p.feature_shift[static_cast<std::size_t>(ch)]) *
                   p.feature_scale[static_cast<std::size_t>(ch)];
  require_finite<T>(c.xn, "input features");

  Mat<T> h = c.xn * p.mat(L.w_in);
  h.rowwise() += p.mat(L.b_in).row(0);
  h += pe;

  c.layers.resize(shape.layers);
  for (std::size_t l = 0; l < shape.layers; ++l) {
    const auto& B = L.layers[l];
    auto& lc = c.layers[l];
    lc.h_in = h;
    lc.a = ln_forward<T>(h, p.mat(B.ln1_g).row(0), p.mat(B.ln1_b).row(0), lc.ln1);
    lc.q = lc.a * p.mat(B.wq);
    lc.q.rowwise() += p.mat(B.bq).row(0);
    lc.k = lc.a * p.mat(B.wk);
    lc.k.rowwise() += p.mat(B.bk).row(0);
    lc.v = lc.a * p.mat(B.wv);
    lc.v.rowwise() += p.mat(B.bv).row(0);
    lc.o.resize(h.rows(), h.cols());
    lc.probs.resize(shape.heads);
    for (std::size_t hd = 0; hd < shape.heads; ++hd) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(hd) * dh;
      Mat<T> scores = lc.q.middleCols(c0, dh) * lc.k.middleCols(c0, dh).transpose() * scale;
      for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        T mx = scores.row(i).maxCoeff();
        scores.row(i) = (scores.row(i).array() - mx).exp();
        scores.row(i) /= scores.row(i).sum();
      }
      lc.o.middleCols(c0, dh) = scores * lc.v.middleCols(c0, dh);
      lc.probs[hd] = std::move(scores);
    }
    lc.h1 = h + lc.o * p.mat(B.wo);
    lc.h1.rowwise() += p.mat(B.bo).row(0);
    lc.b = ln_forward<T>(lc.h1, p.mat(B.ln2_g).row(0), p.mat(B.ln2_b).row(0), lc.ln2);
    lc.u = lc.b * p.mat(B.w1);
    lc.u.rowwise() += p.mat(B.b1).row(0);
    lc.g = lc.u.unaryExpr([](T v) { return gelu(v); });
    h = lc.h1 + lc.g * p.mat(B.w2);
    h.rowwise() += p.mat(B.b2).row(0);
    require_finite<T>(h, "encoder layer " + std::to_string(l));
  }
  c.hf = ln_forward<T>(h, p.mat(L.lnf_g).row(0), p.mat(L.lnf_b).row(0), c.lnf);
  c.pooled = c.hf.colwise().mean();
  c.logit = c.pooled.dot(p.mat(L.head_w).col(0).transpose()) + p.mat(L.head_b)(0, 0);
  if (!std::isfinite(c.logit))
    throw NumericalError("non-finite activation in classification head");
  c.prob = c.logit >= 0 ? T(1) / (T(1) + std::exp(-c.logit))
                        : std::exp(c.logit) / (T(1) + std::exp(c.logit));
  return c.logit;
}

//! Reverse pass for one sample given dLoss/dlogit; accumulates into grad
//! (same layout as p.values), including the signature values.
template<class T>
void backward(const ModelParams<T>& p, const SampleView<T>& s, const ForwardCache<T>& c,
              T dlogit, DistMode mode, std::span<T> grad)
{
  using namespace detail;
  const auto& L = p.layout;
  const auto& shape = p.shape;
  const Eigen::Index dh = static_cast<Eigen::Index>(shape.d_model / shape.heads);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  auto g = [&](std::size_t i) {
    const auto& b = L[i];
    return Eigen::Map<Mat<T>>(grad.data() + b.offset, static_cast<Eigen::Index>(b.rows),
                              static_cast<Eigen::Index>(b.cols));
  };

  g(L.head_w).col(0) += dlogit * c.pooled.transpose();
  g(L.head_b)(0, 0) += dlogit;
  RowVec<T> dpooled = dlogit * p.mat(L.head_w).col(0).transpose();
  const T inv_w = T(1) / static_cast<T>(c.hf.rows());
  Mat<T> dhf = (Eigen::Matrix<T, Eigen::Dynamic, 1>::Ones(c.hf.rows()) * dpooled) * inv_w;
  Mat<T> dh_ = ln_backward<T>(dhf, p.mat(L.lnf_g).row(0), c.lnf, g(L.lnf_g).row(0),
                              g(L.lnf_b).row(0));

  for (std::size_t li = shape.layers; li-- > 0;) {
    const auto& B = L.layers[li];
    const auto& lc = c.layers[li];
    // feed-forward block
    g(B.w2) += lc.g.transpose() * dh_;
    g(B.b2).row(0) += dh_.colwise().sum();
    Mat<T> du = (dh_ * p.mat(B.w2).transpose()).array() *
                lc.u.unaryExpr([](T v) { return gelu_grad(v); }).array();
    g(B.w1) += lc.b.transpose() * du;
    g(B.b1).row(0) += du.colwise().sum();
    Mat<T> db = du * p.mat(B.w1).transpose();
    Mat<T> dh1 = dh_ + ln_backward<T>(db, p.mat(B.ln2_g).row(0), lc.ln2,
                                      g(B.ln2_g).row(0), g(B.ln2_b).row(0));
    // attention block
    g(B.wo) += lc.o.transpose() * dh1;
    g(B.bo).row(0) += dh1.colwise().sum();
    Mat<T> dout = dh1 * p.mat(B.wo).transpose();
    Mat<T> dq(lc.q.rows(), lc.q.cols()), dk(lc.k.rows(), lc.k.cols()),
      dv(lc.v.rows(), lc.v.cols());
    for (std::size_t hd = 0; hd < shape.heads; ++hd) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(hd) * dh;
      const auto& P = lc.probs[hd];
      Mat<T> dP = dout.middleCols(c0, dh) * lc.v.middleCols(c0, dh).transpose();
      dv.middleCols(c0, dh) = P.transpose() * dout.middleCols(c0, dh);
      Eigen::Matrix<T, Eigen::Dynamic, 1> rowdot = (dP.array() * P.array()).rowwise().sum();
      Mat<T> dS = P.array() * (dP.colwise() - rowdot).array();
      dq.middleCols(c0, dh) = dS * lc.k.middleCols(c0, dh) * scale;
      dk.middleCols(c0, dh) = dS.transpose() * lc.q.middleCols(c0, dh) * scale;
    }
    g(B.wq) += lc.a.transpose() * dq;
    g(B.bq).row(0) += dq.colwise().sum();
    g(B.wk) += lc.a.transpose() * dk;
    g(B.bk).row(0) += dk.colwise().sum();
    g(B.wv) += lc.a.transpose() * dv;
    g(B.bv).row(0) += dv.colwise().sum();
    Mat<T> da = dq * p.mat(B.wq).transpose() + dk * p.mat(B.wk).transpose() +
                dv * p.mat(B.wv).transpose();
    dh_ = dh1 + ln_backward<T>(da, p.mat(B.ln1_g).row(0), lc.ln1, g(B.ln1_g).row(0),
                               g(B.ln1_b).row(0));
  }

  g(L.w_in) += c.xn.transpose() * dh_;
  g(L.b_in).row(0) += dh_.colwise().sum();

  const std::size_t k = shape.k();
  if (k == 0)
    return;
  Mat<T> dxn = dh_ * p.mat(L.w_in).transpose();
  const auto grid = shape.grid();
  for (std::size_t j = 0; j < k; ++j) {
    const auto sig = p.signature(j);
    const std::size_t l = sig.size();
    const std::size_t span = grid.window_len - l + 1;
    const auto& profile = c.profiles[j];
    const T chan_scale = p.feature_scale[j];
    // dLoss/d(offset distance), summed over the windows that contain it
    std::vector<T> coeff(profile.size(), T(0));
    for (std::size_t q = 0; q < grid.count; ++q) {
      T dfeat = dxn(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j)) * chan_scale;
      if (dfeat == T(0))
        continue;
      auto sub = std::span<const T>(profile).subspan(grid.start(q), span);
      if (mode == DistMode::Hard) {
        coeff[grid.start(q) + profile_min<T>(sub).second] += dfeat;
        continue;
      }
      T lo = *std::min_element(sub.begin(), sub.end());
      T den = 0, num = 0;
      for (T d : sub) {
        T e = std::exp(-p.alpha * (d - lo));
        den += e;
        num += d * e;
      }
      T soft = num / den;
      for (std::size_t o = 0; o < span; ++o) {
        T d = sub[o];
        T weight = std::exp(-p.alpha * (d - lo)) / den;
        coeff[grid.start(q) + o] += dfeat * weight * (T(1) - p.alpha * (d - soft));
      }
    }
    auto gs = grad.subspan(L[L.sigs[j]].offset, l);
    for (std::size_t o = 0; o < profile.size(); ++o) {
      // the distance is not differentiable where it vanishes; use 0 there
      if (coeff[o] == T(0) || profile[o] == T(0))
        continue;
      T f = coeff[o] / profile[o];
      for (std::size_t i = 0; i < l; ++i)
        gs[i] += f * (sig[i] - s.series[o + i]);
    }
  }
}

inline constexpr double kBceEpsilon = 1e-7;

template<class T>
T bce_term(T prob, int label)
{
  const T eps = static_cast<T>(kBceEpsilon);
  T pc = std::clamp(prob, eps, T(1) - eps);
  return label == 1 ? -std::log(pc) : -std::log(T(1) - pc);
}

//! Mean binary cross-entropy with predictions clamped to [eps, 1-eps].
template<class T>
T bce_loss(std::span<const T> probs, std::span<const int> labels)
{
  if (probs.size() != labels.size() || probs.empty())
    throw Error("bce_loss: size mismatch or empty input");
  T total = 0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    total += bce_term<T>(probs[i], labels[i]);
  return total / static_cast<T>(probs.size());
}

//! dLoss/dlogit of one clamped BCE term.
template<class T>
T bce_logit_grad(T prob, int label)
{
  const T eps = static_cast<T>(kBceEpsilon);
  if (prob < eps || prob > T(1) - eps)
    return T(0);
  return prob - static_cast<T>(label);
}

//! Forward pass for a batch; returns probabilities.
template<class T>
std::vector<T> forward(const ModelParams<T>& p, std::span<const SampleView<T>> batch,
                       DistMode mode)
{
  auto pe = positional_encoding<T>(p.shape.windows(), p.shape.d_model);
  std::vector<T> out;
  out.reserve(batch.size());
  ForwardCache<T> cache;
  for (const auto& s : batch) {
    auto x = joint_features(p, s, mode);
    encode(p, x, pe, cache);
    out.push_back(cache.prob);
  }
  return out;
}

struct BatchStats
{
  double loss = 0.0;
  std::size_t correct = 0;
};

//! Mean batch BCE and, when grad is non-empty, its exact gradient with
//! respect to every parameter (grad is overwritten).
template<class T>
BatchStats loss_and_grad(const ModelParams<T>& p, std::span<const SampleView<T>> batch,
                         DistMode mode, std::vector<T>* grad,
                         const detail::Mat<T>* pe_cached = nullptr)
{
  if (batch.empty())
    throw Error("empty batch");
  detail::Mat<T> pe_local;
  if (!pe_cached)
    pe_local = positional_encoding<T>(p.shape.windows(), p.shape.d_model);
  const auto& pe = pe_cached ? *pe_cached : pe_local;
  if (grad)
    grad->assign(p.values.size(), T(0));
  BatchStats stats;
  T total = 0;
  const T inv_n = T(1) / static_cast<T>(batch.size());
  ForwardCache<T> cache;
  for (const auto& s : batch) {
    auto x = joint_features(p, s, mode, grad ? &cache : nullptr);
    encode(p, x, pe, cache);
    total += bce_term<T>(cache.prob, s.label);
    stats.correct += (cache.prob >= T(0.5) ? 1 : 0) == s.label;
    if (grad)
      backward(p, s, cache, bce_logit_grad<T>(cache.prob, s.label) * inv_n, mode,
               std::span<T>(*grad));
  }
  stats.loss = static_cast<double>(total * inv_n);
  if (grad)
    for (T v : *grad)
      if (!std::isfinite(v))
        throw NumericalError("non-finite gradient");
  return stats;
}

//! Adaptive moment estimation over a flat parameter vector.
template<class T>
class Adam
{
public:
  explicit Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
    : lr_(lr)
    , beta1_(beta1)
    , beta2_(beta2)
    , eps_(eps)
    , m_(n, T(0))
    , v_(n, T(0))
  {
  }

  void step(std::vector<T>& params, const std::vector<T>& grad)
  {
    ++t_;
    if (lr_ == 0.0)
      return;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T step = static_cast<T>(lr_ / c1), vc = static_cast<T>(1.0 / c2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (T(1) - b1) * grad[i];
      v_[i] = b2 * v_[i] + (T(1) - b2) * grad[i] * grad[i];
      params[i] -= step * m_[i] / (std::sqrt(v_[i] * vc) + static_cast<T>(eps_));
    }
  }

  std::size_t steps() const { return t_; }

private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<T> m_, v_;
  std::size_t t_ = 0;
};

} // namespace sigtime
