#pragma once

#include "sigtime/core.hpp"
#include "sigtime/features.hpp"
#include "sigtime/train.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace sigtime {

inline constexpr const char* kBundleSchema = "sigtime-bundle";
inline constexpr const char* kBundleVersion = "1.0";
inline constexpr double kKdeBandwidth = 0.05;
inline constexpr std::size_t kKdeGridPoints = 201;
inline constexpr std::size_t kDefaultVisibleSignatures = 10;

inline double gaussian_kernel(double x)
{
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

//! Evenly spaced grid over [lo, hi] with both endpoints included.
inline std::vector<double> linear_grid(double lo, double hi, std::size_t points)
{
  if (points < 2)
    throw Error("linear_grid needs at least two points");
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  g.back() = hi;
  return g;
}

//! Gaussian kernel density estimate evaluated at each grid point.
inline std::vector<double> kde_density(std::span<const double> scores, double bandwidth,
                                       std::span<const double> grid)
{
  if (!(bandwidth > 0.0))
    throw Error("kde bandwidth must be positive");
  std::vector<double> out(grid.size(), 0.0);
  if (scores.empty())
    return out;
  const double norm = 1.0 / (static_cast<double>(scores.size()) * bandwidth);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (double s : scores)
      acc += gaussian_kernel((grid[g] - s) / bandwidth);
    out[g] = acc * norm;
  }
  return out;
}

//! Divides every density by the single global maximum; all-zero input
//! stays zero.
inline void normalize_densities(std::vector<std::vector<double>>& densities)
{
  double mx = 0.0;
  for (const auto& d : densities)
    for (double v : d)
      mx = std::max(mx, v);
  if (mx <= 0.0)
    return;
  for (auto& d : densities)
    for (double& v : d)
      v /= mx;
}

struct BundleClass
{
  int label = 0;
  double raw_label = 0.0;
  std::string name;
  std::string color;
};

struct BundleSignature
{
  std::size_t id = 0;   // index in the trained model
  std::size_t rank = 0; // 1 = highest information gain
  std::vector<double> values;
  double ig = 0.0;
  double theta = 0.0;
  SignatureSource source;
  bool default_visible = false;
  double col_min = 0.0; // training distance extremes used for scores
  double col_max = 0.0;
};

//! Everything the exploration UI needs. Signature-indexed arrays follow the
//! rank order of `signatures`.
struct ExplorationBundle
{
  std::string name;
  std::size_t n = 0, m = 0;
  std::vector<BundleClass> classes;
  std::vector<std::size_t> ids;
  std::vector<int> labels;
  std::vector<std::vector<double>> series;
  std::vector<BundleSignature> signatures;
  std::vector<std::vector<double>> scores;             // n x k
  std::vector<std::vector<std::size_t>> offsets;       // n x k
  double threshold = 0.8;
  std::vector<ClusterAssignment> clusters;
  double bandwidth = kKdeBandwidth;
  std::vector<double> kde_grid;
  std::vector<std::array<std::vector<double>, 2>> kde; // k x class x grid
  std::vector<std::vector<double>> dtw;                // k x k

  std::size_t k() const { return signatures.size(); }
  std::vector<double> flat_scores() const
  {
    std::vector<double> out;
    for (const auto& row : scores)
      out.insert(out.end(), row.begin(), row.end());
    return out;
  }
};

struct BundleOptions
{
  std::string name = "dataset";
  double threshold = 0.8;
  std::optional<LabelMapping> mapping;
};

//! Builds the bundle for `data` from a trained model. Scores are normalized
//! with the per-signature distance extremes over `train`.
inline ExplorationBundle export_bundle(const TrainedModel& model, const Dataset& data,
                                       const Dataset& train, const BundleOptions& opt)
{
  if (model.signatures.empty())
    throw Error("export_bundle: the model has no signatures (variant " +
                to_string(model.config.variant) + ")");
  if (data.size() == 0)
    throw Error("export_bundle: empty dataset");
  if (!(opt.threshold >= 0.0 && opt.threshold <= 1.0))
    throw Error("export_bundle: threshold must lie in [0,1]");

  ExplorationBundle b;
  b.name = opt.name;
  b.n = data.size();
  b.m = data.length();
  b.threshold = opt.threshold;
  const char* colors[2] = { "#1f77b4", "#d62728" };
  for (int c = 0; c < 2; ++c) {
    BundleClass bc;
    bc.label = c;
    bc.raw_label = opt.mapping ? (c == 0 ? opt.mapping->negative : opt.mapping->positive)
                               : static_cast<double>(c);
    bc.name = "class " + std::to_string(c);
    bc.color = colors[c];
    b.classes.push_back(bc);
  }
  for (const auto& s : data.samples()) {
    b.ids.push_back(s.id);
    b.labels.push_back(s.label);
    b.series.push_back(s.values);
  }

  std::vector<std::size_t> order(model.signatures.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    return model.signatures[a].ig > model.signatures[c].ig;
  });
  std::vector<Signature> ranked;
  for (auto i : order)
    ranked.push_back(model.signatures[i]);

  const auto train_m = signature_transform(train, ranked);
  const auto data_m = signature_transform(data, ranked);
  const std::size_t k = ranked.size();
  for (std::size_t r = 0; r < k; ++r) {
    BundleSignature s;
    s.id = order[r];
    s.rank = r + 1;
    s.values = ranked[r].values;
    s.ig = ranked[r].ig;
    s.theta = ranked[r].theta;
    s.source = ranked[r].source;
    s.default_visible = r < kDefaultVisibleSignatures;
    s.col_min = train_m.col_min[r];
    s.col_max = train_m.col_max[r];
    b.signatures.push_back(std::move(s));
  }

  b.scores.assign(b.n, std::vector<double>(k));
  b.offsets.assign(b.n, std::vector<std::size_t>(k));
  for (std::size_t i = 0; i < b.n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      b.scores[i][j] = match_score_from_dist(data_m.at(i, j), train_m.col_min[j],
                                             train_m.col_max[j]);
      b.offsets[i][j] = data_m.offset(i, j);
    }
  b.clusters = assign_clusters(b.flat_scores(), k, b.threshold);

  b.kde_grid = linear_grid(0.0, 1.0, kKdeGridPoints);
  std::vector<std::vector<double>> dens;
  for (std::size_t j = 0; j < k; ++j)
    for (int c = 0; c < 2; ++c) {
      std::vector<double> col;
      for (std::size_t i = 0; i < b.n; ++i)
        if (b.labels[i] == c)
          col.push_back(b.scores[i][j]);
      dens.push_back(kde_density(col, b.bandwidth, b.kde_grid));
    }
  normalize_densities(dens);
  b.kde.resize(k);
  for (std::size_t j = 0; j < k; ++j)
    for (int c = 0; c < 2; ++c)
      b.kde[j][static_cast<std::size_t>(c)] = std::move(dens[2 * j + static_cast<std::size_t>(c)]);

  b.dtw.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t c = a + 1; c < k; ++c)
      b.dtw[a][c] = b.dtw[c][a] = dtw_distance(ranked[a].values, ranked[c].values);
  return b;
}

inline nlohmann::json clusters_json(const std::vector<ClusterAssignment>& clusters)
{
  auto arr = nlohmann::json::array();
  for (const auto& c : clusters) {
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < c.members.size(); ++j)
      if (c.members[j])
        members.push_back(j);
    arr.push_back({ { "cluster", c.cluster ? nlohmann::json(*c.cluster) : nlohmann::json() },
                    { "members", members } });
  }
  return arr;
}

inline std::vector<ClusterAssignment> clusters_from_json(const nlohmann::json& arr,
                                                         std::size_t k)
{
  std::vector<ClusterAssignment> out;
  for (const auto& c : arr) {
    ClusterAssignment a;
    a.members.assign(k, false);
    for (auto j : c.at("members").get<std::vector<std::size_t>>())
      a.members.at(j) = true;
    if (!c.at("cluster").is_null())
      a.cluster = c.at("cluster").get<std::size_t>();
    out.push_back(std::move(a));
  }
  return out;
}

inline nlohmann::json bundle_meta_json(const ExplorationBundle& b)
{
  auto classes = nlohmann::json::array();
  for (const auto& c : b.classes)
    classes.push_back({ { "label", c.label },
                        { "raw_label", c.raw_label },
                        { "name", c.name },
                        { "color", c.color } });
  return { { "schema", kBundleSchema },
           { "version", kBundleVersion },
           { "name", b.name },
           { "n", b.n },
           { "m", b.m },
           { "k", b.k() },
           { "classes", classes },
           { "threshold", b.threshold } };
}

inline nlohmann::json bundle_series_json(const ExplorationBundle& b)
{
  return { { "ids", b.ids }, { "labels", b.labels }, { "values", b.series } };
}

inline nlohmann::json bundle_signatures_json(const ExplorationBundle& b)
{
  auto arr = nlohmann::json::array();
  for (const auto& s : b.signatures)
    arr.push_back({ { "id", s.id },
                    { "rank", s.rank },
                    { "values", s.values },
                    { "ig", s.ig },
                    { "theta", s.theta },
                    { "source",
                      { { "sample", s.source.sample },
                        { "start", s.source.start },
                        { "end", s.source.end } } },
                    { "default_visible", s.default_visible },
                    { "col_min", s.col_min },
                    { "col_max", s.col_max } });
  return arr;
}

inline nlohmann::json bundle_scores_json(const ExplorationBundle& b)
{
  return { { "scores", b.scores }, { "offsets", b.offsets } };
}

inline nlohmann::json bundle_kde_json(const ExplorationBundle& b)
{
  auto dens = nlohmann::json::array();
  for (const auto& per_sig : b.kde)
    dens.push_back({ per_sig[0], per_sig[1] });
  return { { "bandwidth", b.bandwidth }, { "grid", b.kde_grid }, { "densities", dens } };
}

inline nlohmann::json to_json(const ExplorationBundle& b)
{
  auto j = bundle_meta_json(b);
  j["series"] = bundle_series_json(b);
  j["signatures"] = bundle_signatures_json(b);
  auto scores = bundle_scores_json(b);
  j["scores"] = scores["scores"];
  j["offsets"] = scores["offsets"];
  j["clusters"] = clusters_json(b.clusters);
  j["kde"] = bundle_kde_json(b);
  j["dtw"] = b.dtw;
  return j;
}

inline ExplorationBundle bundle_from_json(const nlohmann::json& j)
{
  if (j.value("schema", "") != kBundleSchema)
    throw Error("not an exploration bundle");
  if (j.value("version", "") != kBundleVersion)
    throw Error("unsupported bundle version " + j.value("version", std::string("?")));
  ExplorationBundle b;
  try {
    b.name = j.at("name").get<std::string>();
    b.n = j.at("n").get<std::size_t>();
    b.m = j.at("m").get<std::size_t>();
    b.threshold = j.at("threshold").get<double>();
    for (const auto& c : j.at("classes"))
      b.classes.push_back({ c.at("label").get<int>(), c.at("raw_label").get<double>(),
                            c.at("name").get<std::string>(), c.at("color").get<std::string>() });
    const auto& series = j.at("series");
    b.ids = series.at("ids").get<std::vector<std::size_t>>();
    b.labels = series.at("labels").get<std::vector<int>>();
    b.series = series.at("values").get<std::vector<std::vector<double>>>();
    for (const auto& s : j.at("signatures")) {
      BundleSignature bs;
      bs.id = s.at("id").get<std::size_t>();
      bs.rank = s.at("rank").get<std::size_t>();
      bs.values = s.at("values").get<std::vector<double>>();
      bs.ig = s.at("ig").get<double>();
      bs.theta = s.at("theta").get<double>();
      const auto& src = s.at("source");
      bs.source = { src.at("sample").get<std::size_t>(), src.at("start").get<std::size_t>(),
                    src.at("end").get<std::size_t>() };
      bs.default_visible = s.at("default_visible").get<bool>();
      bs.col_min = s.at("col_min").get<double>();
      bs.col_max = s.at("col_max").get<double>();
      b.signatures.push_back(std::move(bs));
    }
    b.scores = j.at("scores").get<std::vector<std::vector<double>>>();
    b.offsets = j.at("offsets").get<std::vector<std::vector<std::size_t>>>();
    b.clusters = clusters_from_json(j.at("clusters"), b.signatures.size());
    const auto& kde = j.at("kde");
    b.bandwidth = kde.at("bandwidth").get<double>();
    b.kde_grid = kde.at("grid").get<std::vector<double>>();
    for (const auto& per_sig : kde.at("densities"))
      b.kde.push_back({ per_sig.at(0).get<std::vector<double>>(),
                        per_sig.at(1).get<std::vector<double>>() });
    b.dtw = j.at("dtw").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed bundle: ") + e.what());
  }
  const std::size_t k = b.signatures.size();
  auto rows_ok = [](const auto& mat, std::size_t rows, std::size_t cols) {
    return mat.size() == rows &&
           std::all_of(mat.begin(), mat.end(), [cols](const auto& r) { return r.size() == cols; });
  };
  if (b.ids.size() != b.n || b.labels.size() != b.n || !rows_ok(b.series, b.n, b.m) ||
      !rows_ok(b.scores, b.n, k) || !rows_ok(b.offsets, b.n, k) || b.clusters.size() != b.n ||
      b.kde.size() != k || !rows_ok(b.dtw, k, k))
    throw Error("malformed bundle: inconsistent dimensions");
  return b;
}

inline void write_bundle(const std::filesystem::path& path, const ExplorationBundle& b)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error("cannot write " + path.string());
  out << to_json(b).dump() << '\n';
  if (!out)
    throw Error("write failed for " + path.string());
}

inline ExplorationBundle read_bundle(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open " + path.string());
  try {
    return bundle_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

} // namespace sigtime
