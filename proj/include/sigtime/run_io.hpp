#pragma once

#include "sigtime/config.hpp"
#include "sigtime/init.hpp"
#include "sigtime/train.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

// Run directory layout (all JSON, each document carries "format" and
// "version"):
//   config.json           resolved configuration snapshot
//   signatures_init.json  initial signatures and candidate statistics
//   signatures.json       learned signatures with recomputed gain/threshold
//   model.json            shape, parameter blocks, flat values, input scaling
//   history.json          per-epoch loss and accuracy
namespace sigtime {

inline constexpr int kRunFormatVersion = 1;

inline nlohmann::json to_json(const Signature& s)
{
  return { { "id", s.id },
           { "values", s.values },
           { "ig", s.ig },
           { "theta", s.theta },
           { "source",
             { { "sample", s.source.sample },
               { "start", s.source.start },
               { "end", s.source.end } } } };
}

inline Signature signature_from_json(const nlohmann::json& j)
{
  Signature s;
  s.id = j.at("id").get<std::size_t>();
  s.values = j.at("values").get<std::vector<double>>();
  s.ig = j.at("ig").get<double>();
  s.theta = j.at("theta").get<double>();
  const auto& src = j.at("source");
  s.source = { src.at("sample").get<std::size_t>(), src.at("start").get<std::size_t>(),
               src.at("end").get<std::size_t>() };
  return s;
}

inline nlohmann::json signatures_json(const std::vector<Signature>& sigs)
{
  auto arr = nlohmann::json::array();
  for (const auto& s : sigs)
    arr.push_back(to_json(s));
  return arr;
}

inline std::vector<Signature> signatures_from_json(const nlohmann::json& arr)
{
  std::vector<Signature> out;
  for (const auto& j : arr)
    out.push_back(signature_from_json(j));
  return out;
}

namespace detail {

inline nlohmann::json header(const std::string& kind)
{
  return { { "format", "sigtime-" + kind }, { "version", kRunFormatVersion } };
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
  std::ofstream out(path);
  if (!out)
    throw Error("cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out)
    throw Error("write failed for " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path, const std::string& kind)
{
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "sigtime-" + kind)
    throw Error(path.string() + ": not a sigtime " + kind + " document");
  if (j.value("version", 0) != kRunFormatVersion)
    throw Error(path.string() + ": unsupported version " + j.value("version", nlohmann::json()).dump());
  return j;
}

} // namespace detail

inline nlohmann::json shape_json(const ModelShape& s)
{
  return { { "variant", to_string(s.variant) }, { "length", s.length },
           { "window_len", s.window_len },      { "window_step", s.window_step },
           { "sig_lengths", s.sig_lengths },    { "extra", s.extra },
           { "d_model", s.d_model },            { "heads", s.heads },
           { "ffn_dim", s.ffn_dim },            { "layers", s.layers } };
}

inline ModelShape shape_from_json(const nlohmann::json& j)
{
  ModelShape s;
  s.variant = parse_variant(j.at("variant").get<std::string>());
  s.length = j.at("length").get<std::size_t>();
  s.window_len = j.at("window_len").get<std::size_t>();
  s.window_step = j.at("window_step").get<std::size_t>();
  s.sig_lengths = j.at("sig_lengths").get<std::vector<std::size_t>>();
  s.extra = j.at("extra").get<std::size_t>();
  s.d_model = j.at("d_model").get<std::size_t>();
  s.heads = j.at("heads").get<std::size_t>();
  s.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  s.layers = j.at("layers").get<std::size_t>();
  return s;
}

inline nlohmann::json model_json(const ModelParams<double>& p)
{
  auto j = detail::header("model");
  j["shape"] = shape_json(p.shape);
  auto blocks = nlohmann::json::array();
  for (const auto& b : p.layout.blocks)
    blocks.push_back({ { "name", b.name },
                       { "kind", to_string(b.kind) },
                       { "offset", b.offset },
                       { "rows", b.rows },
                       { "cols", b.cols } });
  j["blocks"] = blocks;
  j["values"] = p.values;
  j["feature_shift"] = p.feature_shift;
  j["feature_scale"] = p.feature_scale;
  j["softmin_alpha"] = p.alpha;
  return j;
}

inline ModelParams<double> model_from_json(const nlohmann::json& j)
{
  ModelParams<double> p(shape_from_json(j.at("shape")), j.at("softmin_alpha").get<double>());
  auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != p.values.size())
    throw Error("model has " + std::to_string(values.size()) + " values, shape needs " +
                std::to_string(p.values.size()));
  const auto& blocks = j.at("blocks");
  if (blocks.size() != p.layout.blocks.size())
    throw Error("model block table does not match its shape");
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].at("name").get<std::string>() != p.layout[i].name ||
        blocks[i].at("offset").get<std::size_t>() != p.layout[i].offset)
      throw Error("model block " + p.layout[i].name + " does not match its shape");
  p.values = std::move(values);
  p.feature_shift = j.at("feature_shift").get<std::vector<double>>();
  p.feature_scale = j.at("feature_scale").get<std::vector<double>>();
  if (p.feature_shift.size() != p.shape.channels() ||
      p.feature_scale.size() != p.shape.channels())
    throw Error("model input scaling does not match its shape");
  return p;
}

inline nlohmann::json history_json(const TrainedModel& m)
{
  auto j = detail::header("history");
  auto rows = nlohmann::json::array();
  for (const auto& r : m.history)
    rows.push_back({ { "epoch", r.epoch },
                     { "train_loss", r.train_loss },
                     { "train_accuracy", r.train_accuracy },
                     { "valid_loss", r.valid_loss },
                     { "valid_accuracy", r.valid_accuracy } });
  j["epochs"] = rows;
  j["best_epoch"] = m.best_epoch;
  return j;
}

inline void write_config(const std::filesystem::path& dir, const RunConfig& cfg)
{
  std::filesystem::create_directories(dir);
  auto j = detail::header("config");
  j["config"] = to_json(cfg);
  detail::write_json(dir / "config.json", j);
}

inline RunConfig read_run_config(const std::filesystem::path& dir)
{
  return config_from_json(detail::read_json(dir / "config.json", "config").at("config"));
}

inline void write_init(const std::filesystem::path& dir, const InitResult& init)
{
  std::filesystem::create_directories(dir);
  auto j = detail::header("signatures");
  j["stage"] = "init";
  j["candidates_generated"] = init.candidates_generated;
  j["candidates_scored"] = init.candidates_scored;
  j["saturated"] = init.saturated;
  j["signatures"] = signatures_json(init.signatures);
  detail::write_json(dir / "signatures_init.json", j);
}

inline InitResult read_init(const std::filesystem::path& dir)
{
  auto j = detail::read_json(dir / "signatures_init.json", "signatures");
  InitResult r;
  r.candidates_generated = j.at("candidates_generated").get<std::size_t>();
  r.candidates_scored = j.at("candidates_scored").get<std::size_t>();
  r.saturated = j.at("saturated").get<bool>();
  r.signatures = signatures_from_json(j.at("signatures"));
  return r;
}

//! Writes the complete run directory. Elapsed time is not stored so that
//! identical runs produce identical files.
inline void write_run(const std::filesystem::path& dir, const TrainedModel& m)
{
  std::filesystem::create_directories(dir);
  write_config(dir, m.config);
  auto sigs = detail::header("signatures");
  sigs["stage"] = "trained";
  sigs["signatures"] = signatures_json(m.signatures);
  sigs["initial"] = signatures_json(m.initial);
  detail::write_json(dir / "signatures.json", sigs);
  detail::write_json(dir / "model.json", model_json(m.params));
  detail::write_json(dir / "history.json", history_json(m));
}

inline TrainedModel read_run(const std::filesystem::path& dir)
{
  TrainedModel m;
  m.config = read_run_config(dir);
  auto sigs = detail::read_json(dir / "signatures.json", "signatures");
  m.signatures = signatures_from_json(sigs.at("signatures"));
  m.initial = signatures_from_json(sigs.at("initial"));
  m.params = model_from_json(detail::read_json(dir / "model.json", "model"));
  auto h = detail::read_json(dir / "history.json", "history");
  for (const auto& r : h.at("epochs"))
    m.history.push_back({ r.at("epoch").get<std::size_t>(), r.at("train_loss").get<double>(),
                          r.at("train_accuracy").get<double>(),
                          r.at("valid_loss").get<double>(),
                          r.at("valid_accuracy").get<double>() });
  m.best_epoch = h.at("best_epoch").get<std::size_t>();
  if (m.signatures.size() != m.params.shape.k())
    throw Error("run directory: signature count does not match the model");
  return m;
}

} // namespace sigtime
