#pragma once

#include "sigtime/core.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace sigtime {

class ConfigError : public Error
{
public:
  using Error::Error;
};

//! Feature-channel configuration of the windowed Transformer pipeline.
enum class Variant
{
  VT,  // raw window values
  SFE, // statistical features only
  SPT, // signature distances only
  JT   // signatures + statistics
};

enum class Precision
{
  Double,
  Float
};

inline std::string to_string(Variant v)
{
  switch (v) {
    case Variant::VT:
      return "VT";
    case Variant::SFE:
      return "S-FE";
    case Variant::SPT:
      return "SP-T";
    case Variant::JT:
      return "JT";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s)
{
  if (s == "VT")
    return Variant::VT;
  if (s == "S-FE" || s == "SFE")
    return Variant::SFE;
  if (s == "SP-T" || s == "SPT")
    return Variant::SPT;
  if (s == "JT")
    return Variant::JT;
  throw ConfigError("unknown variant '" + std::string(s) + "'");
}

inline std::string to_string(Precision p)
{
  return p == Precision::Double ? "double" : "float";
}

inline Precision parse_precision(std::string_view s)
{
  if (s == "double")
    return Precision::Double;
  if (s == "float")
    return Precision::Float;
  throw ConfigError("unknown precision '" + std::string(s) + "'");
}

//! Number of statistical features produced per window.
inline constexpr std::size_t kStatFeatureCount = 8;

//! All run parameters. Zero-valued window_len / min_sig_len / max_sig_len
//! are resolved against the series length by resolve().
struct RunConfig
{
  std::string dataset_name = "dataset";
  std::string train_path;
  std::string test_path;

  std::size_t k = 30;
  double pips_rate = 0.2;
  std::size_t window_len = 0;
  std::size_t window_step = 10;
  std::size_t r = kStatFeatureCount;
  double softmin_alpha = 10.0;
  double learning_rate = 0.0005;
  std::size_t batch_size = 128;
  std::size_t epochs = 300;
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  Variant variant = Variant::JT;
  std::size_t min_sig_len = 0;
  std::size_t max_sig_len = 0;

  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t ffn_dim = 128;
  std::size_t layers = 2;
  Precision precision = Precision::Double;

  bool adjacent_pips_only = false;
  std::size_t max_candidates = 2000;
  double valid_fraction = 0.2;
  double threshold = 0.8;
  bool soft_inference = false;

  //! Checks the invariants that do not depend on the series length.
  void validate() const
  {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (k < 1)
      fail("k must be >= 1");
    if (!(pips_rate > 0.0 && pips_rate <= 1.0))
      fail("pips_rate must lie in (0,1]");
    if (window_step < 1)
      fail("window_step must be >= 1");
    if (window_len != 0 && window_step > window_len)
      fail("window_step must be <= window_len");
    if (window_len != 0 && max_sig_len > window_len)
      fail("max_sig_len must be <= window_len");
    if (min_sig_len != 0 && min_sig_len < 2)
      fail("min_sig_len must be >= 2");
    if (min_sig_len != 0 && max_sig_len != 0 && min_sig_len > max_sig_len)
      fail("min_sig_len must be <= max_sig_len");
    if (r > kStatFeatureCount)
      fail("r must be <= " + std::to_string(kStatFeatureCount));
    if (!(softmin_alpha > 0.0))
      fail("softmin_alpha must be positive");
    if (!(learning_rate >= 0.0))
      fail("learning_rate must be non-negative");
    if (batch_size < 1)
      fail("batch_size must be >= 1");
    if (epochs < 1)
      fail("epochs must be >= 1");
    if (d_model < 1 || heads < 1 || d_model % heads != 0)
      fail("d_model must be a positive multiple of heads");
    if (ffn_dim < 1 || layers < 1)
      fail("ffn_dim and layers must be >= 1");
    if (!(valid_fraction >= 0.0 && valid_fraction < 1.0))
      fail("valid_fraction must lie in [0,1)");
    if (!(threshold >= 0.0 && threshold <= 1.0))
      fail("threshold must lie in [0,1]");
  }

  //! Fills the length-dependent defaults for series of length m and checks
  //! the resulting window grid.
  RunConfig resolve(std::size_t m) const
  {
    validate();
    RunConfig out = *this;
    auto ceil_frac = [m](double f) {
      return static_cast<std::size_t>(std::ceil(f * static_cast<double>(m)));
    };
    if (out.window_len == 0)
      out.window_len = std::max(ceil_frac(0.2), out.max_sig_len);
    if (out.max_sig_len == 0)
      out.max_sig_len = out.window_len;
    if (out.min_sig_len == 0)
      out.min_sig_len =
        std::min(std::max<std::size_t>(3, ceil_frac(0.05)), out.max_sig_len);
    if (out.window_len > m)
      throw ConfigError("window_len " + std::to_string(out.window_len) +
                        " exceeds series length " + std::to_string(m));
    out.validate();
    if (out.min_sig_len > out.max_sig_len)
      throw ConfigError("min_sig_len must be <= max_sig_len");
    return out;
  }

  std::size_t window_count(std::size_t m) const
  {
    return (m - window_len) / window_step + 1;
  }
};

//! One documented configuration key. Keys are shared by the config file and
//! the command line (flag --some-key maps to key some_key).
struct ConfigField
{
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const nlohmann::json&)> set;
  std::function<nlohmann::json(const RunConfig&)> get;
};

namespace detail {

template<class T>
ConfigField make_field(std::string name, T RunConfig::*member,
                       std::string help)
{
  ConfigField f;
  f.name = name;
  f.help = std::move(help);
  f.set = [member, name](RunConfig& c, const nlohmann::json& j) {
    try {
      if constexpr (std::is_same_v<T, Variant>)
        c.*member = parse_variant(j.get<std::string>());
      else if constexpr (std::is_same_v<T, Precision>)
        c.*member = parse_precision(j.get<std::string>());
      else if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!j.is_number_integer() || j.get<std::int64_t>() < 0)
          throw ConfigError("expected a non-negative integer");
        c.*member = j.get<T>();
      } else if constexpr (std::is_same_v<T, double>) {
        if (!j.is_number())
          throw ConfigError("expected a number");
        c.*member = j.get<double>();
      } else {
        c.*member = j.get<T>();
      }
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + name + "': wrong value type");
    } catch (const ConfigError& e) {
      throw ConfigError("config key '" + name + "': " + e.what());
    }
  };
  f.get = [member](const RunConfig& c) -> nlohmann::json {
    if constexpr (std::is_same_v<T, Variant> || std::is_same_v<T, Precision>)
      return to_string(c.*member);
    else
      return c.*member;
  };
  return f;
}

} // namespace detail

inline const std::vector<ConfigField>& config_fields()
{
  using detail::make_field;
  static const std::vector<ConfigField> fields = {
    make_field("dataset_name", &RunConfig::dataset_name, "label used in reports"),
    make_field("train_path", &RunConfig::train_path, "training set (UCR TSV)"),
    make_field("test_path", &RunConfig::test_path, "test set (UCR TSV), optional"),
    make_field("k", &RunConfig::k, "number of signatures"),
    make_field("pips_rate", &RunConfig::pips_rate, "PIP count as a fraction of m"),
    make_field("window_len", &RunConfig::window_len, "sliding window length (0 = auto)"),
    make_field("window_step", &RunConfig::window_step, "sliding window step"),
    make_field("r", &RunConfig::r, "number of statistical features (<= 8)"),
    make_field("softmin_alpha", &RunConfig::softmin_alpha, "soft-minimum sharpness"),
    make_field("learning_rate", &RunConfig::learning_rate, "Adam step size"),
    make_field("batch_size", &RunConfig::batch_size, "mini-batch size"),
    make_field("epochs", &RunConfig::epochs, "maximum number of epochs"),
    make_field("patience", &RunConfig::patience, "early-stopping patience in epochs"),
    make_field("seed", &RunConfig::seed, "random seed"),
    make_field("variant", &RunConfig::variant, "VT, S-FE, SP-T or JT"),
    make_field("min_sig_len", &RunConfig::min_sig_len, "shortest signature (0 = auto)"),
    make_field("max_sig_len", &RunConfig::max_sig_len, "longest signature (0 = window_len)"),
    make_field("d_model", &RunConfig::d_model, "encoder width"),
    make_field("heads", &RunConfig::heads, "attention heads"),
    make_field("ffn_dim", &RunConfig::ffn_dim, "feed-forward hidden width"),
    make_field("layers", &RunConfig::layers, "encoder layers"),
    make_field("precision", &RunConfig::precision, "double or float"),
    make_field("adjacent_pips_only", &RunConfig::adjacent_pips_only,
               "only use consecutive PIP pairs as candidates"),
    make_field("max_candidates", &RunConfig::max_candidates,
               "cap on scored candidates, sampled by seed (0 = all)"),
    make_field("valid_fraction", &RunConfig::valid_fraction,
               "held-out share of train for early stopping (0 = use train)"),
    make_field("threshold", &RunConfig::threshold, "default match-score threshold"),
    make_field("soft_inference", &RunConfig::soft_inference,
               "use the soft minimum for prediction features"),
  };
  return fields;
}

inline const ConfigField& config_field(std::string_view name)
{
  for (const auto& f : config_fields())
    if (f.name == name)
      return f;
  throw ConfigError("unknown config key '" + std::string(name) + "'");
}

inline nlohmann::json to_json(const RunConfig& c)
{
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : config_fields())
    j[f.name] = f.get(c);
  return j;
}

//! Applies every key of a flat JSON object on top of `base`. Unknown keys
//! are rejected.
inline RunConfig apply_json(RunConfig base, const nlohmann::json& j)
{
  if (!j.is_object())
    throw ConfigError("config document must be a JSON object");
  for (const auto& [key, value] : j.items())
    config_field(key).set(base, value);
  return base;
}

inline RunConfig config_from_json(const nlohmann::json& j)
{
  RunConfig c = apply_json(RunConfig{}, j);
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  return config_from_json(j);
}

//! Parses a command-line string for the given key into a JSON value of the
//! key's type (strings stay strings, everything else goes through the JSON
//! parser so "0.5", "true" and "12" work as expected).
inline void set_from_string(RunConfig& c, std::string_view key,
                            const std::string& text)
{
  const auto& field = config_field(key);
  auto current = field.get(c);
  nlohmann::json value;
  if (current.is_string())
    value = text;
  else {
    try {
      value = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
      throw ConfigError("config key '" + std::string(key) +
                        "': cannot parse '" + text + "'");
    }
  }
  field.set(c, value);
}

} // namespace sigtime
