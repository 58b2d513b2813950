#pragma once

#include "sigtime/core.hpp"
#include "sigtime/preprocess.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace sigtime {

class ParseError : public Error
{
public:
  ParseError(const std::string& path, std::size_t line, const std::string& msg)
    : Error(path + ":" + std::to_string(line) + ": " + msg)
    , line_(line)
  {
  }

  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\n'))
    s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ')
    s.remove_prefix(1);
  return s;
}

inline bool parse_double(std::string_view tok, double& out)
{
  tok = trim(tok);
  if (tok.empty())
    return false;
  if (tok.front() == '+')
    tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

// Splits one row. The separator of a file is fixed by its first data row;
// a row that uses a different one is rejected.
inline std::vector<double> parse_row(std::string_view line, char& sep,
                                     const std::string& path,
                                     std::size_t line_no, bool allow_nonfinite)
{
  bool has_tab = line.find('\t') != std::string_view::npos;
  bool has_comma = line.find(',') != std::string_view::npos;
  if (has_tab && has_comma)
    throw ParseError(path, line_no, "mixed tab and comma separators");
  char row_sep = has_comma ? ',' : '\t';
  if (sep == 0)
    sep = row_sep;
  else if (row_sep != sep && (has_tab || has_comma))
    throw ParseError(path, line_no,
                     std::string("separator differs from earlier rows (expected ") +
                       (sep == '\t' ? "tab" : "comma") + ")");
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    auto next = line.find(sep, pos);
    if (next == std::string_view::npos)
      next = line.size();
    auto tok = line.substr(pos, next - pos);
    double v = 0.0;
    if (!parse_double(tok, v))
      throw ParseError(path, line_no,
                       "non-numeric token '" + std::string(trim(tok)) + "'");
    if (!allow_nonfinite && !std::isfinite(v))
      throw ParseError(path, line_no, "non-finite value");
    out.push_back(v);
    pos = next + 1;
  }
  return out;
}

template<class RowFn>
void for_each_row(const std::string& path, RowFn&& fn)
{
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim(line);
    if (view.empty() || view.front() == '#')
      continue;
    fn(view, line_no);
  }
}

} // namespace detail

//! Reads label-first rows of possibly different lengths; non-finite values
//! are kept so that filter_series can account for them.
inline std::vector<RawSeries> read_raw_series(const std::string& path)
{
  std::vector<RawSeries> out;
  char sep = 0;
  detail::for_each_row(path, [&](std::string_view row, std::size_t line_no) {
    auto values = detail::parse_row(row, sep, path, line_no, true);
    if (!std::isfinite(values.front()))
      throw ParseError(path, line_no, "non-finite label");
    RawSeries s;
    s.label = values.front();
    s.values.assign(values.begin() + 1, values.end());
    out.push_back(std::move(s));
  });
  return out;
}

struct LoadedDataset
{
  Dataset data;
  LabelMapping mapping;
};

//! Strict UCR-style loader: every row is a label followed by m values, one
//! separator (tab or comma) per file. Labels are mapped onto {0,1} and each
//! sample is min-max normalized.
inline LoadedDataset load_ucr_tsv_with_mapping(const std::string& path)
{
  std::vector<double> raw_labels;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_of;
  char sep = 0;
  std::size_t m = 0;
  detail::for_each_row(path, [&](std::string_view row, std::size_t line_no) {
    auto values = detail::parse_row(row, sep, path, line_no, false);
    if (values.size() < 2)
      throw ParseError(path, line_no, "row has no values after the label");
    std::size_t len = values.size() - 1;
    if (m == 0)
      m = len;
    else if (len != m)
      throw ParseError(path, line_no,
                       "row length " + std::to_string(len) +
                         " differs from expected length " + std::to_string(m));
    raw_labels.push_back(values.front());
    rows.emplace_back(values.begin() + 1, values.end());
    line_of.push_back(line_no);
  });
  if (rows.empty())
    throw Error(path + ": no data rows");

  LoadedDataset out;
  try {
    out.mapping = map_labels(raw_labels);
  } catch (const UnsupportedDataset& e) {
    throw UnsupportedDataset(path + ": " + e.what());
  }
  std::vector<TimeSeries> samples;
  samples.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    TimeSeries ts;
    ts.id = i;
    ts.label = out.mapping.labels[i];
    try {
      ts.values = normalize(rows[i]);
    } catch (const DegenerateInput& e) {
      throw ParseError(path, line_of[i], e.what());
    }
    samples.push_back(std::move(ts));
  }
  out.data = Dataset(std::move(samples));
  return out;
}

inline Dataset load_ucr_tsv(const std::string& path)
{
  return load_ucr_tsv_with_mapping(path).data;
}

//! Writes label-first tab-separated rows with round-trip precision.
inline void write_ucr_tsv(const std::string& path, const Dataset& data)
{
  std::ofstream out(path);
  if (!out)
    throw Error("cannot write " + path);
  char buf[64];
  for (const auto& s : data.samples()) {
    out << s.label;
    for (double v : s.values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out)
    throw Error("write failed for " + path);
}

//! Writes raw-labelled rows (any lengths) in the same text format.
inline void write_raw_series(const std::string& path, const std::vector<RawSeries>& rows)
{
  std::ofstream out(path);
  if (!out)
    throw Error("cannot write " + path);
  char buf[64];
  for (const auto& s : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", s.label);
    out << buf;
    for (double v : s.values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << '\t' << buf;
    }
    out << '\n';
  }
  if (!out)
    throw Error("write failed for " + path);
}

} // namespace sigtime
