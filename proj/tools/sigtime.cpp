#include "sigtime/bench.hpp"
#include "sigtime/bundle.hpp"
#include "sigtime/io.hpp"
#include "sigtime/preprocess.hpp"
#include "sigtime/run_io.hpp"
#include "sigtime/serve.hpp"
#include "sigtime/train.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace sigtime;

namespace {

//! --config plus one flag per config key on a subcommand.
struct ConfigFlags
{
  std::string file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app)
  {
    app->add_option("--config", file, "JSON config file; flags override its values");
    for (const auto& f : config_fields()) {
      std::string flag = "--" + f.name;
      std::replace(flag.begin(), flag.end(), '_', '-');
      options[f.name] = app->add_option(flag, values[f.name], f.help)->group("Config keys");
    }
  }

  RunConfig build() const
  {
    RunConfig cfg = file.empty() ? RunConfig{} : load_config(file);
    for (const auto& [name, opt] : options)
      if (opt->count() > 0)
        set_from_string(cfg, name, values.at(name));
    cfg.validate();
    return cfg;
  }
};

LoadedDataset load_train(const RunConfig& cfg)
{
  if (cfg.train_path.empty())
    throw ConfigError("train_path is not set (use --train-path or the config file)");
  return load_ucr_tsv_with_mapping(cfg.train_path);
}

void write_text(const std::string& path, const std::string& text)
{
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out)
    throw Error("cannot write " + path);
  out << text;
}

int run_preprocess(const std::string& input, const std::string& output_arg,
                   const std::string& report_path, std::size_t min_len, std::size_t seg_len,
                   std::size_t seg_step)
{
  auto raw = read_raw_series(input);
  auto result = preprocess(raw, min_len, seg_len, seg_step);
  std::string output = output_arg;
  if (output.empty()) {
    fs::path p(input);
    output = (p.parent_path() / (p.stem().string() + "_processed.tsv")).string();
  }
  write_raw_series(output, result.series);
  nlohmann::json report = { { "input", input },
                            { "output", output },
                            { "total", result.report.total() },
                            { "kept", result.report.kept },
                            { "dropped_short", result.report.dropped_short },
                            { "dropped_flat", result.report.dropped_flat },
                            { "dropped_nonfinite", result.report.dropped_nonfinite },
                            { "segments", result.segments },
                            { "dropped_flat_segments", result.dropped_flat_segments },
                            { "written", result.series.size() } };
  write_text(report_path, report.dump(2) + "\n");
  return 0;
}

int run_init(const RunConfig& config, const std::string& out)
{
  auto train = load_train(config);
  auto cfg = config.resolve(train.data.length());
  auto init = init_signatures(train.data, cfg);
  write_config(out, cfg);
  write_init(out, init);
  std::cerr << "init: " << init.signatures.size() << " signatures from "
            << init.candidates_scored << " scored of " << init.candidates_generated
            << " candidates -> " << out << "\n";
  return 0;
}

int run_train(const RunConfig& config, const std::string& out)
{
  auto train = load_train(config);
  std::optional<InitResult> init;
  if (fs::exists(fs::path(out) / "signatures_init.json")) {
    init = read_init(out);
    std::cerr << "train: using initial signatures from " << out << "\n";
  }
  auto fitted = fit(train.data, config, init);
  write_run(out, fitted.model);
  if (!init)
    write_init(out, fitted.init);

  nlohmann::json metrics = { { "epochs_run", fitted.model.history.size() },
                             { "best_epoch", fitted.model.best_epoch },
                             { "train_accuracy", predict(fitted.model, train.data).accuracy } };
  if (!config.test_path.empty())
    metrics["test_accuracy"] = predict(fitted.model, load_ucr_tsv(config.test_path)).accuracy;
  std::ofstream(fs::path(out) / "metrics.json") << metrics.dump(1) << "\n";
  std::cout << metrics.dump() << "\n";
  return 0;
}

int run_export(const std::string& run, const std::string& out, const std::string& data_path,
               std::optional<double> threshold)
{
  auto model = read_run(run);
  auto train = load_train(model.config);
  BundleOptions opt;
  opt.name = model.config.dataset_name;
  opt.threshold = threshold.value_or(model.config.threshold);
  opt.mapping = train.mapping;
  if (data_path.empty()) {
    write_bundle(out, export_bundle(model, train.data, train.data, opt));
  } else {
    auto data = load_ucr_tsv_with_mapping(data_path);
    write_bundle(out, export_bundle(model, data.data, train.data, opt));
  }
  return 0;
}

int run_bench(const RunConfig& config, const std::string& datasets,
              const std::vector<std::string>& variants, const std::vector<std::string>& names,
              const std::vector<std::uint64_t>& seeds, const std::string& out,
              const std::string& log_path)
{
  std::ofstream log_file;
  if (!log_path.empty()) {
    log_file.open(log_path);
    if (!log_file)
      throw Error("cannot write " + log_path);
  }
  BenchLog log = [&](const std::string& line) {
    (log_file.is_open() ? static_cast<std::ostream&>(log_file) : std::cerr) << line << std::endl;
  };
  std::vector<BenchResult> rows;
  for (const auto& name : names) {
    auto pair = find_ucr_pair(datasets, name);
    if (!pair) {
      std::cerr << "bench: skipping " << name << " (no " << name << "_TRAIN/_TEST files under "
                << datasets << ")\n";
      continue;
    }
    auto train = load_ucr_tsv(pair->train.string());
    auto test = load_ucr_tsv(pair->test.string());
    for (const auto& v : variants) {
      RunConfig cfg = config;
      cfg.dataset_name = name;
      rows.push_back(run_variant(name, train, test, parse_variant(v), cfg, seeds, log));
    }
  }
  if (rows.empty())
    throw Error("no benchmark datasets found under " + datasets);
  write_text(out, results_table(rows));
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Signature learning for time-series classification" };
  app.require_subcommand(1);

  std::string input, output, report;
  std::size_t min_len = 3, seg_len = 0, seg_step = 0;
  auto* pre = app.add_subcommand("preprocess", "filter, segment and normalize raw recordings");
  pre->add_option("--input", input, "label-first TSV/CSV, rows may differ in length")->required();
  pre->add_option("--min-len", min_len, "drop series shorter than this")->required();
  pre->add_option("--seg-len", seg_len, "segment length (0 = no segmentation)");
  pre->add_option("--seg-step", seg_step, "segment step (default: seg-len)");
  pre->add_option("--output", output, "processed dataset (default: <input>_processed.tsv)");
  pre->add_option("--report", report, "filter report JSON (default: stdout)");

  ConfigFlags init_flags, train_flags, bench_flags, sweep_flags;
  std::string run_dir = "run";
  auto* init = app.add_subcommand("init", "select initial signatures into a run directory");
  init_flags.attach(init);
  init->add_option("--out", run_dir, "run directory");

  auto* train = app.add_subcommand("train", "initialize (unless done) and train a model");
  train_flags.attach(train);
  train->add_option("--out", run_dir, "run directory")->required();

  std::string bundle_out, data_path;
  std::optional<double> threshold;
  auto* exp = app.add_subcommand("export", "write the exploration bundle of a trained run");
  exp->add_option("--run", run_dir, "run directory")->required();
  exp->add_option("--out", bundle_out, "bundle file")->required();
  exp->add_option("--data", data_path, "dataset to export (default: the training set)");
  exp->add_option("--threshold", threshold, "default match threshold")->check(CLI::Range(0.0, 1.0));

  std::string bundle_in, host = "127.0.0.1", static_dir;
  int port = 8080;
  auto* srv = app.add_subcommand("serve", "serve a bundle over HTTP");
  srv->add_option("--bundle", bundle_in, "bundle file")->required();
  srv->add_option("--port", port, "TCP port");
  srv->add_option("--host", host, "bind address");
  srv->add_option("--static", static_dir, "directory with UI assets to host at /");

  std::string datasets, table_out, log_path;
  std::vector<std::string> variants = { "JT" };
  std::vector<std::string> names = { "GunPoint", "ECG200", "Coffee", "Strawberry",
                                     "SonyAIBORobotSurface1" };
  std::vector<std::uint64_t> seeds = kBenchSeeds;
  auto* bench = app.add_subcommand("bench", "benchmark variants on UCR datasets");
  bench_flags.attach(bench);
  bench->add_option("--datasets", datasets, "directory holding NAME_TRAIN/NAME_TEST files")
    ->required();
  bench->add_option("--variants", variants, "comma-separated variants")->delimiter(',');
  bench->add_option("--names", names, "comma-separated dataset names")->delimiter(',');
  bench->add_option("--seeds", seeds, "comma-separated seeds")->delimiter(',');
  bench->add_option("--out", table_out, "results table (default: stdout)");
  bench->add_option("--log", log_path, "per-cell log (default: stderr)");

  std::vector<std::size_t> ns = { 1000, 2000 }, ms = { 100, 300 };
  auto* sweep = app.add_subcommand("sweep", "fixed-epoch runtime sweep on synthetic data");
  sweep_flags.attach(sweep);
  sweep->add_option("--n", ns, "comma-separated sample counts")->delimiter(',');
  sweep->add_option("--m", ms, "comma-separated series lengths")->delimiter(',');
  sweep->add_option("--out", table_out, "results table (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre)
      return run_preprocess(input, output, report, min_len, seg_len, seg_step);
    if (*init)
      return run_init(init_flags.build(), run_dir);
    if (*train)
      return run_train(train_flags.build(), run_dir);
    if (*exp)
      return run_export(run_dir, bundle_out, data_path, threshold);
    if (*srv) {
      auto bundle = read_bundle(bundle_in);
      std::cerr << "serving " << bundle_in << " on http://" << host << ":" << port << "\n";
      serve(bundle, host, port, static_dir);
      return 0;
    }
    if (*bench)
      return run_bench(bench_flags.build(), datasets, variants, names, seeds, table_out,
                       log_path);
    if (*sweep) {
      auto rows = scalability_sweep(ns, ms, sweep_flags.build(),
                                    [](const std::string& s) { std::cerr << s << "\n"; });
      write_text(table_out, sweep_table(rows));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
