#include "sigtime/bundle.hpp"
#include "sigtime/io.hpp"
#include "sigtime/synthetic.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace sigtime;
namespace fs = std::filesystem;

namespace {

fs::path workdir()
{
  static const fs::path dir = [] {
    auto d = fs::path(testing::TempDir()) / "sigtime_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

//! Runs the CLI with output captured to files; returns the exit code.
int run_cli(const std::string& args, std::string* out = nullptr, std::string* err = nullptr)
{
  auto o = workdir() / "stdout.txt", e = workdir() / "stderr.txt";
  std::string cmd = std::string("\"") + SIGTIME_CLI_PATH + "\" " + args + " >\"" + o.string() +
                    "\" 2>\"" + e.string() + "\"";
  int status = std::system(cmd.c_str());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  if (out)
    *out = slurp(o);
  if (err)
    *err = slurp(e);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_tsv(const fs::path& path, const Dataset& d)
{
  std::vector<RawSeries> rows;
  for (const auto& s : d.samples())
    rows.push_back({ s.label == 1 ? 1.0 : 2.0, s.values });
  write_raw_series(path, rows);
}

const std::string& small_flags()
{
  static const std::string flags = "--k 6 --window-step 5 --d-model 16 --heads 2 --ffn-dim 32 "
                                   "--layers 1 --valid-fraction 0 --patience 0";
  return flags;
}

fs::path motif_train()
{
  auto p = workdir() / "motif_TRAIN.tsv";
  if (!fs::exists(p)) {
    write_tsv(p, synthetic::motif_dataset(30, 50, 3).data);
    write_tsv(workdir() / "motif_TEST.tsv", synthetic::motif_dataset(20, 50, 4).data);
  }
  return p;
}

} // namespace

TEST(Cli, PreprocessWritesDatasetAndReport)
{
  auto in = workdir() / "raw.tsv";
  std::ofstream(in) << "1\t0\t1\t2\t3\n2\t5\n1\t1\t1\t1\t1\n2\t4\t3\t2\t1\t0\t1\n";
  std::string out;
  ASSERT_EQ(run_cli("preprocess --input " + in.string() + " --min-len 3", &out), 0);
  auto report = nlohmann::json::parse(out);
  EXPECT_EQ(report["total"], 4);
  EXPECT_EQ(report["kept"], 2);
  EXPECT_EQ(report["dropped_short"], 1);
  EXPECT_EQ(report["dropped_flat"], 1);
  auto rows = read_raw_series((workdir() / "raw_processed.tsv").string());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].values, (std::vector<double>{ 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0 }));

  auto seg = workdir() / "seg.tsv";
  ASSERT_EQ(run_cli("preprocess --input " + in.string() + " --min-len 3 --seg-len 3 --output " +
                      seg.string(),
                    &out),
            0);
  EXPECT_EQ(nlohmann::json::parse(out)["written"], read_raw_series(seg.string()).size());
}

TEST(Cli, InitTrainExport)
{
  auto run = workdir() / "run";
  std::string common = "--train-path " + motif_train().string() + " --test-path " +
                       (workdir() / "motif_TEST.tsv").string() + " " + small_flags();
  ASSERT_EQ(run_cli("init " + common + " --out " + run.string()), 0);
  EXPECT_TRUE(fs::exists(run / "signatures_init.json"));
  EXPECT_TRUE(fs::exists(run / "config.json"));

  std::string out;
  ASSERT_EQ(run_cli("train " + common + " --epochs 3 --out " + run.string(), &out), 0);
  auto metrics = nlohmann::json::parse(out);
  EXPECT_EQ(metrics["epochs_run"], 3);
  EXPECT_TRUE(metrics.contains("test_accuracy"));
  for (const char* f : { "model.json", "signatures.json", "history.json", "metrics.json" })
    EXPECT_TRUE(fs::exists(run / f)) << f;

  auto bundle_path = workdir() / "bundle.json";
  ASSERT_EQ(run_cli("export --run " + run.string() + " --out " + bundle_path.string() +
                    " --threshold 0.6"),
            0);
  auto b = read_bundle(bundle_path);
  EXPECT_EQ(b.n, 30u);
  EXPECT_EQ(b.k(), 6u);
  EXPECT_EQ(b.threshold, 0.6);
  EXPECT_EQ(b.classes.size(), 2u);
}

TEST(Cli, BenchAndSweepTables)
{
  motif_train();
  std::string out;
  ASSERT_EQ(run_cli("bench --datasets " + workdir().string() +
                      " --names motif,missing --variants VT,S-FE --seeds 0 --epochs 1 " +
                      small_flags(),
                    &out),
            0);
  std::istringstream lines(out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line))
    rows.push_back(line);
  ASSERT_EQ(rows.size(), 3u) << out;
  EXPECT_EQ(rows[1].rfind("motif\tVT\t", 0), 0u);
  EXPECT_EQ(rows[2].rfind("motif\tS-FE\t", 0), 0u);

  ASSERT_EQ(run_cli("sweep --n 10 --m 30 --epochs 1 " + small_flags(), &out), 0);
  EXPECT_EQ(out.rfind("n\tm\tseconds\n10\t30\t", 0), 0u);
}

TEST(Cli, ErrorsExitNonZero)
{
  std::string err;
  EXPECT_EQ(run_cli("train --out " + (workdir() / "x").string(), nullptr, &err), 1);
  EXPECT_NE(err.find("train_path"), std::string::npos) << err;
  EXPECT_NE(run_cli("train --train-path " + motif_train().string() + " --heads 3 --d-model 16 "
                    "--out " + (workdir() / "x").string(),
                    nullptr, &err),
            0);
  EXPECT_NE(run_cli("export --run " + (workdir() / "nope").string() + " --out b.json"), 0);
  EXPECT_NE(run_cli("bench --datasets " + (workdir() / "nope").string()), 0);
  EXPECT_NE(run_cli("frobnicate"), 0);
  EXPECT_NE(run_cli("serve --bundle " + (workdir() / "missing.json").string()), 0);
}
