#include "sigtime/bench.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace sigtime;

namespace {

RunConfig quick_config()
{
  RunConfig cfg;
  cfg.k = 6;
  cfg.epochs = 30;
  cfg.window_step = 5;
  cfg.d_model = 16;
  cfg.heads = 2;
  cfg.ffn_dim = 32;
  cfg.layers = 1;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.003;
  cfg.valid_fraction = 0.0;
  cfg.patience = 0;
  return cfg;
}

} // namespace

TEST(ResultsTable, HeaderAndRows)
{
  BenchResult r;
  r.dataset = "Toy";
  r.variant = Variant::SFE;
  r.accuracies = { 0.5, 1 };
  r.mean_accuracy = 0.75;
  r.seconds = 2;
  EXPECT_EQ(results_table({ r }),
            "dataset\tvariant\tmean_accuracy\taccuracies\tseconds\nToy\tS-FE\t0.75\t0.5,1\t2\n");
}

TEST(FindUcrPair, NestedFlatAndMissing)
{
  namespace fs = std::filesystem;
  auto root = fs::path(testing::TempDir()) / "ucr_find";
  fs::remove_all(root);
  fs::create_directories(root / "Nested");
  std::ofstream(root / "Nested" / "Nested_TRAIN.tsv") << "1\t0\t1\n";
  std::ofstream(root / "Nested" / "Nested_TEST.tsv") << "1\t0\t1\n";
  std::ofstream(root / "Flat_TRAIN.txt") << "1 0 1\n";
  std::ofstream(root / "Flat_TEST.txt") << "1 0 1\n";
  std::ofstream(root / "Half_TRAIN.tsv") << "1\t0\t1\n";

  auto nested = find_ucr_pair(root, "Nested");
  ASSERT_TRUE(nested);
  EXPECT_EQ(nested->test, root / "Nested" / "Nested_TEST.tsv");
  auto flat = find_ucr_pair(root, "Flat");
  ASSERT_TRUE(flat);
  EXPECT_EQ(flat->train, root / "Flat_TRAIN.txt");
  EXPECT_FALSE(find_ucr_pair(root, "Half"));
  EXPECT_FALSE(find_ucr_pair(root, "Absent"));
}

TEST(RunVariant, OneAccuracyPerSeedAndLogLines)
{
  auto data = synthetic::motif_dataset(30, 40, 2).data;
  auto cfg = quick_config();
  cfg.epochs = 2;
  std::vector<std::string> lines;
  auto r = run_variant("motif", data, data, Variant::VT, cfg, { 3, 4 },
                       [&](const std::string& s) { lines.push_back(s); });
  ASSERT_EQ(r.accuracies.size(), 2u);
  EXPECT_DOUBLE_EQ(r.mean_accuracy, (r.accuracies[0] + r.accuracies[1]) / 2.0);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_NE(lines[0].find("seed=3"), std::string::npos);
  EXPECT_THROW(run_variant("motif", data, data, Variant::VT, cfg, {}), Error);
}

TEST(RunVariant, LevelStatisticsSeparateOffsetClasses)
{
  auto train = synthetic::offset_dataset(40, 40, 1);
  auto test = synthetic::offset_dataset(40, 40, 2);
  auto r = run_variant("offset", train, test, Variant::SFE, quick_config(), { 0 });
  EXPECT_GE(r.mean_accuracy, 0.95);
}

TEST(Sweep, OneRowPerPair)
{
  auto cfg = quick_config();
  cfg.epochs = 1;
  cfg.k = 3;
  auto rows = scalability_sweep({ 10, 20 }, { 30 }, cfg);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].n, 20u);
  EXPECT_EQ(rows[1].m, 30u);
  EXPECT_GT(rows[0].seconds, 0.0);
  EXPECT_EQ(sweep_table(rows).substr(0, 12), "n\tm\tseconds\n");
}
