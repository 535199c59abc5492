#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include "histocam/datakit.hpp"
#include "histocam/errors.hpp"
#include "support/fixtures.hpp"

namespace {

namespace fs = std::filesystem;
namespace dk = histocam::datakit;
using dk::TissueClass;
using histocam::Image;

dk::Inventory fake_inventory(const std::map<TissueClass, std::size_t>& counts) {
  dk::Inventory inv;
  inv.root = "/data/lc25000";
  for (const auto& [c, n] : counts) {
    auto& files = inv.images[c];
    for (std::size_t i = 0; i < n; ++i) {
      files.push_back(fs::path(dk::class_dir_name(c)) / (std::string(dk::class_dir_name(c)) + std::to_string(i) + ".jpeg"));
    }
    std::sort(files.begin(), files.end());
  }
  return inv;
}

std::set<std::string> paths_of(const std::vector<dk::LabeledExample>& part) {
  std::set<std::string> out;
  for (const auto& e : part) out.insert(std::get<fs::path>(e.image).string());
  return out;
}

TEST(PartitionSizes, FloorRules) {
  const auto s5000 = dk::partition_sizes(5000);
  EXPECT_EQ(s5000.test, 1000u);
  EXPECT_EQ(s5000.validation, 800u);
  EXPECT_EQ(s5000.train, 3200u);
  const auto s10 = dk::partition_sizes(10);
  EXPECT_EQ(s10.test, 2u);
  EXPECT_EQ(s10.validation, 1u);
  EXPECT_EQ(s10.train, 7u);
  for (std::size_t n = 5; n < 500; ++n) {
    const auto s = dk::partition_sizes(n);
    EXPECT_EQ(s.test + s.validation + s.train, n);
    if (n % 5 == 0) {
      EXPECT_EQ(s.test * 5, n);
    }
  }
}

TEST(BuildSplit, LungTableOneCounts) {
  const auto inv = fake_inventory(
      {{TissueClass::lung_aca, 5000}, {TissueClass::lung_scc, 5000}, {TissueClass::lung_n, 5000}});
  const auto split = dk::build_split(inv, dk::Task::lung, 1);
  const auto test = dk::class_counts(split.test);
  EXPECT_EQ(test.at(TissueClass::lung_aca), 500u);
  EXPECT_EQ(test.at(TissueClass::lung_scc), 500u);
  EXPECT_EQ(test.at(TissueClass::lung_n), 1000u);
  auto pre = dk::class_counts(split.train);
  for (const auto& [c, n] : dk::class_counts(split.validation)) pre[c] += n;
  EXPECT_EQ(pre.at(TissueClass::lung_aca), 2000u);
  EXPECT_EQ(pre.at(TissueClass::lung_scc), 2000u);
  EXPECT_EQ(pre.at(TissueClass::lung_n), 4000u);
  const auto summary = dk::split_summary(split);
  EXPECT_NE(summary.find("Lung cancer"), std::string::npos);
  EXPECT_NE(summary.find("4000"), std::string::npos);
}

TEST(BuildSplit, ColonTableOneCounts) {
  const auto inv = fake_inventory({{TissueClass::colon_aca, 5000}, {TissueClass::colon_n, 5000}});
  const auto split = dk::build_split(inv, dk::Task::colon, 1);
  const auto test = dk::class_counts(split.test);
  EXPECT_EQ(test.at(TissueClass::colon_aca), 1000u);
  EXPECT_EQ(test.at(TissueClass::colon_n), 1000u);
  auto pre = dk::class_counts(split.train);
  for (const auto& [c, n] : dk::class_counts(split.validation)) pre[c] += n;
  EXPECT_EQ(pre.at(TissueClass::colon_aca), 4000u);
  EXPECT_EQ(pre.at(TissueClass::colon_n), 4000u);
}

TEST(BuildSplit, TenPerClassColon) {
  const auto split =
      dk::build_split(fake_inventory({{TissueClass::colon_aca, 10}, {TissueClass::colon_n, 10}}), dk::Task::colon, 3);
  EXPECT_EQ(split.test.size(), 4u);
  EXPECT_EQ(split.validation.size(), 2u);
  EXPECT_EQ(split.train.size(), 14u);
  for (const auto* part : {&split.test, &split.validation, &split.train}) {
    const auto counts = dk::class_counts(*part);
    EXPECT_EQ(counts.at(TissueClass::colon_aca), counts.at(TissueClass::colon_n));
  }
}

TEST(BuildSplit, TooFewImagesIsDataError) {
  EXPECT_THROW(
      dk::build_split(fake_inventory({{TissueClass::colon_aca, 4}, {TissueClass::colon_n, 10}}), dk::Task::colon, 0),
      histocam::DataError);
}

TEST(BuildSplit, MissingClassesAreReported) {
  const auto inv = fake_inventory({{TissueClass::colon_aca, 10}, {TissueClass::colon_n, 10}});
  EXPECT_TRUE(inv.missing_for(dk::Task::colon).empty());
  EXPECT_EQ(inv.missing_for(dk::Task::lung).size(), 3u);
  try {
    dk::build_split(inv, dk::Task::lung_subtype, 0);
    FAIL() << "expected DataError";
  } catch (const histocam::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("lung_aca"), std::string::npos) << e.what();
  }
}

TEST(BuildSplitProperty, DisjointUnionIsDrawnSample) {
  std::mt19937_64 rng(77);
  const std::array<dk::Task, 3> tasks{dk::Task::lung, dk::Task::lung_subtype, dk::Task::colon};
  for (int trial = 0; trial < 200; ++trial) {
    const auto task = tasks[rng() % 3];
    std::map<TissueClass, std::size_t> counts;
    for (auto c : dk::task_classes(task)) counts[c] = 10 + rng() % 60;
    const auto inv = fake_inventory(counts);
    const auto split = dk::build_split(inv, task, rng());
    const auto tr = paths_of(split.train), va = paths_of(split.validation), te = paths_of(split.test);
    ASSERT_EQ(tr.size(), split.train.size());
    ASSERT_EQ(va.size(), split.validation.size());
    ASSERT_EQ(te.size(), split.test.size());
    std::set<std::string> all = tr;
    all.insert(va.begin(), va.end());
    all.insert(te.begin(), te.end());
    EXPECT_EQ(all.size(), tr.size() + va.size() + te.size()) << "partitions overlap";

    std::set<std::string> available;
    for (const auto& [c, files] : inv.images) {
      for (const auto& f : files) available.insert((inv.root / f).string());
    }
    EXPECT_TRUE(std::includes(available.begin(), available.end(), all.begin(), all.end()));

    std::map<TissueClass, std::size_t> drawn;
    for (const auto* part : {&split.train, &split.validation, &split.test}) {
      for (const auto& e : *part) {
        ++drawn[e.tissue];
        EXPECT_EQ(e.label, dk::binary_label(task, e.tissue));
      }
    }
    for (const auto& [c, n] : drawn) {
      const auto s = dk::partition_sizes(n);
      EXPECT_EQ(dk::class_counts(split.test)[c], s.test);
      EXPECT_EQ(dk::class_counts(split.validation)[c], s.validation);
    }
  }
}

TEST(BuildSplitProperty, ListingOrderDoesNotMatter) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto inv = fake_inventory({{TissueClass::colon_aca, 40}, {TissueClass::colon_n, 33}});
    const auto a = dk::build_split(inv, dk::Task::colon, trial);
    for (auto& [c, files] : inv.images) std::shuffle(files.begin(), files.end(), rng);
    const auto b = dk::build_split(inv, dk::Task::colon, trial);
    EXPECT_EQ(paths_of(a.train), paths_of(b.train));
    EXPECT_EQ(paths_of(a.validation), paths_of(b.validation));
    EXPECT_EQ(paths_of(a.test), paths_of(b.test));
  }
}

TEST(BuildSplit, SeedChangesMembership) {
  const auto inv = fake_inventory({{TissueClass::colon_aca, 50}, {TissueClass::colon_n, 50}});
  EXPECT_NE(paths_of(dk::build_split(inv, dk::Task::colon, 1).test),
            paths_of(dk::build_split(inv, dk::Task::colon, 2).test));
}

TEST(Polarity, LabelMapping) {
  EXPECT_EQ(dk::binary_label(dk::Task::lung, TissueClass::lung_aca), 1);
  EXPECT_EQ(dk::binary_label(dk::Task::lung, TissueClass::lung_scc), 1);
  EXPECT_EQ(dk::binary_label(dk::Task::lung, TissueClass::lung_n), 0);
  EXPECT_EQ(dk::binary_label(dk::Task::lung_subtype, TissueClass::lung_aca), 1);
  EXPECT_EQ(dk::binary_label(dk::Task::lung_subtype, TissueClass::lung_scc), 0);
  EXPECT_EQ(dk::binary_label(dk::Task::colon, TissueClass::colon_aca), 1);
  EXPECT_EQ(dk::binary_label(dk::Task::colon, TissueClass::colon_n), 0);
}

TEST(Manifest, JsonRoundTrip) {
  const auto inv = fake_inventory({{TissueClass::colon_aca, 12}, {TissueClass::colon_n, 12}});
  const auto split = dk::build_split(inv, dk::Task::colon, 9);
  fs::path root;
  const auto back = dk::split_from_json(dk::split_to_json(split, inv.root), &root);
  EXPECT_EQ(root, inv.root);
  EXPECT_EQ(back.task, split.task);
  EXPECT_EQ(back.seed, split.seed);
  EXPECT_EQ(paths_of(back.train), paths_of(split.train));
  EXPECT_EQ(paths_of(back.validation), paths_of(split.validation));
  EXPECT_EQ(paths_of(back.test), paths_of(split.test));
  EXPECT_EQ(dk::split_to_json(back, root), dk::split_to_json(split, inv.root));
}

TEST(Scan, OrderingWarningsAndErrors) {
  histocam::testing::TempDir dir("scan");
  fs::create_directories(dir / "colon_aca");
  fs::create_directories(dir / "colon_n");
  fs::create_directories(dir / "misc");
  for (const char* name : {"b.png", "a.png", "c.png"}) {
    histocam::write_png(dir.path() / "colon_aca" / name, Image(4, 4, 1, 2, 3));
    histocam::write_png(dir.path() / "colon_n" / name, Image(4, 4, 1, 2, 3));
  }
  const auto inv = dk::scan_dataset(dir.path());
  ASSERT_EQ(inv.count(TissueClass::colon_aca), 3u);
  EXPECT_EQ(inv.images.at(TissueClass::colon_aca)[0], fs::path("colon_aca") / "a.png");
  EXPECT_EQ(inv.images.at(TissueClass::colon_aca)[2], fs::path("colon_aca") / "c.png");
  ASSERT_EQ(inv.warnings.size(), 1u);
  EXPECT_NE(inv.warnings[0].find("misc"), std::string::npos);
  EXPECT_EQ(inv.missing_for(dk::Task::lung).size(), 3u);

  fs::create_directories(dir / "lung_n");
  EXPECT_THROW(dk::scan_dataset(dir.path()), histocam::DataError);

  histocam::testing::TempDir empty("scan-empty");
  EXPECT_THROW(dk::scan_dataset(empty.path()), histocam::DataError);
}

TEST(LoadBatch, WhiteImageShapeAndDeterminism) {
  histocam::testing::TempDir dir("batch");
  histocam::write_png(dir / "white.png", Image(80, 64, 255, 255, 255));
  std::vector<dk::LabeledExample> ex(3);
  ex[0].image = dir / "white.png";
  ex[1].image = dk::synth_texture(0, 64, 1);
  ex[2].image = dk::synth_texture(1, 64, 2);
  ex[2].label = 1;
  const auto batch = dk::load_batch(ex, {64, 64, 3});
  EXPECT_EQ(batch.images.shape(), (histocam::ag::Shape{3, 3, 64, 64}));
  EXPECT_EQ(batch.labels, (std::vector<int>{0, 0, 1}));
  for (std::size_t i = 0; i < 3 * 64 * 64; ++i) EXPECT_EQ(batch.images[i], 1.0);
  for (double v : batch.images.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }

  const auto aug = histocam::augment::Pipeline::lc25000_baseline(4);
  const auto a = dk::load_batch(ex, {64, 64, 3}, &aug, 10);
  const auto b = dk::load_batch(ex, {64, 64, 3}, &aug, 10);
  EXPECT_TRUE(std::equal(a.images.values().begin(), a.images.values().end(), b.images.values().begin()));
}

TEST(LoadBatch, UndecodableFileNamesPath) {
  histocam::testing::TempDir dir("batch");
  std::ofstream(dir / "junk.png") << "not an image";
  std::vector<dk::LabeledExample> ex(1);
  ex[0].image = dir / "junk.png";
  try {
    dk::load_batch(ex, {64, 64, 3});
    FAIL() << "expected DataError";
  } catch (const histocam::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("junk.png"), std::string::npos) << e.what();
  }
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), root).string()] = std::string((std::istreambuf_iterator<char>(in)), {});
  }
  return out;
}

TEST(Synth, FourHundredFilesByteIdenticalOnRerun) {
  histocam::testing::TempDir a("synth-a"), b("synth-b");
  dk::SynthOptions opt;
  EXPECT_EQ(dk::synth_generate(a.path(), opt), 400u);
  EXPECT_EQ(dk::synth_generate(b.path(), opt), 400u);
  const auto ta = read_tree(a.path()), tb = read_tree(b.path());
  EXPECT_EQ(ta.size(), 400u);
  EXPECT_TRUE(ta == tb);
  const auto inv = dk::scan_dataset(a.path());
  EXPECT_EQ(inv.count(TissueClass::colon_aca), 200u);
  EXPECT_EQ(inv.count(TissueClass::colon_n), 200u);
}

TEST(Synth, ParameterBounds) {
  histocam::testing::TempDir dir("synth");
  dk::SynthOptions opt;
  opt.per_class = 9;
  EXPECT_THROW(dk::synth_generate(dir.path(), opt), histocam::ParameterError);
  opt.per_class = 10;
  opt.size = 31;
  EXPECT_THROW(dk::synth_generate(dir.path(), opt), histocam::ParameterError);
}

TEST(Synth, TexturesAreDeterministic) {
  EXPECT_EQ(dk::synth_texture(1, 64, 7), dk::synth_texture(1, 64, 7));
  EXPECT_NE(dk::synth_texture(1, 64, 7), dk::synth_texture(1, 64, 8));
  EXPECT_NE(dk::synth_texture(0, 64, 7), dk::synth_texture(1, 64, 7));
}

}  // namespace
