// Runs every acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Exit status is nonzero when any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "histocam/augment.hpp"
#include "histocam/cli/commands.hpp"
#include "histocam/datakit.hpp"
#include "histocam/explain.hpp"
#include "histocam/metrics.hpp"
#include "histocam/network.hpp"
#include "support/fixtures.hpp"
#include "support/gradient_suite.hpp"
#include "support/oracles.hpp"
#include "support/toy_models.hpp"

namespace {

namespace fs = std::filesystem;
namespace dk = histocam::datakit;
namespace ex = histocam::explain;
namespace aug = histocam::augment;
namespace m = histocam::metrics;
using histocam::Image;
using histocam::ag::Tensor;
using histocam::network::Model;
using histocam::network::ModelConfig;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

// --- gradient suite --------------------------------------------------------

void gradient_suite(Outcome& o) {
  const auto t0 = Clock::now();
  std::size_t trials = 0;
  double worst_op = 0.0;
  for (const auto& r : histocam::testing::run_op_gradient_suite(2024, 20)) {
    trials += r.trials;
    worst_op = std::max(worst_op, r.max_rel);
    o.require(r.max_rel < 1e-4 && r.checked > 0, r.op + " rel " + std::to_string(r.max_rel));
  }
  const auto net = histocam::testing::run_network_gradient_check(7, 12);
  const double elapsed = seconds_since(t0);
  o.require(net.max_rel < 1e-3, "TinyVGG rel " + std::to_string(net.max_rel));
  o.require(trials >= 100, "only " + std::to_string(trials) + " trials");
  o.require(elapsed < 60.0, "runtime " + std::to_string(elapsed) + " s");
  o.detail << "ops max rel " << worst_op << " (<1e-4) over " << trials << " trials; TinyVGG max rel " << net.max_rel
           << " (<1e-3) on " << net.checked << " entries; " << elapsed << " s (<60 s)";
}

// --- metrics oracle --------------------------------------------------------

double safe_ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void metrics_oracle(Outcome& o) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0, 1);
  auto instance = [&](std::size_t n, bool coarse, std::vector<double>& s, std::vector<int>& y) {
    do {
      s.clear();
      y.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const double v = u(rng);
        s.push_back(coarse ? std::round(v * 10) / 10 : v);
        y.push_back(static_cast<int>(rng() % 2));
      }
    } while (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0);
  };

  int count_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> s;
    std::vector<int> y;
    instance(2 + rng() % 100, trial % 2 == 0, s, y);
    const auto c = m::confusion(s, y);
    const auto b = histocam::testing::brute_confusion(s, y, 0.5);
    const double p = safe_ratio(b.tp, b.tp + b.fp), r = safe_ratio(b.tp, b.tp + b.fn);
    const double f = p + r == 0 ? 0.0 : 2 * p * r / (p + r);
    const bool same = c.true_positive == b.tp && c.true_negative == b.tn && c.false_positive == b.fp &&
                      c.false_negative == b.fn && m::precision(c) == p && m::recall(c) == r &&
                      m::accuracy(c) == safe_ratio(b.tp + b.tn, s.size()) && m::f1(c) == f;
    count_mismatch += !same;
  }
  o.require(count_mismatch == 0, std::to_string(count_mismatch) + " count/ratio mismatches");

  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s;
    std::vector<int> y;
    instance(2 + rng() % 300, trial % 2 == 1, s, y);
    worst = std::max(worst, std::abs(m::auroc(s, y) - histocam::testing::trapezoid_auroc(s, y)));
  }
  o.require(worst <= 1e-9, "auroc deviation " + std::to_string(worst));

  const std::vector<double> s4{0.9, 0.8, 0.7, 0.1};
  const std::vector<int> y4{1, 0, 1, 0};
  const double worked = m::auroc(s4, y4);
  o.require(worked == 0.75, "worked example gave " + std::to_string(worked));
  o.detail << "1000/1000 confusion+ratios exact; auroc vs trapezoid max |diff| " << worst
           << " (<=1e-9) on 100; worked example " << worked;
}

// --- explainability identities --------------------------------------------

void explain_identities(Outcome& o) {
  namespace toy = histocam::testing::toy;
  std::mt19937_64 rng(41);

  bool identical = true;
  for (int trial = 0; trial < 5; ++trial) {
    const Model model(ModelConfig::tiny_vgg({32, 32, 3}, 300 + trial));
    const Tensor x = histocam::testing::random_tensor({1, 3, 32, 32}, rng, 0, 1);
    const auto a = ex::smoothgrad(model, x, trial % 2, 1, 0.0, 5);
    const auto b = ex::vanilla_saliency(model, x, trial % 2);
    identical = identical && a.values == b.values;
  }
  o.require(identical, "smoothgrad(n=1, sigma=0) differs from saliency");

  std::size_t negative = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Model model(ModelConfig::tiny_vgg({32, 32, 3}, 400 + trial));
    const Tensor x = histocam::testing::random_tensor({1, 3, 32, 32}, rng, 0, 1);
    for (double v : ex::gradcam(model, x, static_cast<int>(rng() % 2)).values) negative += v < 0.0;
  }
  o.require(negative == 0, std::to_string(negative) + " negative gradcam values");

  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto model = toy::random_conv_model(rng, 2, 3);
    const Tensor x = histocam::testing::random_tensor({1, 2, 4, 4}, rng);
    const auto a = toy::conv_by_hand(x, model.kernel, model.bias);
    for (int cls : {0, 1}) {
      const double sign = cls == 1 ? 1.0 : -1.0;
      const auto map = ex::gradcam(model, x, cls);
      for (std::size_t p = 0; p < 16; ++p) {
        double l = 0.0;
        for (std::size_t k = 0; k < 3; ++k) l += sign * model.w[k] / 16.0 * a[k * 16 + p];
        worst = std::max(worst, std::abs(map.values[p] - std::max(l, 0.0)));
      }
    }
  }
  o.require(worst <= 1e-10, "hand-built gradcam deviation " + std::to_string(worst));

  const toy::Square square;
  const double mean_grad = ex::smoothgrad_mean_gradient(square, Tensor({1, 1, 1, 1}, {1.0}), 1, 10000, 0.1, 42)[0];
  o.require(std::abs(mean_grad - 2.0) <= 0.01, "quadratic mean gradient " + std::to_string(mean_grad));
  o.detail << "smoothgrad(1,0)==saliency bitwise; 50 gradcam maps min>=0; hand model max |diff| " << worst
           << " (<=1e-10); quadratic E[grad] " << mean_grad << " (2 +- 0.01)";
}

// --- split arithmetic ------------------------------------------------------

dk::Inventory fake_inventory(const std::map<dk::TissueClass, std::size_t>& counts) {
  dk::Inventory inv;
  inv.root = "/lc25000";
  for (const auto& [c, n] : counts) {
    for (std::size_t i = 0; i < n; ++i) {
      inv.images[c].push_back(fs::path(dk::class_dir_name(c)) / ("img" + std::to_string(i) + ".jpeg"));
    }
    std::sort(inv.images[c].begin(), inv.images[c].end());
  }
  return inv;
}

void split_arithmetic(Outcome& o) {
  using dk::TissueClass;
  const auto lung = dk::build_split(
      fake_inventory({{TissueClass::lung_aca, 5000}, {TissueClass::lung_scc, 5000}, {TissueClass::lung_n, 5000}}),
      dk::Task::lung, 0);
  auto lt = dk::class_counts(lung.test);
  o.require(lt[TissueClass::lung_aca] == 500 && lt[TissueClass::lung_scc] == 500 && lt[TissueClass::lung_n] == 1000,
            "lung test counts");

  const auto colon =
      dk::build_split(fake_inventory({{TissueClass::colon_aca, 5000}, {TissueClass::colon_n, 5000}}), dk::Task::colon, 0);
  auto pre = dk::class_counts(colon.train);
  for (const auto& [c, n] : dk::class_counts(colon.validation)) pre[c] += n;
  o.require(pre[TissueClass::colon_aca] == 4000 && pre[TissueClass::colon_n] == 4000, "colon train counts");

  std::mt19937_64 rng(51);
  int overlapping = 0;
  const auto inv = fake_inventory({{TissueClass::colon_aca, 5000}, {TissueClass::colon_n, 5000}});
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto split = dk::build_split(inv, dk::Task::colon, rng());
    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto* part : {&split.train, &split.validation, &split.test}) {
      for (const auto& e : *part) {
        seen.insert(std::get<fs::path>(e.image).string());
        ++total;
      }
    }
    overlapping += seen.size() != total || total != 10000;
  }
  o.require(overlapping == 0, std::to_string(overlapping) + " overlapping splits");
  o.detail << "lung test " << lt[TissueClass::lung_aca] << "+" << lt[TissueClass::lung_scc] << "+"
           << lt[TissueClass::lung_n] << "; colon pre-validation train " << pre[TissueClass::colon_aca] << "+"
           << pre[TissueClass::colon_n] << "; 200/200 seeds disjoint";
}

// --- end-to-end and determinism -------------------------------------------

struct PipelineRun {
  int code = 0;
  double seconds = 0.0;
  std::string log;
};

// Full CLI pipeline at defaults (synthetic 200/class, 64x64, seed 0):
// train (synth + split + fit), eval, explain on two images.
PipelineRun run_pipeline(const fs::path& out) {
  const fs::path cfg = out.string() + ".json";
  std::ofstream(cfg) << nlohmann::json{{"seed", 0}, {"output_dir", out.string()}}.dump();
  PipelineRun r;
  std::ostringstream log, err;
  const auto t0 = Clock::now();
  for (std::vector<std::string> args : {std::vector<std::string>{"--config", cfg.string(), "train"},
                                        std::vector<std::string>{"--config", cfg.string(), "eval"}}) {
    r.code = histocam::cli::run(args, log, err);
    if (r.code != 0) break;
  }
  r.seconds = seconds_since(t0);
  if (r.code == 0) {
    r.code = histocam::cli::run({"--config", cfg.string(), "explain",
                                 (out / "synth" / "colon_aca" / "colon_aca_00000.png").string(),
                                 (out / "synth" / "colon_n" / "colon_n_00000.png").string()},
                                log, err);
  }
  r.log = err.str();
  return r;
}

void end_to_end(Outcome& o, const fs::path& work) {
  const auto r = run_pipeline(work / "run-a");
  o.require(r.code == 0, "pipeline exit " + std::to_string(r.code) + ": " + r.log);
  if (r.code != 0) return;
  const auto metrics = nlohmann::json::parse(slurp(work / "run-a" / "metrics.json"));
  const double acc = metrics["accuracy"], auroc = metrics["auroc"];
  o.require(acc >= 0.95, "accuracy " + std::to_string(acc));
  o.require(auroc >= 0.98, "auroc " + std::to_string(auroc));
  o.require(r.seconds < 300.0, "runtime " + std::to_string(r.seconds) + " s");
  o.detail << "test accuracy " << acc << " (>=0.95), auroc " << auroc << " (>=0.98), synth+split+train+eval "
           << r.seconds << " s (<300 s)";
}

void determinism(Outcome& o, const fs::path& work) {
  if (!fs::exists(work / "run-a" / "weights.hscw")) run_pipeline(work / "run-a");
  const auto r = run_pipeline(work / "run-b");
  o.require(r.code == 0, "second pipeline exit " + std::to_string(r.code));
  std::vector<std::string> files{"history.csv", "weights.hscw", "metrics.json"};
  for (const auto& e : fs::directory_iterator(work / "run-a")) {
    const std::string name = e.path().filename().string();
    if (e.path().extension() == ".png" && name.find(".augment-preview") == std::string::npos) files.push_back(name);
  }
  std::size_t overlays = 0;
  for (const auto& f : files) {
    const std::string a = slurp(work / "run-a" / f), b = slurp(work / "run-b" / f);
    o.require(!a.empty() && a == b, f + " differs");
    overlays += fs::path(f).extension() == ".png";
  }
  o.require(overlays == 4, std::to_string(overlays) + " overlays instead of 4");
  o.detail << files.size() << " artifacts byte-identical across two runs (history.csv, weights.hscw, metrics.json, "
           << overlays << " overlay PNGs)";
}

// --- augmentation semantics -----------------------------------------------

void augmentation_semantics(Outcome& o) {
  std::mt19937_64 rng(61);
  Image img(37, 23);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  bool involution = true;
  for (auto axis : {aug::FlipAxis::horizontal, aug::FlipAxis::vertical}) {
    involution = involution && aug::flip(aug::flip(img, axis), axis) == img;
  }
  o.require(involution, "flip involution");
  o.require(aug::rotate(img, 0.0) == img, "rotate(0) identity");
  const Image flat(50, 50, 10, 120, 240);
  bool constant = true;
  for (int k = 0; k < 50; ++k) {
    constant = constant && aug::rotate(flat, std::uniform_real_distribution<double>(-180, 180)(rng)) == flat;
  }
  o.require(constant, "constant-image rotation invariance");
  const Image big(768, 768, 1, 2, 3);
  const Image small = aug::crop_square_resize(big, 224);
  o.require(small.width == 224 && small.height == 224, "crop 768->224 size");

  const auto pipeline = aug::Pipeline::lc25000_baseline(0);
  const Image tiny(4, 4, 1, 2, 3);
  int h = 0, v = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    aug::Trace t;
    aug::apply_pipeline(pipeline, tiny, i, &t);
    h += t.fired[1];
    v += t.fired[2];
  }
  const double rh = h / 1e4, rv = v / 1e4;
  o.require(rh >= 0.48 && rh <= 0.52 && rv >= 0.48 && rv <= 0.52, "flip rates " + std::to_string(rh) + ", " +
                                                                      std::to_string(rv));
  o.detail << "flip involution exact; rotate(0) identity; 50 constant rotations exact; 768->224 gives " << small.width
           << "x" << small.height << "; flip rates h " << rh << " v " << rv << " in [0.48, 0.52]";
}

}  // namespace

int main() {
  histocam::testing::TempDir work("acceptance");
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"gradient suite", gradient_suite},
      {"metrics oracle", metrics_oracle},
      {"explainability identities", explain_identities},
      {"split arithmetic", split_arithmetic},
      {"end-to-end desk-scale run", [&](Outcome& o) { end_to_end(o, work.path()); }},
      {"determinism", [&](Outcome& o) { determinism(o, work.path()); }},
      {"augmentation semantics", augmentation_semantics},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      check(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail.str() << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
            << " acceptance criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
