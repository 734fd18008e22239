#include "doctest.h"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "dln/scan.hpp"
#include "dln/network.hpp"
#include "dln/trainer.hpp"

using namespace dln;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / "dln_scan_test";
  fs::create_directories(dir);
  return dir / leaf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f),
                     std::istreambuf_iterator<char>());
}

// Small fast grid shared by several cases.
ScanConfig tiny_config() {
  ScanConfig cfg;
  cfg.depths = {2, 3};
  cfg.widths = {6, 8};
  cfg.schemes = {InitKind::orthogonal, InitKind::gaussian};
  cfg.trials = 2;
  cfg.steps = 5;
  cfg.checkpoints = {0, 5};
  cfg.master_seed = 7;
  cfg.data_dx = 6;
  cfg.data_dy = 2;
  cfg.data_n = 4;
  cfg.data_seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("cell seeds are deterministic, coordinate-sensitive, and distinct") {
  std::uint64_t base = cell_seed(1, 8, 32, InitKind::orthogonal, 0);
  CHECK(base == cell_seed(1, 8, 32, InitKind::orthogonal, 0));
  CHECK(base != cell_seed(2, 8, 32, InitKind::orthogonal, 0));
  CHECK(base != cell_seed(1, 9, 32, InitKind::orthogonal, 0));
  CHECK(base != cell_seed(1, 8, 33, InitKind::orthogonal, 0));
  CHECK(base != cell_seed(1, 8, 32, InitKind::gaussian, 0));
  CHECK(base != cell_seed(1, 8, 32, InitKind::orthogonal, 1));

  std::set<std::uint64_t> seen;
  for (int d : {1, 2, 4, 8, 16, 32, 64, 128})
    for (int w : {4, 8, 16, 32, 64, 128, 256})
      for (auto s : {InitKind::orthogonal, InitKind::gaussian})
        for (int t = 0; t < 5; ++t)
          CHECK(seen.insert(cell_seed(1, d, w, s, t)).second);
}

TEST_CASE("scan config validation") {
  ScanConfig ok = tiny_config();
  CHECK_NOTHROW(ok.validate());

  auto reject = [&](auto mutate) {
    ScanConfig bad = tiny_config();
    mutate(bad);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  };
  reject([](ScanConfig& c) { c.depths.clear(); });
  reject([](ScanConfig& c) { c.widths.clear(); });
  reject([](ScanConfig& c) { c.schemes.clear(); });
  reject([](ScanConfig& c) { c.trials = 0; });
  reject([](ScanConfig& c) { c.steps = -1; });
  reject([](ScanConfig& c) { c.checkpoints.clear(); });
  reject([](ScanConfig& c) { c.checkpoints = {-1, 5}; });
  reject([](ScanConfig& c) { c.checkpoints = {0, 6}; });  // beyond steps
  reject([](ScanConfig& c) { c.eta_auto = false; });      // eta_fixed unset
  reject([](ScanConfig& c) { c.jobs = 0; });
  reject([](ScanConfig& c) { c.data_dx = 0; });
}

TEST_CASE("one-cell scan matches a hand-rolled training loop") {
  ScanConfig cfg = tiny_config();
  cfg.depths = {3};
  cfg.widths = {6};
  cfg.schemes = {InitKind::orthogonal};
  cfg.trials = 1;
  cfg.steps = 8;
  cfg.checkpoints = {8};

  Dataset ds = scan_dataset(cfg);
  auto rows = run_scan(cfg, ds);
  REQUIRE(rows.size() == 1);

  NetworkState net =
      init_weights(DimensionPlan::uniform(3, 6, 2, 6), InitScheme::orthogonal(),
                   cell_seed(cfg.master_seed, 3, 6, InitKind::orthogonal, 0));
  double eta = contraction_lr(ds.stats, 3, ds.dy());
  double loss0 = loss(net, ds);
  for (int t = 0; t < 8; ++t) {
    double l = 0.0;
    REQUIRE(gd_step(net, ds, eta, &l));
  }
  double expect = std::log10(loss(net, ds) / loss0);

  CHECK(rows[0].status == "ok");
  CHECK(rows[0].checkpoint == 8);
  CHECK(rows[0].eta == eta);
  CHECK(rows[0].rel_loss_log10 == expect);
  CHECK(expect < -0.5);  // the cell actually trained
}

TEST_CASE("row order is canonical and inputs are deduplicated") {
  ScanConfig cfg = tiny_config();
  cfg.depths = {3, 2, 3};          // unsorted with a duplicate
  cfg.widths = {8, 6};
  cfg.checkpoints = {5, 0, 5};
  cfg.schemes = {InitKind::gaussian, InitKind::orthogonal};  // reversed

  Dataset ds = scan_dataset(cfg);
  auto rows = run_scan(cfg, ds);
  // 2 depths * 2 widths * 2 schemes * 2 trials * 2 checkpoints
  REQUIRE(rows.size() == 32);

  std::size_t k = 0;
  for (int d : {2, 3})
    for (int w : {6, 8})
      for (auto s : {InitKind::orthogonal, InitKind::gaussian})
        for (int trial = 0; trial < 2; ++trial)
          for (long cp : {0L, 5L}) {
            CAPTURE(k);
            CHECK(rows[k].depth == d);
            CHECK(rows[k].width == w);
            CHECK(rows[k].scheme == s);
            CHECK(rows[k].trial == trial);
            CHECK(rows[k].checkpoint == cp);
            ++k;
          }
}

TEST_CASE("worker count does not change the output bytes") {
  ScanConfig cfg = tiny_config();
  Dataset ds = scan_dataset(cfg);

  cfg.jobs = 1;
  auto serial = run_scan(cfg, ds);
  cfg.jobs = 4;
  auto parallel = run_scan(cfg, ds);

  fs::path a = scratch("serial.csv"), b = scratch("parallel.csv");
  write_scan_csv(a.string(), serial);
  write_scan_csv(b.string(), parallel);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("narrow orthogonal cells fail closed as error rows") {
  ScanConfig cfg = tiny_config();
  cfg.widths = {4};  // below d_x = 6: orthogonal plan is rejected
  Dataset ds = scan_dataset(cfg);
  auto rows = run_scan(cfg, ds);
  int ortho_err = 0, gauss_ok = 0;
  for (const auto& r : rows) {
    if (r.scheme == InitKind::orthogonal) {
      CHECK(r.status == "error");
      CHECK(std::isnan(r.rel_loss_log10));
      ++ortho_err;
    } else {
      CHECK(r.status == "ok");
      ++gauss_ok;
    }
  }
  CHECK(ortho_err == 8);  // 2 depths * 2 trials * 2 checkpoints
  CHECK(gauss_ok == 8);
}

TEST_CASE("runaway steps are reported as divergence, not as results") {
  ScanConfig cfg = tiny_config();
  cfg.depths = {3};
  cfg.widths = {8};
  cfg.schemes = {InitKind::orthogonal};
  cfg.trials = 1;
  cfg.steps = 5;
  cfg.checkpoints = {0, 1, 5};
  cfg.eta_auto = false;
  cfg.eta_fixed = 1e6;

  Dataset ds = scan_dataset(cfg);
  auto rows = run_scan(cfg, ds);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].checkpoint == 0);
  CHECK(rows[0].status == "ok");
  CHECK(rows[0].rel_loss_log10 == 0.0);  // log10(loss0/loss0)
  CHECK(rows[1].status == "diverged");
  CHECK(std::isnan(rows[1].rel_loss_log10));
  CHECK(rows[2].status == "diverged");
}

TEST_CASE("scan csv roundtrip, header, and line endings") {
  ScanConfig cfg = tiny_config();
  Dataset ds = scan_dataset(cfg);
  auto rows = run_scan(cfg, ds);

  fs::path p = scratch("roundtrip.csv");
  write_scan_csv(p.string(), rows);

  std::string text = slurp(p);
  CHECK(text.rfind("depth,width,scheme,trial,eta,checkpoint,rel_loss_log10,"
                   "status\n", 0) == 0);
  CHECK(text.find('\r') == std::string::npos);

  auto back = read_scan_csv(p.string());
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].depth == rows[i].depth);
    CHECK(back[i].width == rows[i].width);
    CHECK(back[i].scheme == rows[i].scheme);
    CHECK(back[i].trial == rows[i].trial);
    CHECK(back[i].checkpoint == rows[i].checkpoint);
    CHECK(back[i].status == rows[i].status);
    if (rows[i].status == "ok") {
      // %.10g costs precision; reread values agree to that many digits
      CHECK(back[i].rel_loss_log10 ==
            doctest::Approx(rows[i].rel_loss_log10).epsilon(1e-9));
      CHECK(back[i].eta == doctest::Approx(rows[i].eta).epsilon(1e-9));
    } else {
      CHECK(std::isnan(back[i].rel_loss_log10));
    }
  }

  // a tampered header must not parse
  fs::path bad = scratch("badheader.csv");
  {
    std::ofstream f(bad, std::ios::binary);
    f << "depth,width\n1,2\n";
  }
  CHECK_THROWS_AS(read_scan_csv(bad.string()), std::runtime_error);
}

TEST_CASE("repeated scans produce byte-identical csv files") {
  ScanConfig cfg = tiny_config();
  Dataset ds = scan_dataset(cfg);
  fs::path a = scratch("again_a.csv"), b = scratch("again_b.csv");
  write_scan_csv(a.string(), run_scan(cfg, ds));
  write_scan_csv(b.string(), run_scan(cfg, ds));
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("heatmap pixels: gray ramp, divergence, and missing cells") {
  auto ok_row = [](int w, int trial, double rel) {
    return ScanRow{1, w, InitKind::orthogonal, trial, 0.1, 10, rel, "ok"};
  };
  std::vector<ScanRow> rows;
  rows.push_back(ok_row(1, 0, 0.0));     // gray 255
  rows.push_back(ok_row(2, 0, -3.0));    // (0.5*255)+0.5 floors to 128
  rows.push_back(ok_row(3, 0, -6.0));    // gray 0
  rows.push_back(ok_row(4, 0, -9.0));    // clamps to gray 0
  // width 5 has no rows at all: pure red
  rows.push_back({1, 6, InitKind::orthogonal, 0, 0.1, 10,
                  std::nan(""), "error"});  // error only: still missing
  rows.push_back({1, 7, InitKind::orthogonal, 0, 0.1, 10,
                  std::nan(""), "diverged"});  // +inf median: white
  rows.push_back(ok_row(8, 0, -1.0));    // median of {-1,-2,-5} = -2
  rows.push_back(ok_row(8, 1, -2.0));
  rows.push_back(ok_row(8, 2, -5.0));
  rows.push_back(ok_row(9, 0, -1.0));    // even count: mean of middles = -1.5
  rows.push_back(ok_row(9, 1, -2.0));
  // decoys that must be filtered out by scheme/checkpoint
  rows.push_back({1, 1, InitKind::gaussian, 0, 0.1, 10, -6.0, "ok"});
  rows.push_back({1, 1, InitKind::orthogonal, 0, 0.1, 99, -6.0, "ok"});

  fs::path ppm = scratch("map.ppm");
  emit_heatmap(rows, {1}, {1, 2, 3, 4, 5, 6, 7, 8, 9}, InitKind::orthogonal,
               10, ppm.string());

  std::string img = slurp(ppm);
  std::string head = "P6\n9 1\n255\n";
  REQUIRE(img.size() == head.size() + 27);
  CHECK(img.rfind(head, 0) == 0);
  auto px = [&](int col) {
    auto* p = reinterpret_cast<const unsigned char*>(img.data() + head.size());
    return std::array<int, 3>{p[3 * col], p[3 * col + 1], p[3 * col + 2]};
  };
  CHECK(px(0) == std::array<int, 3>{255, 255, 255});
  CHECK(px(1) == std::array<int, 3>{128, 128, 128});
  CHECK(px(2) == std::array<int, 3>{0, 0, 0});
  CHECK(px(3) == std::array<int, 3>{0, 0, 0});
  CHECK(px(4) == std::array<int, 3>{255, 0, 0});
  CHECK(px(5) == std::array<int, 3>{255, 0, 0});
  CHECK(px(6) == std::array<int, 3>{255, 255, 255});
  // median -2 -> (4/6)*255 + .5 = 170.5 floors to 170
  CHECK(px(7) == std::array<int, 3>{170, 170, 170});
  // median -1.5 -> (4.5/6)*255 + .5 = 191.75 floors to 191
  CHECK(px(8) == std::array<int, 3>{191, 191, 191});

  // the value table next to the image is the source of truth
  std::string csv = slurp(scratch("map.csv"));
  CHECK(csv ==
        "depth,width,median_rel_loss_log10\n"
        "1,1,0\n"
        "1,2,-3\n"
        "1,3,-6\n"
        "1,4,-9\n"
        "1,5,nan\n"
        "1,6,nan\n"
        "1,7,inf\n"
        "1,8,-2\n"
        "1,9,-1.5\n");
}

TEST_CASE("config file keys map onto the scan configuration") {
  fs::path p = scratch("scan.conf");
  {
    std::ofstream f(p);
    f << "# grid under test\n"
         "depths = 8, 16\n"
         "widths = 4,8\n"
         "schemes = gaussian\n"
         "trials = 2\n"
         "steps = 100\n"
         "checkpoints = 10, 100\n"
         "eta = 0.5\n"
         "master_seed = 9\n"
         "data_dx = 12\n"
         "data_dy = 3\n"
         "data_n = 10\n"
         "data_seed = 4\n"
         "data_normalize = true\n"
         "data_path = /nowhere/ds\n"
         "jobs = 2\n";
  }
  ScanConfig cfg;
  apply_config_file(cfg, p.string());
  CHECK(cfg.depths == std::vector<int>{8, 16});
  CHECK(cfg.widths == std::vector<int>{4, 8});
  CHECK(cfg.schemes == std::vector<InitKind>{InitKind::gaussian});
  CHECK(cfg.trials == 2);
  CHECK(cfg.steps == 100);
  CHECK(cfg.checkpoints == std::vector<long>{10, 100});
  CHECK(!cfg.eta_auto);
  CHECK(cfg.eta_fixed == 0.5);
  CHECK(cfg.master_seed == 9);
  CHECK(cfg.data_dx == 12);
  CHECK(cfg.data_dy == 3);
  CHECK(cfg.data_n == 10);
  CHECK(cfg.data_seed == 4);
  CHECK(cfg.data_normalize);
  CHECK(cfg.data_path == "/nowhere/ds");
  CHECK(cfg.jobs == 2);

  fs::path p2 = scratch("scan2.conf");
  {
    std::ofstream f(p2);
    f << "eta = auto\nschemes = orthogonal, gaussian\n";
  }
  apply_config_file(cfg, p2.string());
  CHECK(cfg.eta_auto);
  REQUIRE(cfg.schemes.size() == 2);

  fs::path p3 = scratch("scan3.conf");
  {
    std::ofstream f(p3);
    f << "depthz = 4\n";
  }
  ScanConfig fresh;
  try {
    apply_config_file(fresh, p3.string());
    FAIL("unknown key accepted");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("depthz") != std::string::npos);
  }
}
