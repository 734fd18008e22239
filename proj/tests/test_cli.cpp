#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dln/cli.hpp"
#include "dln/data.hpp"
#include "dln/kvfile.hpp"

using namespace dln;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / "dln_cli_test";
  fs::create_directories(dir);
  return dir / leaf;
}

int cli(std::initializer_list<std::string> args) {
  return run_cli(std::vector<std::string>(args));
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("usage errors and help") {
  CHECK(cli({}) == 2);                       // a subcommand is required
  CHECK(cli({"frobnicate"}) == 2);           // unknown subcommand
  CHECK(cli({"--help"}) == 0);
  CHECK(cli({"train", "--help"}) == 0);
  CHECK(cli({"train", "--no-such-flag"}) == 2);
  CHECK(cli({"train", "--depth", "potato"}) == 2);
}

TEST_CASE("gen-data writes a loadable dataset") {
  fs::path out = scratch("gen");
  fs::remove_all(out);
  CHECK(cli({"--out", out.string(), "--seed", "5", "gen-data", "--dx", "6",
             "--dy", "2", "--n", "4", "--normalize"}) == 0);
  Dataset ds = load_dataset(out.string());
  CHECK(ds.dx() == 6);
  CHECK(ds.dy() == 2);
  CHECK(ds.n() == 4);
  CHECK(ds.normalized);
  CHECK(ds.Y.norm() == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(cli({"--out", scratch("gen_bad").string(), "gen-data", "--dx", "0"}) ==
        2);
}

TEST_CASE("train runs, records, and reports divergence in the exit code") {
  fs::path out = scratch("train");
  fs::remove_all(out);
  CHECK(cli({"--out", out.string(), "--seed", "3", "train", "--depth", "3",
             "--width", "8", "--dx", "6", "--dy", "2", "--n", "4", "--steps",
             "40", "--record-every", "10"}) == 0);

  std::string csv = slurp(out / "run.csv");
  CHECK(csv.rfind("t,loss,rel_loss,", 0) == 0);

  auto meta = read_kv_file((out / "meta").string());
  CHECK(parse_long(meta.at("steps")) == 40);
  CHECK(meta.at("status") == "ok");
  CHECK(meta.at("scheme") == "orthogonal");

  // zero steps: still a valid run with the single t=0 row
  fs::path out0 = scratch("train0");
  fs::remove_all(out0);
  CHECK(cli({"--out", out0.string(), "train", "--depth", "2", "--width", "8",
             "--dx", "6", "--dy", "2", "--n", "4", "--steps", "0"}) == 0);

  // an absurd learning rate must surface as the divergence exit code
  fs::path outd = scratch("traind");
  fs::remove_all(outd);
  CHECK(cli({"--out", outd.string(), "train", "--depth", "3", "--width", "8",
             "--dx", "6", "--dy", "2", "--n", "4", "--steps", "50", "--eta",
             "1e6"}) == 3);
  auto dmeta = read_kv_file((outd / "meta").string());
  CHECK(dmeta.at("status") == "diverged");
}

TEST_CASE("train accepts a gaussian sigma list") {
  fs::path out = scratch("train_sig");
  fs::remove_all(out);
  CHECK(cli({"--out", out.string(), "train", "--scheme", "gaussian", "--sigma",
             "1.0,1.0,1.0", "--depth", "3", "--width", "8", "--dx", "6",
             "--dy", "2", "--n", "4", "--steps", "5"}) == 0);
  auto meta = read_kv_file((out / "meta").string());
  CHECK(meta.at("scheme") == "gaussian");
}

TEST_CASE("scan emits the grid csv and one heatmap per scheme/checkpoint") {
  fs::path out = scratch("scan");
  fs::remove_all(out);
  CHECK(cli({"--out", out.string(), "--seed", "7", "scan", "--depths", "2,3",
             "--widths", "6,8", "--trials", "1", "--steps", "5",
             "--checkpoints", "0,5", "--dx", "6", "--dy", "2", "--n", "4"}) ==
        0);
  CHECK(fs::exists(out / "scan.csv"));
  for (const char* name :
       {"heatmap_orthogonal_t0.ppm", "heatmap_orthogonal_t5.ppm",
        "heatmap_gaussian_t0.ppm", "heatmap_gaussian_t5.ppm",
        "heatmap_orthogonal_t5.csv", "heatmap_gaussian_t5.csv"})
    CHECK(fs::exists(out / name));

  // same flags, second directory: byte-identical grid output
  fs::path out2 = scratch("scan_again");
  fs::remove_all(out2);
  CHECK(cli({"--out", out2.string(), "--seed", "7", "scan", "--depths", "2,3",
             "--widths", "6,8", "--trials", "1", "--steps", "5",
             "--checkpoints", "0,5", "--dx", "6", "--dy", "2", "--n", "4"}) ==
        0);
  CHECK(slurp(out / "scan.csv") == slurp(out2 / "scan.csv"));
  CHECK(slurp(out / "heatmap_orthogonal_t5.ppm") ==
        slurp(out2 / "heatmap_orthogonal_t5.ppm"));
}

TEST_CASE("scan honors a config file with flag overrides") {
  fs::path conf = scratch("grid.conf");
  {
    std::ofstream f(conf);
    f << "depths = 2\n"
         "widths = 6\n"
         "schemes = orthogonal\n"
         "trials = 1\n"
         "steps = 4\n"
         "checkpoints = 4\n"
         "data_dx = 6\n"
         "data_dy = 2\n"
         "data_n = 4\n";
  }
  fs::path out = scratch("scan_conf");
  fs::remove_all(out);
  // --widths on the command line wins over the file value
  CHECK(cli({"--out", out.string(), "--config", conf.string(), "scan",
             "--widths", "8"}) == 0);
  std::string csv = slurp(out / "scan.csv");
  CHECK(csv.find("2,8,orthogonal") != std::string::npos);
  CHECK(csv.find("2,6,orthogonal") == std::string::npos);

  fs::path bad = scratch("bad.conf");
  {
    std::ofstream f(bad);
    f << "no_such_key = 1\n";
  }
  CHECK(cli({"--out", scratch("scan_badconf").string(), "--config",
             bad.string(), "scan"}) == 2);
}

TEST_CASE("verify families: selection, exit codes, and the fault canary") {
  fs::path out = scratch("verify");
  fs::remove_all(out);
  CHECK(cli({"--out", out.string(), "verify", "--only", "grad-check"}) == 0);
  CHECK(fs::exists(out / "report.csv"));
  CHECK(fs::exists(out / "summary.txt"));
  std::string rep = slurp(out / "report.csv");
  CHECK(rep.rfind("check_name,bound,observed,tol,verdict\n", 0) == 0);
  CHECK(rep.find("pass") != std::string::npos);

  CHECK(cli({"--out", scratch("verify_unknown").string(), "verify", "--only",
             "no-such-family"}) == 2);

  // a deliberately corrupted weight stack must turn the suite red
  fs::path outf = scratch("verify_fault");
  fs::remove_all(outf);
  CHECK(cli({"--out", outf.string(), "verify", "--only", "ortho-init",
             "--inject-fault"}) == 1);
  std::string frep = slurp(outf / "report.csv");
  CHECK(frep.find("fail") != std::string::npos);
}
