#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dln/data.hpp"
#include "dln/rng.hpp"

using namespace dln;
namespace fs = std::filesystem;

namespace {

Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k)
      for (int j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

double loss_of(const Matrix& w, const Dataset& ds) {
  return 0.5 * (w * ds.X - ds.Y).squaredNorm();
}

}  // namespace

TEST_CASE("synthetic targets are exactly W* X") {
  Dataset ds = gen_synthetic(8, 2, 8, 1);
  REQUIRE(ds.Wstar.has_value());
  Matrix y = matmul_oracle(*ds.Wstar, ds.X);
  CHECK((y - ds.Y).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ds.dx() == 8);
  CHECK(ds.dy() == 2);
  CHECK(ds.n() == 8);
}

TEST_CASE("generation is deterministic and seed-sensitive") {
  Dataset a = gen_synthetic(6, 3, 5, 42);
  Dataset b = gen_synthetic(6, 3, 5, 42);
  Dataset c = gen_synthetic(6, 3, 5, 43);
  CHECK((a.X - b.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.Y - b.Y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.X - c.X).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("bad dimensions are rejected") {
  CHECK_THROWS_AS(gen_synthetic(0, 2, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_synthetic(2, -1, 3, 1), std::invalid_argument);
}

TEST_CASE("data_stats on a hand matrix") {
  Matrix x(2, 3);
  x << 3, 0, 0, 0, 4, 0;  // singular values 4 and 3, one zero column
  DataStats st = data_stats(x);
  CHECK(st.rank == 2);
  CHECK(st.norm_x == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(st.sigma_min_x == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(st.kappa == doctest::Approx(16.0 / 9.0).epsilon(1e-14));
  CHECK(st.frob_x == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(st.stable_rank == doctest::Approx(25.0 / 16.0).epsilon(1e-14));
}

TEST_CASE("data_stats rejects the all-zero matrix") {
  CHECK_THROWS_AS(data_stats(Matrix::Zero(3, 3)), std::invalid_argument);
}

TEST_CASE("rank counts only singular values above the relative floor") {
  Matrix x = Matrix::Zero(3, 3);
  x(0, 0) = 1.0;
  x(1, 1) = 1e-5;
  x(2, 2) = 1e-14;  // below kRankTol * sigma_1
  DataStats st = data_stats(x);
  CHECK(st.rank == 2);
  CHECK(st.sigma_min_x == doctest::Approx(1e-5).epsilon(1e-12));
}

TEST_CASE("reduce_wlog changes the objective only by a constant") {
  // Overcomplete sample set: n > d_x makes the compression nontrivial.
  Dataset ds = gen_synthetic(6, 2, 10, 3);
  Dataset red = reduce_wlog(ds);
  CHECK(red.n() == red.stats.rank);
  CHECK(red.stats.rank == ds.stats.rank);

  SplitMix64 gen(99);
  double first_diff = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    Matrix w(2, 6);
    for (int j = 0; j < 6; ++j)
      for (int i = 0; i < 2; ++i) w(i, j) = gen.normal();
    double diff = loss_of(w, ds) - loss_of(w, red);
    if (trial == 0)
      first_diff = diff;
    else
      CHECK(diff == doctest::Approx(first_diff).epsilon(1e-10));
  }
  // Realizable data: the constant is zero.
  CHECK(std::abs(first_diff) < 1e-9);
}

TEST_CASE("normalize_targets rescales Y to unit Frobenius norm") {
  Dataset ds = gen_synthetic(5, 3, 7, 8);
  Dataset nm = normalize_targets(ds);
  CHECK(nm.Y.norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(nm.normalized);
  // X untouched; W* rescaled consistently so Y = W* X still holds.
  CHECK((nm.X - ds.X).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(nm.Wstar.has_value());
  CHECK((*nm.Wstar * nm.X - nm.Y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dataset directory round-trip preserves everything") {
  fs::path dir = fs::temp_directory_path() / "dln_data_test" / "ds";
  fs::create_directories(dir);
  Dataset ds = gen_synthetic(4, 2, 6, 17);
  save_dataset(dir.string(), ds);
  Dataset back = load_dataset(dir.string());
  CHECK((back.X - ds.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.Y - ds.Y).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.Wstar.has_value());
  CHECK((*back.Wstar - *ds.Wstar).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.seed == 17);
  CHECK(!back.normalized);

  SUBCASE("rewrite is byte-identical") {
    fs::path dir2 = fs::temp_directory_path() / "dln_data_test" / "ds2";
    fs::create_directories(dir2);
    save_dataset(dir2.string(), ds);
    for (const char* name : {"X.mat", "Y.mat", "Wstar.mat", "meta"}) {
      std::ifstream f1(dir / name, std::ios::binary);
      std::ifstream f2(dir2 / name, std::ios::binary);
      std::string s1((std::istreambuf_iterator<char>(f1)), {});
      std::string s2((std::istreambuf_iterator<char>(f2)), {});
      CHECK(s1 == s2);
    }
  }

  SUBCASE("tampered targets are rejected on load") {
    fs::path dir3 = fs::temp_directory_path() / "dln_data_test" / "ds3";
    fs::create_directories(dir3);
    save_dataset(dir3.string(), ds);
    Dataset evil = ds;
    evil.Y(0, 0) += 1.0;
    write_matrix((dir3 / "Y.mat").string(), evil.Y);
    CHECK_THROWS_AS(load_dataset(dir3.string()), std::runtime_error);
  }
}
