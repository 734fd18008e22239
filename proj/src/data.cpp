#include "dln/data.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "dln/init.hpp"
#include "dln/kvfile.hpp"
#include "dln/rng.hpp"

namespace dln {

namespace fs = std::filesystem;

Dataset gen_synthetic(int d_x, int d_y, int n, std::uint64_t seed) {
  if (d_x < 1 || d_y < 1 || n < 1)
    throw std::invalid_argument("gen_synthetic: all dimensions must be >= 1");
  // Independent streams for X and W* so changing one shape never perturbs
  // the other draw.
  SplitMix64 gx(mix_seed(seed, 0x58));
  SplitMix64 gw(mix_seed(seed, 0x57));
  Dataset ds;
  ds.X = gaussian_matrix(d_x, n, gx);
  Matrix wstar = gaussian_matrix(d_y, d_x, gw);
  ds.Y = wstar * ds.X;
  ds.Wstar = std::move(wstar);
  ds.seed = seed;
  ds.stats = data_stats(ds.X, &*ds.Wstar);
  return ds;
}

DataStats data_stats(const Matrix& X, const Matrix* Wstar) {
  auto sv = singular_values(X);
  double s1 = sv.front();
  if (s1 <= 0.0)
    throw std::invalid_argument("data_stats: all-zero X has rank 0");
  DataStats st;
  for (double s : sv)
    if (s > kRankTol * s1) ++st.rank;
  double sr = sv[st.rank - 1];
  st.kappa = (s1 * s1) / (sr * sr);
  double frob2 = 0.0;
  for (double s : sv) frob2 += s * s;
  st.stable_rank = frob2 / (s1 * s1);
  st.sigma_min_x = sr;
  st.norm_x = s1;
  st.frob_x = std::sqrt(frob2);
  if (Wstar) st.norm_wstar = spectral_norm(*Wstar);
  return st;
}

Dataset reduce_wlog(const Dataset& ds) {
  if (!ds.Wstar)
    throw std::invalid_argument("reduce_wlog: needs realizable data (Wstar)");
  Eigen::BDCSVD<Matrix> svd(ds.X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > kRankTol * s(0)) ++r;
  if (r == 0) throw std::invalid_argument("reduce_wlog: rank-0 input");
  Dataset out;
  // X' = U Sigma (d_x x r), Y' = Y V (d_y x r): right-multiplying by V drops
  // only directions X has no energy in, shifting the objective by a constant.
  out.X = svd.matrixU().leftCols(r) * s.head(r).asDiagonal();
  out.Y = ds.Y * svd.matrixV().leftCols(r);
  out.Wstar = ds.Wstar;
  out.seed = ds.seed;
  out.normalized = ds.normalized;
  out.stats = data_stats(out.X, &*out.Wstar);
  double resid = (*out.Wstar * out.X - out.Y).norm();
  if (resid >= 1e-9 * std::max(1.0, out.Y.norm()))
    throw std::runtime_error("reduce_wlog: realizability lost in reduction");
  return out;
}

Dataset normalize_targets(const Dataset& ds) {
  double ny = ds.Y.norm();
  if (ny <= 0.0)
    throw std::invalid_argument("normalize_targets: zero targets");
  Dataset out = ds;
  out.Y /= ny;
  if (out.Wstar) *out.Wstar /= ny;
  out.normalized = true;
  out.stats = data_stats(out.X, out.Wstar ? &*out.Wstar : nullptr);
  return out;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
  fs::create_directories(dir);
  write_matrix(dir + "/X.mat", ds.X);
  write_matrix(dir + "/Y.mat", ds.Y);
  if (ds.Wstar) write_matrix(dir + "/Wstar.mat", *ds.Wstar);
  std::ofstream meta(dir + "/meta", std::ios::binary);
  if (!meta) throw std::runtime_error("save_dataset: cannot write meta");
  meta << "d_x=" << ds.X.rows() << "\nd_y=" << ds.Y.rows()
       << "\nn=" << ds.X.cols() << "\nseed=" << ds.seed << "\n";
  if (ds.normalized) meta << "normalized=1\n";
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  ds.X = read_matrix(dir + "/X.mat");
  ds.Y = read_matrix(dir + "/Y.mat");
  if (ds.X.cols() != ds.Y.cols())
    throw std::runtime_error("load_dataset: X and Y sample counts differ");
  if (fs::exists(dir + "/Wstar.mat")) {
    ds.Wstar = read_matrix(dir + "/Wstar.mat");
    if (ds.Wstar->rows() != ds.Y.rows() || ds.Wstar->cols() != ds.X.rows())
      throw std::runtime_error("load_dataset: Wstar shape mismatch");
    double rel = (*ds.Wstar * ds.X - ds.Y).norm() / std::max(1e-300, ds.Y.norm());
    if (rel >= 1e-10)
      throw std::runtime_error("load_dataset: Wstar does not reproduce Y");
  }
  if (fs::exists(dir + "/meta")) {
    auto kv = read_kv_file(dir + "/meta");
    if (auto it = kv.find("seed"); it != kv.end()) ds.seed = parse_u64(it->second);
    if (auto it = kv.find("normalized"); it != kv.end())
      ds.normalized = parse_bool(it->second);
  }
  ds.stats = data_stats(ds.X, ds.Wstar ? &*ds.Wstar : nullptr);
  return ds;
}

}  // namespace dln
