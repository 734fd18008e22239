#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dln/linalg.hpp"

namespace dln {

// Spectral summary of the input matrix X, cached because nearly every bound
// in the project is a function of these numbers.
struct DataStats {
  int rank = 0;             // numerical rank r
  double kappa = 0.0;       // lambda_max(X^T X) / lambda_r(X^T X)
  double stable_rank = 0.0; // |X|_F^2 / |X|^2
  double sigma_min_x = 0.0; // sigma_r(X), smallest nonzero singular value
  double norm_x = 0.0;      // spectral norm |X|
  double frob_x = 0.0;      // |X|_F
  std::optional<double> norm_wstar; // |W*| when ground truth is known
};

struct Dataset {
  Matrix X;                     // d_x x n inputs
  Matrix Y;                     // d_y x n targets
  std::optional<Matrix> Wstar;  // d_y x d_x ground truth when realizable
  DataStats stats;
  std::uint64_t seed = 0;       // generator seed (0 when loaded without meta)
  bool normalized = false;      // targets rescaled to |Y|_F = 1

  int dx() const { return static_cast<int>(X.rows()); }
  int dy() const { return static_cast<int>(Y.rows()); }
  int n() const { return static_cast<int>(X.cols()); }
};

// Numerical rank threshold: singular values above rank_tol * sigma_1 count.
inline constexpr double kRankTol = 1e-10;

// i.i.d. standard normal X (d_x x n) and W* (d_y x d_x), realizable targets
// Y = W* X. Deterministic per seed.
Dataset gen_synthetic(int d_x, int d_y, int n, std::uint64_t seed);

// Stats for an arbitrary X (and optional ground truth). All-zero X throws
// std::invalid_argument (rank 0 is unsupported downstream).
DataStats data_stats(const Matrix& X, const Matrix* Wstar = nullptr);

// Replaces (X, Y) by the rank-r compression (U Sigma, Y V) from the compact
// SVD X = U Sigma V^T. The training objective changes only by an additive
// constant, and for realizable data not at all. Requires Wstar.
Dataset reduce_wlog(const Dataset& ds);

// Rescales Y (and W*, if present) by 1/|Y|_F so the target has unit Frobenius
// norm. X is deliberately untouched: rescaling inputs would change every
// learning-rate and bound computation downstream, not just the loss scale.
Dataset normalize_targets(const Dataset& ds);

// Directory format: X.mat, Y.mat, optional Wstar.mat in the matrix text
// serialization, plus "meta" with flat key=value lines (d_x, d_y, n, seed,
// and normalized when set).
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

}  // namespace dln
