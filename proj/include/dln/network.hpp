#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dln/data.hpp"
#include "dln/init.hpp"
#include "dln/linalg.hpp"

namespace dln {

// Weight stack of the deep linear network f(x) = alpha * W_L ... W_1 x.
//
// alpha and the per-layer normalizers c_i are carried in log space so that
// depth-700 stacks never materialize m^(L-1). log_layer_scale[i] is log c_i
// for layer i+1, where c_i is the scale that makes W_i/c_i approximately an
// isometry at init (sqrt(m) for orthogonal layers, sqrt(d_i)*sigma_i for
// gaussian ones). All product computations run on the scaled chain and apply
// exp(log_gamma) once at the end.
struct NetworkState {
  DimensionPlan plan;
  InitScheme scheme;
  std::vector<Matrix> weights;         // W_1..W_L, W_i is d_i x d_{i-1}
  double log_alpha = 0.0;
  std::vector<double> log_layer_scale; // log c_1..log c_L
  std::uint64_t seed = 0;              // init stream, kept for metadata
  long step = 0;                       // training steps applied so far

  int depth() const { return plan.depth(); }
  double alpha() const;                // exp(log_alpha); may underflow
  // log gamma = log_alpha + sum_i log c_i; gamma * (scaled chain) = alpha * W_{L:1}.
  double log_gamma() const;

  void validate() const;  // shape chain + finite alpha, throws on violation
};

// Samples the initial stack. Orthogonal: W_1 = first d_x columns of
// sqrt(m)*Haar(m), hidden layers full sqrt(m)*Haar(m), W_L = first d_y rows;
// for L = 1 the single weight is the d_y x d_x corner of sqrt(m)*Haar(m).
// Gaussian: i.i.d. N(0, sigma_i^2) entries. Layers draw from independent
// derived streams, so they can be compared across depths.
// Throws std::invalid_argument when the plan violates the scheme (orthogonal
// needs uniform hidden width m >= max(d_x, d_y)).
NetworkState init_weights(const DimensionPlan& plan, const InitScheme& scheme,
                          std::uint64_t seed);

// Cached scaled partial products for one forward/backward sweep.
//   prefix[i] = (W_i/c_i) ... (W_1/c_1) X   for i = 0..L (prefix[0] = X)
//   suffix[i] = (W_L/c_L) ... (W_i/c_i)     for i = 1..L+1 (suffix[L+1] = I)
// The true output is U = exp(log_gamma) * prefix[L].
struct ProductCache {
  std::vector<Matrix> prefix;
  std::vector<Matrix> suffix;
};

ProductCache build_cache(const NetworkState& net, const Matrix& X);

// U = alpha * W_L ... W_1 X, shape d_y x n. Throws on input-width mismatch.
Matrix forward_output(const NetworkState& net, const Matrix& X);

// 1/2 |U - Y|_F^2.
double loss(const NetworkState& net, const Dataset& ds);

// Explicit W_j ... W_i (1-based, inclusive). j = i-1 yields the identity of
// width d_{i-1}. Only sensible at desk scale; deep chains should use
// log_sigma_extremes instead. Throws on out-of-range indices.
Matrix partial_product(const NetworkState& net, int i, int j);

// (log sigma_max, log sigma_min) of W_j ... W_i, computed on the scaled chain
// with per-step Frobenius renormalization so the result is finite for any
// depth. j >= i required.
std::pair<double, double> log_sigma_extremes(const NetworkState& net, int i,
                                             int j);

// Loss gradients G_1..G_L, G_i = alpha * W_{L:i+1}^T (U - Y) (W_{i-1:1} X)^T,
// assembled from one prefix and one suffix pass (2L products, never a
// per-pair chain). When cache/U are supplied they must belong to (net, X).
std::vector<Matrix> gradients(const NetworkState& net, const Dataset& ds);
std::vector<Matrix> gradients(const NetworkState& net, const Dataset& ds,
                              const ProductCache& cache, const Matrix& U);

// Least-squares baseline: argmin_W 1/2 |W X - Y|_F^2 via the pseudo-inverse
// (min-norm solution), plus the attained loss.
std::pair<Matrix, double> least_squares_opt(const Dataset& ds);

// Checkpoint directory: W_1.mat..W_L.mat plus "meta" (flat key=value: dims,
// scheme, sigma when gaussian, log_alpha, alpha, seed, step).
void save_checkpoint(const std::string& dir, const NetworkState& net);
NetworkState load_checkpoint(const std::string& dir);

}  // namespace dln
