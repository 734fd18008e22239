#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dln/linalg.hpp"
#include "dln/rng.hpp"

namespace dln {

enum class InitKind { orthogonal, gaussian };

std::string to_string(InitKind k);
InitKind init_kind_from_string(const std::string& s);

// Weight initialization scheme. sigma holds the per-layer standard deviations
// for the gaussian kind; empty means 1.0 everywhere. The orthogonal kind
// ignores sigma.
struct InitScheme {
  InitKind kind = InitKind::orthogonal;
  std::vector<double> sigma;

  double sigma_for(int layer) const;  // layer is 1-based

  static InitScheme orthogonal() { return {InitKind::orthogonal, {}}; }
  static InitScheme gaussian(std::vector<double> s = {}) {
    return {InitKind::gaussian, std::move(s)};
  }
};

// Layer dimensions d_0..d_L. d_0 is the input width, d_L the output width.
struct DimensionPlan {
  std::vector<int> dims;

  int depth() const { return static_cast<int>(dims.size()) - 1; }
  int d_in() const { return dims.front(); }
  int d_out() const { return dims.back(); }

  // Uniform hidden width m between input and output. For L = 1 there are no
  // hidden layers and m is only retained as metadata.
  static DimensionPlan uniform(int L, int d_x, int d_y, int m);

  // Hidden width when all hidden dims agree; throws otherwise. For L = 1
  // returns max(d_in, d_out), the size of the square matrix the single
  // orthogonal layer is sliced from.
  int hidden_width() const;
  bool hidden_uniform() const;

  void validate() const;  // throws std::invalid_argument on bad dims
};

// i.i.d. standard normal matrix. Column-major fill order is part of the
// determinism contract; do not reorder the loops.
Matrix gaussian_matrix(int rows, int cols, SplitMix64& gen);

// Haar-distributed orthogonal m x m matrix: QR of an i.i.d. Gaussian matrix
// with the sign of diag(R) folded into Q's columns (without the sign fix the
// QR convention biases the distribution).
Matrix sample_haar_orthogonal(int m, SplitMix64& gen);

// Output scale making E|f(x)|^2 = |x|^2 at init.
//   orthogonal: 1/sqrt(m^(L-1) d_y)
//   gaussian:   1/sqrt(d_y sigma_L^2 prod_{i<L} d_i sigma_i^2)
// Only the log form is safe at large depth; output_scale() is exp() of it and
// may underflow to 0 for deep stacks, which callers must not feed back into
// arithmetic (NetworkState carries the log).
double output_log_scale(const DimensionPlan& plan, const InitScheme& scheme);
double output_scale(const DimensionPlan& plan, const InitScheme& scheme);

// Sanity condition for the gaussian scheme: d_i sigma_i^2 within
// [L^-c, L^c] for every layer. Violations do not stop a run; the caller
// surfaces them as warnings.
bool gaussian_scale_sane(const DimensionPlan& plan, const InitScheme& scheme,
                         double c_exponent = 1.0);

}  // namespace dln
