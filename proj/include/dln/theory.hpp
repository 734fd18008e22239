#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dln/data.hpp"
#include "dln/network.hpp"
#include "dln/trainer.hpp"

namespace dln {

// One evaluated inequality: both sides always reported, never a bare boolean.
// verdict is "pass", "fail", "skip" (premise not applicable) or "info"
// (reported quantity with no pass bar). probabilistic marks checks that are
// only guaranteed with high probability over the init draw; they do not gate
// process exit codes.
struct TheoryEntry {
  std::string name;
  double bound = 0.0;
  double observed = 0.0;
  double tol = 0.0;
  std::string verdict;
  bool probabilistic = false;
  std::string note;
};

struct TheoryReport {
  std::vector<TheoryEntry> entries;

  void add(TheoryEntry e) { entries.push_back(std::move(e)); }
  void merge(const TheoryReport& other);
  bool all_pass() const;        // no "fail" rows at all
  bool hard_pass() const;       // no non-probabilistic "fail" rows
  std::size_t fail_count() const;
};

// CSV rows "check_name,bound,observed,tol,verdict" plus a readable summary.
void write_report_csv(const std::string& path, const TheoryReport& report);
std::string report_summary(const TheoryReport& report);

// Gaussian-normalized weights A_i = W_i / (sqrt(d_i) sigma_i) with
// log beta = log alpha + sum log(sqrt(d_i) sigma_i), so that
// beta * A_{L:1} = alpha * W_{L:1}. For the orthogonal scheme the same
// normalization uses c_i = sqrt(m).
struct ScaledWeights {
  std::vector<Matrix> A;
  double log_beta = 0.0;
};

ScaledWeights scale_weights(const NetworkState& net);

// The PSD operator driving the linearized residual dynamics
//   vec(U(t+1) - U(t)) ~= -eta P(t) vec(U(t) - Y),
//   P = alpha^2 sum_i (W_{i-1:1} X)^T (W_{i-1:1} X)  kron  W_{L:i+1} W_{L:i+1}^T.
// Formed explicitly, so n*d_y is capped (default 4096); beyond the cap throws
// std::invalid_argument.
Matrix build_step_operator(const NetworkState& net, const Matrix& X,
                           int size_cap = 4096);

// Extreme eigenvalues of P against the window
//   lam_max <= 2 L sigma_max^2(X) / d_y,  lam_min >= (3/5) L sigma_min^2(X) / d_y.
// The window is only claimed while the partial products stay near-isometric,
// so that is checked first and reported alongside.
struct OperatorWindow {
  double lam_min = 0.0;
  double lam_max = 0.0;
  bool pass = false;
  TheoryReport report;
};
OperatorWindow step_operator_window(const NetworkState& net, const Dataset& ds);

// Per-step contraction factor 1 - eta L lambda_r(X^T X) / (2 d_y). Throws
// when eta exceeds contraction_lr (the formula is only claimed up to there)
// or the factor leaves (0, 1].
double contraction_factor(const DataStats& stats, int L, int d_y, double eta);

// loss_opt + factor^t (loss0 - loss_opt), evaluated in log space so large t
// underflows to loss_opt instead of NaN.
double contraction_bound_curve(double loss0, double loss_opt, double factor,
                               long t);

// Width sufficient for the convergence guarantee:
//   max(ceil(C * stable_rank * kappa^2 * (d_y (1 + |W*|^2) + log(r/delta))), d_x).
// Returned as double: the requirement is astronomically large for
// ill-conditioned desk datasets and must not wrap an integer type.
double width_requirement(const Dataset& ds, int d_y, double delta,
                         double C = 1.0);

// High-probability init-loss ceiling
//   c_B (1 + log(r/delta)/d_y + |W*|^2) |X|_F^2, default c_B = 10.
double init_loss_bound(const DataStats& stats, int d_y, double delta,
                       double c_B = 10.0);

// Near-isometry window for sampled partial products: for each (i,j) != (1,L),
//   log sigma_max(W_{j:i}) <= log hi + ((j-i+1)/2) log m and
//   log sigma_min(W_{j:i}) >= log lo + same,
// evaluated in log space. Requires uniform hidden width (orthogonal-style
// dims); otherwise a single "skip" entry is returned.
TheoryReport check_isometry_window(const NetworkState& net,
                                   const std::vector<std::pair<int, int>>& pairs,
                                   double lo = 0.9, double hi = 1.1);

// Drift radius: every |W_i(t) - W_i(0)|_F <= 8 sqrt(B d_y) |X| / (L sigma_min^2(X)),
// with B the init_loss_bound value. Scheme-scoped: reported as "skip" for
// non-orthogonal runs.
TheoryReport check_drift_radius(const NetworkState& net0,
                                const NetworkState& net_t,
                                const DataStats& stats, double B_value);

// Splits one GD step into the linear part -eta P(t) vec(U - Y) and the
// high-order remainder E(t):
//   vec(U(t+1) - U(t)) = -eta P(t) vec(U(t) - Y) + alpha vec(E(t) X).
// identity_err checks that remainder against an independent reconstruction
// from the weight updates themselves (both routes must agree to round-off).
// The bound check is alpha |E X|_F <= (1/6) eta lambda_min(P) |U - Y|_F.
struct ResidualResult {
  double identity_err = 0.0;   // relative disagreement of the two routes
  double e_norm = 0.0;         // alpha |E X|_F
  double e_bound = 0.0;        // (1/6) eta lambda_min(P) |U - Y|_F
  double lam_min = 0.0;
  bool identity_ok = false;
  bool bound_ok = false;
  TheoryReport report;
};
ResidualResult linearization_residual(const NetworkState& net_t,
                                      const NetworkState& net_t1,
                                      const Dataset& ds, double eta);

// Monte Carlo over gaussian stacks A_i with N(0, 1/d_i) entries: spectral
// norms of the prefixes A_{j:1} per depth j, the fitted slope of the median
// log-norm versus j, and tail statistics of max_{i<=j} |A_{j:i}|.
struct DecayStats {
  std::vector<int> depths;               // j = 1..L
  std::vector<double> median_log_norm;   // median over trials per depth
  double slope = 0.0;                    // LS fit of median_log_norm vs j
  double normalized_rate = 0.0;          // -median(L) / L^gamma_probe
  double tail_q50 = 0.0;                 // quantiles over trials of
  double tail_q90 = 0.0;                 //   max_{i<=j} |A_{j:i}|
  double tail_max = 0.0;
};
DecayStats product_decay_mc(const std::vector<int>& dims, double gamma_probe,
                            int trials, std::uint64_t seed);

// E sqrt(Z) for d Z ~ chi^2_d: exact sqrt(2/d) Gamma((d+1)/2)/Gamma(d/2)
// versus a Monte Carlo mean. d = 1 gives sqrt(2/pi).
double sqrt_chi2_moment_exact(int d);
double sqrt_chi2_moment_mc(int d, long draws, std::uint64_t seed);

// Random per-layer spectral-norm-epsilon perturbations of a scaled stack:
// verifies that long products (j - i >= L/4) keep their worst log-norm within
// log 2 of the unperturbed worst, provided epsilon is below the measured
// stability threshold exp(0.6 * slope * L) (slope from the stack's own decay
// fit). Above the threshold the check reports "skip" (premise violated).
TheoryReport perturbation_stability(const ScaledWeights& sw, double epsilon,
                                    int probes, std::uint64_t seed);

// Verifies loss(t) in (0.4, 0.6) |Y|_F^2 for every recorded step of a
// gaussian run and reports the drift-per-step scale as an "info" entry
// (deep stacks should show smaller per-step movement).
TheoryReport stuck_window_check(const RunRecord& rec, const Dataset& ds);

}  // namespace dln
