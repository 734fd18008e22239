#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dln/data.hpp"
#include "dln/network.hpp"

namespace dln {

// Full-batch gradient descent configuration. eta unset means "auto": use
// contraction_lr(ds, L, d_y).
struct TrainConfig {
  DimensionPlan plan;
  InitScheme scheme;
  long steps = 0;
  std::optional<double> eta;
  long record_every = 1;   // cadence for loss rows (0 = only t=0 and final)
  long diag_every = 0;     // cadence for drift + product spectra (0 = never)
  std::uint64_t seed = 0;
  double stop_rel_loss = 0.0;  // early stop when loss/loss0 <= this (0 = off)
};

struct StepRecord {
  long t = 0;
  double loss = 0.0;
  double rel_loss = 0.0;
  // Diagnostic fields, present only on diag steps.
  std::optional<double> max_drift;        // max_i |W_i(t) - W_i(0)|_F
  std::optional<double> logsig_max_gap;   // max over sampled pairs of
                                          //   log sigma_max(W_{j:i}) - ((j-i+1)/2) log m
  std::optional<double> logsig_min_gap;   // min over sampled pairs of
                                          //   log sigma_min(W_{j:i}) - ((j-i+1)/2) log m
};

enum class RunStatus { ok, diverged };

std::string to_string(RunStatus s);

struct RunRecord {
  TrainConfig cfg;
  double eta_used = 0.0;
  double loss0 = 0.0;
  double loss_opt = 0.0;   // least-squares optimum for this dataset
  DataStats stats;
  std::vector<StepRecord> steps;
  RunStatus status = RunStatus::ok;
  bool early_stopped = false;
  long final_t = 0;
};

// Step size d_y / (2 L |X|^2): the largest rate the convergence guarantee
// covers. Anything at or below it is in-regime.
double contraction_lr(const DataStats& stats, int L, int d_y);

// One simultaneous update W_i <- W_i - eta G_i with all gradients evaluated
// at the old state. Returns the loss at the *old* state through loss_out
// (free, since the residual is part of the gradient computation) and false
// when a non-finite gradient or weight was produced, leaving the state
// unspecified for further training.
bool gd_step(NetworkState& net, const Dataset& ds, double eta,
             double* loss_out);

// The sampled (i, j) pairs used for partial-product spectra diagnostics:
// the pattern {(1,i), (i,L), (i, i + ceil(L/4))} over a small spread of i,
// deduplicated, (1,L) excluded (the end-to-end product is not an isometry).
std::vector<std::pair<int, int>> diag_pairs(int L);

// Runs gradient descent for cfg.steps or until early stop / divergence
// (loss > 1e12 * loss(0) or non-finite). Deterministic given (cfg, ds).
// Note t=0 is always recorded, as is the final step reached.
RunRecord train_run(const TrainConfig& cfg, const Dataset& ds);

// run.csv: "t,loss,rel_loss,max_drift,logsig_max_gap,logsig_min_gap" with
// empty diagnostic fields on non-diag rows; meta: flat key=value echo of the
// config, eta, loss0, loss_opt, data stats and final status.
void write_run_csv(const std::string& path, const RunRecord& rec);
void write_run_meta(const std::string& path, const RunRecord& rec);

}  // namespace dln
