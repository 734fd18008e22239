#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dln/data.hpp"
#include "dln/init.hpp"

namespace dln {

// Depth x width grid sweep configuration. The dataset is shared across all
// cells: either generated from (data_dx, data_dy, data_n, data_seed) or
// loaded from data_path when nonempty.
struct ScanConfig {
  std::vector<int> depths;
  std::vector<int> widths;
  std::vector<InitKind> schemes{InitKind::orthogonal, InitKind::gaussian};
  int trials = 3;
  long steps = 0;                 // 0 = run to max(checkpoints)
  std::vector<long> checkpoints{1258, 10000};
  bool eta_auto = true;
  double eta_fixed = 0.0;
  std::uint64_t master_seed = 1;
  int data_dx = 64, data_dy = 4, data_n = 16;
  std::uint64_t data_seed = 1;
  bool data_normalize = false;
  std::string data_path;
  int jobs = 1;

  void validate() const;  // throws std::invalid_argument
};

// One output row. rel_loss_log10 = log10(loss(t)/loss(0)); NaN unless status
// is "ok" (divergence or rejected configs carry no meaningful loss).
struct ScanRow {
  int depth = 0;
  int width = 0;
  InitKind scheme = InitKind::orthogonal;
  int trial = 0;
  double eta = 0.0;
  long checkpoint = 0;
  double rel_loss_log10 = 0.0;
  std::string status;  // "ok" | "diverged" | "error"
};

// Deterministic per-cell seed: chained stream derivation over
// (master, depth, width, scheme, trial). Collisions across the grid are
// checked at scan startup.
std::uint64_t cell_seed(std::uint64_t master, int depth, int width,
                        InitKind scheme, int trial);

// Runs every (depth, width, scheme, trial) cell on a worker pool of
// cfg.jobs threads. Rows come back ordered by (depth, width, scheme, trial,
// checkpoint) regardless of completion order, so output is byte-deterministic
// for a given config. Cell failures (invalid plan, divergence) become row
// statuses, never exceptions.
std::vector<ScanRow> run_scan(const ScanConfig& cfg, const Dataset& ds);

// Loads or generates the scan dataset per cfg.
Dataset scan_dataset(const ScanConfig& cfg);

// CSV: header "depth,width,scheme,trial,eta,checkpoint,rel_loss_log10,status",
// floats %.10g, LF newlines.
void write_scan_csv(const std::string& path, const std::vector<ScanRow>& rows);
std::vector<ScanRow> read_scan_csv(const std::string& path);

// Heat map for one (scheme, checkpoint) slice: binary P6 pixmap, one pixel
// per grid cell, rows = depths ascending top-to-bottom, cols = widths
// ascending left-to-right. Gray level = median-over-trials rel_loss_log10
// clamped to [-6, 0] and mapped linearly to [0, 255] (round half up), so
// darker means smaller loss. Cells with no usable trial are pure red.
// A CSV of the exact median values is written next to the image
// (same path with .csv appended in place of .ppm).
void emit_heatmap(const std::vector<ScanRow>& rows,
                  const std::vector<int>& depths, const std::vector<int>& widths,
                  InitKind scheme, long checkpoint, const std::string& path);

// Flat key=value config file (# comments, one key per line). Unknown keys
// throw std::invalid_argument naming the key. Keys mirror the CLI flags of
// the scan subcommand.
void apply_config_file(ScanConfig& cfg, const std::string& path);

}  // namespace dln
