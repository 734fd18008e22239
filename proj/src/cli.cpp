#include "dln/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dln/data.hpp"
#include "dln/init.hpp"
#include "dln/kvfile.hpp"
#include "dln/network.hpp"
#include "dln/rng.hpp"
#include "dln/scan.hpp"
#include "dln/theory.hpp"
#include "dln/trainer.hpp"

namespace fs = std::filesystem;

namespace dln {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory '" + dir +
                             "': " + ec.message());
}

// ---------------------------------------------------------------------------
// gen-data

int cmd_gendata(int dx, int dy, int n, std::uint64_t seed, bool normalize,
                bool reduce, const std::string& out) {
  Dataset ds = gen_synthetic(dx, dy, n, seed);
  if (reduce) ds = reduce_wlog(ds);
  if (normalize) ds = normalize_targets(ds);
  ensure_dir(out);
  save_dataset(out, ds);
  std::printf("wrote %s: d_x=%d d_y=%d n=%d rank=%d kappa=%s stable_rank=%s\n",
              out.c_str(), ds.dx(), ds.dy(), ds.n(), ds.stats.rank,
              format_double(ds.stats.kappa, 6).c_str(),
              format_double(ds.stats.stable_rank, 6).c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainFlags {
  int depth = 4;
  int width = 32;
  std::string scheme = "orthogonal";
  std::string sigma;  // comma list, gaussian only; empty = all 1.0
  long steps = 1000;
  std::string eta = "auto";
  long record_every = 1;
  long diag_every = 0;
  double stop_rel = 0.0;
  std::string data_path;
  int dx = 64, dy = 4, n = 16;
  std::uint64_t data_seed = 1;
  bool normalize = false;
  bool save_net = false;
};

int cmd_train(const TrainFlags& f, std::uint64_t seed, const std::string& out) {
  Dataset ds = f.data_path.empty()
                   ? gen_synthetic(f.dx, f.dy, f.n, f.data_seed)
                   : load_dataset(f.data_path);
  if (f.normalize) ds = normalize_targets(ds);

  TrainConfig cfg;
  cfg.plan = DimensionPlan::uniform(f.depth, ds.dx(), ds.dy(), f.width);
  cfg.scheme.kind = init_kind_from_string(f.scheme);
  if (!f.sigma.empty()) cfg.scheme.sigma = parse_double_list(f.sigma);
  cfg.steps = f.steps;
  if (f.eta != "auto") cfg.eta = parse_double(f.eta);
  cfg.record_every = f.record_every;
  cfg.diag_every = f.diag_every;
  cfg.seed = seed;
  cfg.stop_rel_loss = f.stop_rel;

  if (cfg.scheme.kind == InitKind::gaussian &&
      !gaussian_scale_sane(cfg.plan, cfg.scheme))
    std::fprintf(stderr,
                 "warning: layer variances leave the polynomial sanity band; "
                 "output scale may be degenerate\n");

  RunRecord rec = train_run(cfg, ds);
  ensure_dir(out);
  write_run_csv(out + "/run.csv", rec);
  write_run_meta(out + "/meta", rec);
  if (f.save_net) {
    // Re-derive the final state deterministically: replay is cheaper than
    // holding every intermediate stack, and train_run owns its state.
    NetworkState net = init_weights(cfg.plan, cfg.scheme, cfg.seed);
    for (long t = 0; t < rec.final_t; ++t) {
      double l = 0.0;
      if (!gd_step(net, ds, rec.eta_used, &l)) break;
    }
    save_checkpoint(out + "/net_final", net);
  }

  double final_rel = rec.steps.empty() ? 1.0 : rec.steps.back().rel_loss;
  std::printf("run %s: steps=%ld eta=%s loss0=%s final_rel=%s status=%s\n",
              out.c_str(), rec.final_t, format_double(rec.eta_used, 6).c_str(),
              format_double(rec.loss0, 6).c_str(),
              format_double(final_rel, 6).c_str(),
              to_string(rec.status).c_str());
  return rec.status == RunStatus::diverged ? kExitDivergence : kExitOk;
}

// ---------------------------------------------------------------------------
// scan

int cmd_scan(const ScanConfig& cfg, const std::string& out) {
  cfg.validate();
  ensure_dir(out);
  Dataset ds = scan_dataset(cfg);
  std::vector<ScanRow> rows = run_scan(cfg, ds);
  write_scan_csv(out + "/scan.csv", rows);

  std::vector<long> cps = cfg.checkpoints;
  std::sort(cps.begin(), cps.end());
  cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
  for (InitKind k : {InitKind::orthogonal, InitKind::gaussian}) {
    if (std::find(cfg.schemes.begin(), cfg.schemes.end(), k) ==
        cfg.schemes.end())
      continue;
    for (long cp : cps) {
      std::string stem =
          out + "/heatmap_" + to_string(k) + "_t" + std::to_string(cp);
      emit_heatmap(rows, cfg.depths, cfg.widths, k, cp, stem + ".ppm");
    }
  }
  std::size_t diverged = 0, errors = 0;
  for (const auto& r : rows) {
    if (r.status == "diverged") ++diverged;
    if (r.status == "error") ++errors;
  }
  std::printf("scan %s: %zu rows (%zu diverged, %zu error)\n", out.c_str(),
              rows.size(), diverged, errors);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

// Central finite differences, the slow independent route to the gradient.
std::vector<Matrix> fd_gradients(const NetworkState& net, const Dataset& ds) {
  std::vector<Matrix> out;
  NetworkState probe = net;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    Matrix g(net.weights[i].rows(), net.weights[i].cols());
    for (int r = 0; r < g.rows(); ++r)
      for (int c = 0; c < g.cols(); ++c) {
        double w = net.weights[i](r, c);
        double h = 1e-5 * (1.0 + std::abs(w));
        probe.weights[i](r, c) = w + h;
        double lp = loss(probe, ds);
        probe.weights[i](r, c) = w - h;
        double lm = loss(probe, ds);
        probe.weights[i](r, c) = w;
        g(r, c) = (lp - lm) / (2.0 * h);
      }
    out.push_back(std::move(g));
  }
  return out;
}

void inject_layer_fault(NetworkState& net, std::uint64_t seed) {
  // Deterministic perturbation of Frobenius norm 0.5*sqrt(m) on one middle
  // layer, the documented adversarial fixture.
  int li = net.depth() / 2;  // 0-based index into weights
  SplitMix64 gen(mix_seed(seed, 0xFA));
  Matrix d = gaussian_matrix(int(net.weights[li].rows()),
                             int(net.weights[li].cols()), gen);
  double m = net.plan.hidden_uniform() ? net.plan.hidden_width()
                                       : net.weights[li].rows();
  net.weights[li] += (0.5 * std::sqrt(m) / d.norm()) * d;
}

struct VerifyCtx {
  std::uint64_t seed = 1;
  bool inject_fault = false;
};

TheoryReport family_ortho_init(const VerifyCtx& ctx) {
  TheoryReport rep;
  const int L = 8, m = 16, dx = 8, dy = 4;
  NetworkState net = init_weights(DimensionPlan::uniform(L, dx, dy, m),
                                  InitScheme::orthogonal(),
                                  mix_seed(ctx.seed, 0x01));
  if (ctx.inject_fault) inject_layer_fault(net, ctx.seed);
  const double tol = 1e-8 * m;
  for (int i = 1; i <= L; ++i) {
    const Matrix& W = net.weights[i - 1];
    // Tall slices have orthonormal columns, wide ones orthonormal rows.
    Matrix gram = W.rows() >= W.cols() ? Matrix(W.transpose() * W)
                                       : Matrix(W * W.transpose());
    Matrix target = double(m) * Matrix::Identity(gram.rows(), gram.cols());
    double err = (gram - target).cwiseAbs().maxCoeff();
    TheoryEntry e;
    e.name = "ortho-init-gram-" + std::to_string(i);
    e.bound = tol;
    e.observed = err;
    e.tol = tol;
    e.verdict = err <= tol ? "pass" : "fail";
    rep.add(std::move(e));
  }
  return rep;
}

TheoryReport family_isometry(const VerifyCtx& ctx) {
  TheoryReport rep;
  const int L = 32, m = 16, dx = 8, dy = 4;
  NetworkState net = init_weights(DimensionPlan::uniform(L, dx, dy, m),
                                  InitScheme::orthogonal(),
                                  mix_seed(ctx.seed, 0x02));
  if (ctx.inject_fault) inject_layer_fault(net, ctx.seed);
  auto pairs = diag_pairs(L);
  const double logm = std::log(double(m));
  for (auto [i, j] : pairs) {
    auto [lmax, lmin] = log_sigma_extremes(net, i, j);
    double ref = 0.5 * (j - i + 1) * logm;
    double tol = 1e-6 * std::max(1.0, std::abs(ref));
    TheoryEntry e;
    e.name = "isometry-init(" + std::to_string(i) + "," + std::to_string(j) +
             ")";
    e.bound = tol;
    e.observed = std::max(std::abs(lmax - ref), std::abs(lmin - ref));
    e.tol = tol;
    e.verdict = e.observed <= tol ? "pass" : "fail";
    e.note = "log-sigma spread about the exact isometry level";
    rep.add(std::move(e));
  }
  return rep;
}

TheoryReport family_grad_check(const VerifyCtx& ctx) {
  TheoryReport rep;
  SplitMix64 pick(mix_seed(ctx.seed, 0x03));
  double worst = 0.0;
  std::string worst_cfg = "-";
  for (int trial = 0; trial < 20; ++trial) {
    int L = 1 + int(pick.next() % 5);
    int dx = 2 + int(pick.next() % 4);
    int dy = 1 + int(pick.next() % 4);  // dims capped at 5
    int n = 2 + int(pick.next() % 4);
    InitKind kind =
        trial % 2 == 0 ? InitKind::orthogonal : InitKind::gaussian;
    DimensionPlan plan;
    if (kind == InitKind::orthogonal) {
      // dims are capped at 5, so min(m, 5) never undercuts max(dx, dy)
      int m = std::max({dx, dy, 2 + int(pick.next() % 4)});
      plan = DimensionPlan::uniform(L, dx, dy, std::min(m, 5));
    } else {
      std::vector<int> dims{dx};
      for (int i = 1; i < L; ++i) dims.push_back(2 + int(pick.next() % 4));
      dims.push_back(dy);
      plan.dims = dims;
    }
    Dataset ds = gen_synthetic(dx, dy, n, mix_seed(ctx.seed, 0x30 + trial));
    NetworkState net =
        init_weights(plan, InitScheme{kind, {}}, mix_seed(ctx.seed, trial));
    auto analytic = gradients(net, ds);
    auto fd = fd_gradients(net, ds);
    double num = 0.0, den = 0.0;
    for (std::size_t li = 0; li < analytic.size(); ++li) {
      num += (analytic[li] - fd[li]).squaredNorm();
      den += fd[li].squaredNorm();
    }
    double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
    if (rel > worst) {
      worst = rel;
      worst_cfg = "L=" + std::to_string(L) + " " + to_string(kind);
    }
  }
  TheoryEntry e;
  e.name = "grad-check-fd";
  e.bound = 1e-6;
  e.observed = worst;
  e.tol = 1e-6;
  e.verdict = worst < 1e-6 ? "pass" : "fail";
  e.note = "worst of 20 random configs (" + worst_cfg + ")";
  rep.add(std::move(e));
  return rep;
}

TheoryReport family_p_spectrum(const VerifyCtx& ctx) {
  TheoryReport rep;
  const int dx = 6, n = 6, dy = 2, L = 4, m = 8;
  Dataset ds = gen_synthetic(dx, dy, n, mix_seed(ctx.seed, 0x04));
  NetworkState net = init_weights(DimensionPlan::uniform(L, dx, dy, m),
                                  InitScheme::orthogonal(),
                                  mix_seed(ctx.seed, 0x05));
  Matrix P = build_step_operator(net, ds.X);
  std::vector<double> got = sym_eigvals(P);
  std::vector<double> want;
  for (double lam : sym_eigvals(ds.X.transpose() * ds.X))
    for (int k = 0; k < dy; ++k) want.push_back(double(L) / dy * lam);
  std::sort(want.begin(), want.end(), std::greater<>());
  double worst = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i)
    worst = std::max(worst, std::abs(got[i] - want[i]) /
                                std::max(std::abs(want[0]), 1e-300));
  TheoryEntry e;
  e.name = "p-spectrum-init";
  e.bound = 1e-8;
  e.observed = worst;
  e.tol = 1e-8;
  e.verdict = worst < 1e-8 ? "pass" : "fail";
  e.note = "operator eigenvalues vs (L/d_y) * spec(X^T X) with multiplicity";
  rep.add(std::move(e));
  return rep;
}

TheoryReport family_dynamics(const VerifyCtx& ctx) {
  TheoryReport rep;
  // n <= dx keeps X^T X full rank; otherwise lambda_min(P) = 0 structurally
  // and the high-order bound is vacuous.
  const int dx = 6, dy = 2, n = 4, L = 3, m = 6;
  Dataset ds = gen_synthetic(dx, dy, n, mix_seed(ctx.seed, 0x06));
  NetworkState net = init_weights(DimensionPlan::uniform(L, dx, dy, m),
                                  InitScheme::orthogonal(),
                                  mix_seed(ctx.seed, 0x07));
  double eta = contraction_lr(ds.stats, L, dy) / 50.0;
  for (int t = 0; t < 10; ++t) {
    NetworkState before = net;
    double l = 0.0;
    if (!gd_step(net, ds, eta, &l))
      throw std::runtime_error("dynamics family: unexpected divergence");
    ResidualResult rr = linearization_residual(before, net, ds, eta);
    for (auto& e : rr.report.entries) {
      e.name = "dynamics-t" + std::to_string(t) + "-" + e.name;
      rep.add(e);
    }
  }
  return rep;
}

TheoryReport family_trajectory(const VerifyCtx& ctx) {
  TheoryReport rep;
  const int dx = 16, dy = 4, n = 16, L = 16, m = 64;
  Dataset ds = gen_synthetic(dx, dy, n, mix_seed(ctx.seed, 0x08));

  TrainConfig cfg;
  cfg.plan = DimensionPlan::uniform(L, dx, dy, m);
  cfg.scheme = InitScheme::orthogonal();
  cfg.steps = 2000;
  cfg.record_every = 50;
  cfg.diag_every = 0;  // spectra probed once at the end, below
  cfg.seed = mix_seed(ctx.seed, 0x09);

  NetworkState net0 = init_weights(cfg.plan, cfg.scheme, cfg.seed);
  RunRecord rec = train_run(cfg, ds);

  double factor = contraction_factor(ds.stats, L, dy, rec.eta_used);
  double worst_gap = -1e300;
  for (const auto& s : rec.steps) {
    double bound =
        contraction_bound_curve(rec.loss0, rec.loss_opt, factor, s.t);
    worst_gap = std::max(worst_gap, s.loss - bound);
  }
  {
    TheoryEntry e;
    e.name = "trajectory-bound-curve";
    e.bound = 0.0;
    e.observed = worst_gap;
    e.tol = 1e-9 * rec.loss0;
    e.verdict = worst_gap <= e.tol ? "pass" : "fail";
    e.probabilistic = true;
    e.note = "max over recorded steps of loss(t) minus the contraction curve";
    rep.add(std::move(e));
  }
  {
    double final_rel = rec.steps.empty() ? 1.0 : rec.steps.back().rel_loss;
    TheoryEntry e;
    e.name = "trajectory-final-rel-loss";
    e.bound = 1e-3;
    e.observed = final_rel;
    e.tol = 1e-3;
    e.verdict =
        rec.status == RunStatus::ok && final_rel < 1e-3 ? "pass" : "fail";
    e.probabilistic = true;
    rep.add(std::move(e));
  }

  // Final state: replay to get the weights (train_run reports, it does not
  // hand back the stack).
  NetworkState net = init_weights(cfg.plan, cfg.scheme, cfg.seed);
  for (long t = 0; t < rec.final_t; ++t) {
    double l = 0.0;
    if (!gd_step(net, ds, rec.eta_used, &l)) break;
  }
  rep.merge(check_isometry_window(net, diag_pairs(L)));
  double B = init_loss_bound(ds.stats, dy, 0.1);
  rep.merge(check_drift_radius(net0, net, ds.stats, B));
  return rep;
}

TheoryReport family_decay(const VerifyCtx& ctx) {
  TheoryReport rep;
  std::vector<int> dims(65, 4);  // 64 layers of width 4
  DecayStats st = product_decay_mc(dims, 1.0, 100, mix_seed(ctx.seed, 0x0a));
  const std::vector<int> probe{8, 16, 32, 64};
  bool decreasing = true;
  double prev = 1e300;
  for (int d : probe) {
    double v = st.median_log_norm[d - 1];
    if (v >= prev) decreasing = false;
    prev = v;
  }
  {
    TheoryEntry e;
    e.name = "decay-median-monotone";
    e.bound = 0.0;
    e.observed = st.slope;
    e.tol = 0.0;
    e.verdict = decreasing && st.slope < 0.0 ? "pass" : "fail";
    e.probabilistic = true;
    e.note = "median log|A_{L:1}| strictly decreasing over depths 8..64";
    rep.add(std::move(e));
  }
  {
    double exact = sqrt_chi2_moment_exact(1);
    double ref = std::sqrt(2.0 / M_PI);
    TheoryEntry e;
    e.name = "decay-chi-moment-exact";
    e.bound = ref;
    e.observed = exact;
    e.tol = 1e-12;
    e.verdict = std::abs(exact - ref) < 1e-12 ? "pass" : "fail";
    e.note = "closed form at d=1 equals sqrt(2/pi)";
    rep.add(std::move(e));
  }
  {
    double exact = sqrt_chi2_moment_exact(1);
    double mc = sqrt_chi2_moment_mc(1, 100000, mix_seed(ctx.seed, 0x0b));
    TheoryEntry e;
    e.name = "decay-chi-moment-mc";
    e.bound = exact;
    e.observed = mc;
    e.tol = 0.01 * exact;
    e.verdict = std::abs(mc - exact) <= e.tol ? "pass" : "fail";
    e.probabilistic = true;
    e.note = "1e5-draw Monte Carlo vs closed form, 1%";
    rep.add(std::move(e));
  }
  return rep;
}

TheoryReport family_stuck(const VerifyCtx& ctx) {
  Dataset ds = normalize_targets(
      gen_synthetic(64, 4, 16, mix_seed(ctx.seed, 0x0c)));
  TrainConfig cfg;
  cfg.plan = DimensionPlan::uniform(100, ds.dx(), ds.dy(), 10);
  cfg.scheme = InitScheme::gaussian();
  cfg.steps = 5000;
  cfg.record_every = 100;
  cfg.diag_every = 500;
  cfg.seed = mix_seed(ctx.seed, 0x0d);
  RunRecord rec = train_run(cfg, ds);
  return stuck_window_check(rec, ds);
}

int cmd_verify(std::uint64_t seed, const std::string& out,
               const std::string& only, bool inject_fault) {
  using Family = std::pair<std::string, TheoryReport (*)(const VerifyCtx&)>;
  const std::vector<Family> families{
      {"ortho-init", family_ortho_init}, {"isometry", family_isometry},
      {"grad-check", family_grad_check}, {"p-spectrum", family_p_spectrum},
      {"dynamics", family_dynamics},     {"trajectory", family_trajectory},
      {"decay", family_decay},           {"stuck", family_stuck},
  };
  if (!only.empty() &&
      std::none_of(families.begin(), families.end(),
                   [&](const Family& f) { return f.first == only; })) {
    std::fprintf(stderr, "verify: unknown family '%s'; known:", only.c_str());
    for (const auto& f : families) std::fprintf(stderr, " %s", f.first.c_str());
    std::fprintf(stderr, "\n");
    return kExitUsage;
  }

  VerifyCtx ctx;
  ctx.seed = seed;
  ctx.inject_fault = inject_fault;

  TheoryReport rep;
  for (const auto& [name, fn] : families) {
    if (!only.empty() && name != only) continue;
    std::printf("verify: %s\n", name.c_str());
    std::fflush(stdout);
    rep.merge(fn(ctx));
  }

  ensure_dir(out);
  write_report_csv(out + "/report.csv", rep);
  std::string summary = report_summary(rep);
  {
    std::FILE* f = std::fopen((out + "/summary.txt").c_str(), "wb");
    if (!f) throw std::runtime_error("verify: cannot write summary");
    std::fwrite(summary.data(), 1, summary.size(), f);
    std::fclose(f);
  }
  std::fputs(summary.c_str(), stdout);

  bool ok = rep.hard_pass();
  if (!ok) {
    std::printf("FAILED hard checks:\n");
    for (const auto& e : rep.entries)
      if (e.verdict == "fail" && !e.probabilistic)
        std::printf("  %s observed=%s bound=%s\n", e.name.c_str(),
                    format_double(e.observed, 6).c_str(),
                    format_double(e.bound, 6).c_str());
  }
  return ok ? kExitOk : kExitCheckFailure;
}

std::string find_config_arg(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"deep linear network training and verification lab"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  std::string out;
  int jobs = 1;
  std::string config_path;
  app.add_option("--seed", seed, "master RNG seed");
  app.add_option("--out", out, "output directory");
  app.add_option("--jobs", jobs, "worker threads for grid scans");
  app.add_option("--config", config_path,
                 "key=value config file (scan; flags override)");

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->fallthrough();
  int g_dx = 64, g_dy = 4, g_n = 16;
  bool g_norm = false, g_reduce = false;
  gen->add_option("--dx", g_dx, "input dimension");
  gen->add_option("--dy", g_dy, "output dimension");
  gen->add_option("--n", g_n, "sample count");
  gen->add_flag("--normalize", g_norm, "rescale targets to unit Frobenius norm");
  gen->add_flag("--reduce", g_reduce, "compress X to its rank (SVD change of basis)");

  auto* tr = app.add_subcommand("train", "run full-batch gradient descent");
  tr->fallthrough();
  TrainFlags tf;
  tr->add_option("--depth", tf.depth, "number of layers L");
  tr->add_option("--width", tf.width, "hidden width m");
  tr->add_option("--scheme", tf.scheme, "orthogonal | gaussian");
  tr->add_option("--sigma", tf.sigma, "per-layer stddevs, comma list (gaussian)");
  tr->add_option("--steps", tf.steps, "gradient steps");
  tr->add_option("--eta", tf.eta, "learning rate, or 'auto'");
  tr->add_option("--record-every", tf.record_every, "loss row cadence");
  tr->add_option("--diag-every", tf.diag_every, "drift/spectra cadence (0=off)");
  tr->add_option("--stop-rel", tf.stop_rel, "early stop at this rel loss (0=off)");
  tr->add_option("--data", tf.data_path, "dataset directory (else synthetic)");
  tr->add_option("--dx", tf.dx, "synthetic input dimension");
  tr->add_option("--dy", tf.dy, "synthetic output dimension");
  tr->add_option("--n", tf.n, "synthetic sample count");
  tr->add_option("--data-seed", tf.data_seed, "synthetic dataset seed");
  tr->add_flag("--normalize", tf.normalize, "rescale targets to unit Frobenius norm");
  tr->add_flag("--save-net", tf.save_net, "write the final weight stack");

  auto* sc = app.add_subcommand("scan", "depth x width trainability grid");
  sc->fallthrough();
  std::string s_depths, s_widths, s_schemes, s_checkpoints, s_eta;
  ScanConfig scfg;
  scfg.depths = {8, 16, 32, 64, 128};
  scfg.widths = {4, 8, 16, 32, 64, 128, 256};
  sc->add_option("--depths", s_depths, "comma list of depths");
  sc->add_option("--widths", s_widths, "comma list of widths");
  sc->add_option("--schemes", s_schemes, "comma list: orthogonal,gaussian");
  sc->add_option("--trials", scfg.trials, "trials per cell");
  sc->add_option("--steps", scfg.steps, "steps per cell (0 = max checkpoint)");
  sc->add_option("--checkpoints", s_checkpoints, "comma list of step indices");
  sc->add_option("--eta", s_eta, "learning rate, or 'auto'");
  sc->add_option("--dx", scfg.data_dx, "synthetic input dimension");
  sc->add_option("--dy", scfg.data_dy, "synthetic output dimension");
  sc->add_option("--n", scfg.data_n, "synthetic sample count");
  sc->add_option("--data-seed", scfg.data_seed, "synthetic dataset seed");
  bool s_norm = false;
  sc->add_flag("--normalize", s_norm, "rescale targets to unit Frobenius norm");
  sc->add_option("--data", scfg.data_path, "dataset directory (else synthetic)");

  auto* ver = app.add_subcommand("verify", "run the invariant check suites");
  ver->fallthrough();
  std::string v_only;
  bool v_fault = false;
  ver->add_option("--only", v_only,
                  "single family: ortho-init isometry grad-check p-spectrum "
                  "dynamics trajectory decay stuck");
  ver->add_flag("--inject-fault", v_fault,
                "perturb one layer first; the suite must catch it");

  try {
    // The config file seeds scan defaults before flags are parsed, so flags
    // override the file.
    std::string pre_config = find_config_arg(args);
    if (!pre_config.empty()) apply_config_file(scfg, pre_config);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);

    if (*gen) {
      if (g_dx < 1 || g_dy < 1 || g_n < 1) {
        std::fprintf(stderr, "gen-data: dimensions must be >= 1\n");
        return kExitUsage;
      }
      return cmd_gendata(g_dx, g_dy, g_n, seed, g_norm, g_reduce,
                         out.empty() ? "data_out" : out);
    }
    if (*tr) {
      return cmd_train(tf, seed, out.empty() ? "run_out" : out);
    }
    if (*sc) {
      if (!s_depths.empty()) scfg.depths = parse_int_list(s_depths);
      if (!s_widths.empty()) scfg.widths = parse_int_list(s_widths);
      if (!s_checkpoints.empty())
        scfg.checkpoints = parse_long_list(s_checkpoints);
      if (!s_schemes.empty()) {
        scfg.schemes.clear();
        for (const auto& tok : [&] {
               std::vector<std::string> toks;
               std::string cur;
               for (char c : s_schemes) {
                 if (c == ',') {
                   toks.push_back(cur);
                   cur.clear();
                 } else if (!std::isspace(static_cast<unsigned char>(c))) {
                   cur.push_back(c);
                 }
               }
               toks.push_back(cur);
               return toks;
             }())
          scfg.schemes.push_back(init_kind_from_string(tok));
      }
      if (!s_eta.empty()) {
        if (s_eta == "auto") {
          scfg.eta_auto = true;
        } else {
          scfg.eta_auto = false;
          scfg.eta_fixed = parse_double(s_eta);
        }
      }
      if (s_norm) scfg.data_normalize = true;
      if (app.count("--seed") > 0) scfg.master_seed = seed;
      if (app.count("--jobs") > 0) scfg.jobs = jobs;
      return cmd_scan(scfg, out.empty() ? "scan_out" : out);
    }
    if (*ver) {
      return cmd_verify(seed, out.empty() ? "verify_out" : out, v_only,
                        v_fault);
    }
    return kExitUsage;
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
}

}  // namespace dln
