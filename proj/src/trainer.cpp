#include "dln/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace dln {

std::string to_string(RunStatus s) {
  return s == RunStatus::ok ? "ok" : "diverged";
}

double contraction_lr(const DataStats& stats, int L, int d_y) {
  if (L < 1 || d_y < 1)
    throw std::invalid_argument("contraction_lr: L and d_y must be >= 1");
  return double(d_y) / (2.0 * double(L) * stats.norm_x * stats.norm_x);
}

bool gd_step(NetworkState& net, const Dataset& ds, double eta,
             double* loss_out) {
  if (!(eta > 0.0)) throw std::invalid_argument("gd_step: eta must be > 0");
  ProductCache cache = build_cache(net, ds.X);
  Matrix u = std::exp(net.log_gamma()) * cache.prefix[net.depth()];
  if (loss_out) *loss_out = 0.5 * (u - ds.Y).squaredNorm();
  auto grads = gradients(net, ds, cache, u);
  for (const Matrix& g : grads)
    if (!g.allFinite()) return false;
  for (int i = 0; i < net.depth(); ++i)
    net.weights[i].noalias() -= eta * grads[i];
  net.step += 1;
  return true;
}

std::vector<std::pair<int, int>> diag_pairs(int L) {
  // Pattern {(1,i), (i,L), (i, i+ceil(L/4))} over a short spread of anchors;
  // (1,L) is excluded because the end-to-end product is never an isometry.
  const int quarter = (L + 3) / 4;
  std::set<int> anchors;
  for (int i : {2, 1 + quarter, (L + 1) / 2, L - quarter, L - 1})
    if (i >= 1 && i <= L) anchors.insert(i);
  std::set<std::pair<int, int>> pairs;
  for (int i : anchors) {
    if (i < L) pairs.insert({1, i});
    if (i > 1) pairs.insert({i, L});
    int j = std::min(L, i + quarter);
    if (j >= i && !(i == 1 && j == L)) pairs.insert({i, j});
  }
  pairs.erase({1, L});
  std::vector<std::pair<int, int>> out(pairs.begin(), pairs.end());
  if (out.size() > 12) out.resize(12);
  return out;
}

namespace {

StepRecord make_record(long t, double l, double loss0) {
  StepRecord r;
  r.t = t;
  r.loss = l;
  r.rel_loss = loss0 > 0.0 ? l / loss0 : (l > 0.0 ? HUGE_VAL : 1.0);
  return r;
}

void add_diagnostics(StepRecord& rec, const NetworkState& net,
                     const NetworkState& net0,
                     const std::vector<std::pair<int, int>>& pairs) {
  double drift = 0.0;
  for (int i = 0; i < net.depth(); ++i)
    drift = std::max(drift, (net.weights[i] - net0.weights[i]).norm());
  rec.max_drift = drift;
  // The isometry reference ((j-i+1)/2) log m only parses for uniform widths.
  if (pairs.empty() || !net.plan.hidden_uniform()) return;
  const double log_m = std::log(double(net.plan.hidden_width()));
  double worst_max = -HUGE_VAL, worst_min = HUGE_VAL;
  for (auto [i, j] : pairs) {
    auto [lmax, lmin] = log_sigma_extremes(net, i, j);
    const double ref = 0.5 * (j - i + 1) * log_m;
    worst_max = std::max(worst_max, lmax - ref);
    worst_min = std::min(worst_min, lmin - ref);
  }
  rec.logsig_max_gap = worst_max;
  rec.logsig_min_gap = worst_min;
}

}  // namespace

RunRecord train_run(const TrainConfig& cfg, const Dataset& ds) {
  if (cfg.steps < 0) throw std::invalid_argument("train_run: steps < 0");
  if (cfg.eta && !(*cfg.eta > 0.0))
    throw std::invalid_argument("train_run: explicit eta must be > 0");

  RunRecord rec;
  rec.cfg = cfg;
  rec.stats = ds.stats;
  rec.eta_used =
      cfg.eta ? *cfg.eta : contraction_lr(ds.stats, cfg.plan.depth(), ds.dy());
  rec.loss_opt = least_squares_opt(ds).second;

  NetworkState net = init_weights(cfg.plan, cfg.scheme, cfg.seed);
  const NetworkState net0 = net;
  const auto pairs = diag_pairs(net.depth());

  const double loss0 = loss(net, ds);
  rec.loss0 = loss0;

  auto wants_row = [&](long t) {
    if (t == 0 || t == cfg.steps) return true;
    bool rec_row = cfg.record_every > 0 && t % cfg.record_every == 0;
    bool diag_row = cfg.diag_every > 0 && t % cfg.diag_every == 0;
    return rec_row || diag_row;
  };
  auto wants_diag = [&](long t) {
    if (cfg.diag_every <= 0) return false;
    return t % cfg.diag_every == 0 || t == 0 || t == cfg.steps;
  };
  auto push_row = [&](long t, double l) {
    StepRecord r = make_record(t, l, loss0);
    if (wants_diag(t)) add_diagnostics(r, net, net0, pairs);
    rec.steps.push_back(std::move(r));
  };

  const double divergence_cap = 1e12 * std::max(loss0, 1e-300);
  double current = loss0;
  long t = 0;
  if (wants_row(0)) push_row(0, current);

  while (t < cfg.steps) {
    double step_loss = 0.0;
    const bool finite = gd_step(net, ds, rec.eta_used, &step_loss);
    // step_loss is the loss at time t (pre-update); identical to `current`.
    (void)step_loss;
    ++t;
    current = loss(net, ds);
    if (!finite || !std::isfinite(current) || current > divergence_cap) {
      rec.status = RunStatus::diverged;
      push_row(t, current);
      break;
    }
    if (cfg.stop_rel_loss > 0.0 && loss0 > 0.0 &&
        current / loss0 <= cfg.stop_rel_loss) {
      rec.early_stopped = true;
      push_row(t, current);
      break;
    }
    if (wants_row(t)) push_row(t, current);
  }
  rec.final_t = t;
  return rec;
}

void write_run_csv(const std::string& path, const RunRecord& rec) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_run_csv: cannot open " + path);
  f << "t,loss,rel_loss,max_drift,logsig_max_gap,logsig_min_gap\n";
  for (const auto& s : rec.steps) {
    f << s.t << ',' << format_double(s.loss) << ','
      << format_double(s.rel_loss) << ',';
    if (s.max_drift) f << format_double(*s.max_drift);
    f << ',';
    if (s.logsig_max_gap) f << format_double(*s.logsig_max_gap);
    f << ',';
    if (s.logsig_min_gap) f << format_double(*s.logsig_min_gap);
    f << '\n';
  }
}

void write_run_meta(const std::string& path, const RunRecord& rec) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_run_meta: cannot open " + path);
  f << "depth=" << rec.cfg.plan.depth() << '\n';
  f << "dims=";
  for (std::size_t i = 0; i < rec.cfg.plan.dims.size(); ++i)
    f << (i ? "," : "") << rec.cfg.plan.dims[i];
  f << '\n';
  f << "scheme=" << to_string(rec.cfg.scheme.kind) << '\n';
  f << "steps=" << rec.cfg.steps << '\n';
  f << "seed=" << rec.cfg.seed << '\n';
  f << "record_every=" << rec.cfg.record_every << '\n';
  f << "diag_every=" << rec.cfg.diag_every << '\n';
  f << "eta=" << format_double(rec.eta_used) << '\n';
  f << "loss0=" << format_double(rec.loss0) << '\n';
  f << "loss_opt=" << format_double(rec.loss_opt) << '\n';
  f << "status=" << to_string(rec.status) << '\n';
  f << "early_stopped=" << (rec.early_stopped ? 1 : 0) << '\n';
  f << "final_t=" << rec.final_t << '\n';
  f << "data_rank=" << rec.stats.rank << '\n';
  f << "data_kappa=" << format_double(rec.stats.kappa) << '\n';
  f << "data_stable_rank=" << format_double(rec.stats.stable_rank) << '\n';
  f << "data_norm_x=" << format_double(rec.stats.norm_x) << '\n';
  f << "data_frob_x=" << format_double(rec.stats.frob_x) << '\n';
  f << "data_sigma_min_x=" << format_double(rec.stats.sigma_min_x) << '\n';
  if (rec.stats.norm_wstar)
    f << "data_norm_wstar=" << format_double(*rec.stats.norm_wstar) << '\n';
}

}  // namespace dln
