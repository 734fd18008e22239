#include "dln/scan.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>

#include "dln/kvfile.hpp"
#include "dln/rng.hpp"
#include "dln/trainer.hpp"

namespace dln {

namespace {

struct CellKey {
  int depth;
  int width;
  InitKind scheme;
  int trial;
};

int scheme_id(InitKind k) { return k == InitKind::orthogonal ? 1 : 2; }

// Split "a,b,c" respecting that values never contain commas themselves.
std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

void ScanConfig::validate() const {
  if (depths.empty() || widths.empty())
    throw std::invalid_argument("scan: depths and widths must be nonempty");
  for (int d : depths)
    if (d < 1) throw std::invalid_argument("scan: depths must be >= 1");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("scan: widths must be >= 1");
  if (schemes.empty())
    throw std::invalid_argument("scan: at least one scheme required");
  if (trials < 1) throw std::invalid_argument("scan: trials must be >= 1");
  if (steps < 0) throw std::invalid_argument("scan: steps must be >= 0");
  if (checkpoints.empty())
    throw std::invalid_argument("scan: checkpoints must be nonempty");
  long max_cp = *std::max_element(checkpoints.begin(), checkpoints.end());
  long min_cp = *std::min_element(checkpoints.begin(), checkpoints.end());
  if (min_cp < 0) throw std::invalid_argument("scan: checkpoints must be >= 0");
  if (steps > 0 && max_cp > steps)
    throw std::invalid_argument("scan: checkpoints must lie within [0, steps]");
  if (!eta_auto && !(eta_fixed > 0.0))
    throw std::invalid_argument("scan: fixed eta must be > 0");
  if (jobs < 1) throw std::invalid_argument("scan: jobs must be >= 1");
  if (data_path.empty() && (data_dx < 1 || data_dy < 1 || data_n < 1))
    throw std::invalid_argument("scan: dataset dimensions must be >= 1");
}

std::uint64_t cell_seed(std::uint64_t master, int depth, int width,
                        InitKind scheme, int trial) {
  std::uint64_t s = mix_seed(master, std::uint64_t(depth));
  s = mix_seed(s, std::uint64_t(width));
  s = mix_seed(s, std::uint64_t(scheme_id(scheme)));
  s = mix_seed(s, std::uint64_t(trial));
  return s;
}

Dataset scan_dataset(const ScanConfig& cfg) {
  Dataset ds = cfg.data_path.empty()
                   ? gen_synthetic(cfg.data_dx, cfg.data_dy, cfg.data_n,
                                   cfg.data_seed)
                   : load_dataset(cfg.data_path);
  if (cfg.data_normalize) ds = normalize_targets(ds);
  return ds;
}

std::vector<ScanRow> run_scan(const ScanConfig& cfg, const Dataset& ds) {
  cfg.validate();
  const std::vector<int> depths = sorted_unique(cfg.depths);
  const std::vector<int> widths = sorted_unique(cfg.widths);
  std::vector<InitKind> schemes;
  for (InitKind k : {InitKind::orthogonal, InitKind::gaussian})
    if (std::find(cfg.schemes.begin(), cfg.schemes.end(), k) !=
        cfg.schemes.end())
      schemes.push_back(k);
  std::vector<long> checkpoints = cfg.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()),
                    checkpoints.end());
  const long total_steps = cfg.steps > 0 ? cfg.steps : checkpoints.back();

  // Canonical cell order: it defines both the work queue and the row order.
  std::vector<CellKey> cells;
  for (int d : depths)
    for (int w : widths)
      for (InitKind s : schemes)
        for (int trial = 0; trial < cfg.trials; ++trial)
          cells.push_back({d, w, s, trial});

  {
    std::set<std::uint64_t> seen;
    for (const auto& c : cells)
      if (!seen.insert(cell_seed(cfg.master_seed, c.depth, c.width, c.scheme,
                                 c.trial))
               .second)
        throw std::runtime_error("run_scan: per-cell seed collision");
  }

  std::vector<std::vector<ScanRow>> results(cells.size());

  auto run_cell = [&](const CellKey& key) {
    std::vector<ScanRow> rows;
    rows.reserve(checkpoints.size());
    const double eta =
        cfg.eta_auto ? contraction_lr(ds.stats, key.depth, ds.dy())
                     : cfg.eta_fixed;
    auto emit_all = [&](const char* status) {
      for (long c : checkpoints) {
        ScanRow r{key.depth, key.width,  key.scheme,
                  key.trial, eta,        c,
                  std::numeric_limits<double>::quiet_NaN(), status};
        rows.push_back(std::move(r));
      }
    };
    try {
      DimensionPlan plan =
          DimensionPlan::uniform(key.depth, ds.dx(), ds.dy(), key.width);
      InitScheme scheme{key.scheme, {}};
      NetworkState net = init_weights(
          plan, scheme,
          cell_seed(cfg.master_seed, key.depth, key.width, key.scheme,
                    key.trial));
      std::map<long, double> losses;  // checkpoint -> loss value
      double loss0 = loss(net, ds);
      if (!(loss0 > 0.0) || !std::isfinite(loss0)) {
        emit_all("error");
        return rows;
      }
      const double cap = 1e12 * loss0;
      bool diverged = false;
      auto want = [&](long t) {
        return std::binary_search(checkpoints.begin(), checkpoints.end(), t);
      };
      if (want(0)) losses[0] = loss0;
      for (long t = 0; t < total_steps; ++t) {
        double l = 0.0;  // loss at time t, free byproduct of the update
        bool ok = gd_step(net, ds, eta, &l);
        if (!ok || !std::isfinite(l) || l > cap) {
          diverged = true;
          break;
        }
        long now = t + 1;
        if (want(now)) {
          double lnow = loss(net, ds);
          if (!std::isfinite(lnow) || lnow > cap) {
            diverged = true;
            break;
          }
          losses[now] = lnow;
        }
      }
      for (long c : checkpoints) {
        auto it = losses.find(c);
        ScanRow r;
        r.depth = key.depth;
        r.width = key.width;
        r.scheme = key.scheme;
        r.trial = key.trial;
        r.eta = eta;
        r.checkpoint = c;
        if (it != losses.end()) {
          // loss can underflow to exactly 0 after long converged stretches;
          // clamp to a finite sentinel well past anything physical.
          r.rel_loss_log10 =
              it->second > 0.0 ? std::log10(it->second / loss0) : -350.0;
          r.status = "ok";
        } else {
          r.rel_loss_log10 = std::numeric_limits<double>::quiet_NaN();
          r.status = diverged ? "diverged" : "error";
        }
        rows.push_back(std::move(r));
      }
    } catch (const std::exception&) {
      rows.clear();
      emit_all("error");
    }
    return rows;
  };

  const int jobs = std::min(cfg.jobs, 64);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      results[i] = run_cell(cells[i]);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= cells.size()) return;
        results[i] = run_cell(cells[i]);
      }
    };
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<ScanRow> rows;
  rows.reserve(cells.size() * checkpoints.size());
  for (auto& cell_rows : results)
    for (auto& r : cell_rows) rows.push_back(std::move(r));
  return rows;
}

void write_scan_csv(const std::string& path, const std::vector<ScanRow>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_scan_csv: cannot open " + path);
  f << "depth,width,scheme,trial,eta,checkpoint,rel_loss_log10,status\n";
  for (const auto& r : rows) {
    f << r.depth << ',' << r.width << ',' << to_string(r.scheme) << ','
      << r.trial << ',' << format_double(r.eta, 10) << ',' << r.checkpoint
      << ',' << format_double(r.rel_loss_log10, 10) << ',' << r.status << '\n';
  }
  if (!f) throw std::runtime_error("write_scan_csv: short write");
}

std::vector<ScanRow> read_scan_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_scan_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) ||
      line != "depth,width,scheme,trial,eta,checkpoint,rel_loss_log10,status")
    throw std::runtime_error("read_scan_csv: bad header in " + path);
  std::vector<ScanRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto parts = split_line(line);
    if (parts.size() != 8)
      throw std::runtime_error("read_scan_csv: malformed row '" + line + "'");
    ScanRow r;
    r.depth = int(parse_long(parts[0]));
    r.width = int(parse_long(parts[1]));
    r.scheme = init_kind_from_string(parts[2]);
    r.trial = int(parse_long(parts[3]));
    r.eta = parse_double(parts[4]);
    r.checkpoint = parse_long(parts[5]);
    r.rel_loss_log10 = parse_double(parts[6]);
    r.status = parts[7];
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit_heatmap(const std::vector<ScanRow>& rows,
                  const std::vector<int>& depths, const std::vector<int>& widths,
                  InitKind scheme, long checkpoint, const std::string& path) {
  if (rows.empty()) throw std::invalid_argument("emit_heatmap: no rows");
  const std::vector<int> ds = sorted_unique(depths);
  const std::vector<int> ws = sorted_unique(widths);

  auto median_for = [&](int depth, int width, bool* present) {
    std::vector<double> vals;
    for (const auto& r : rows) {
      if (r.depth != depth || r.width != width || r.scheme != scheme ||
          r.checkpoint != checkpoint)
        continue;
      if (r.status == "ok")
        vals.push_back(r.rel_loss_log10);
      else if (r.status == "diverged")
        vals.push_back(std::numeric_limits<double>::infinity());
      // "error" trials carry no value at all
    }
    if (vals.empty()) {
      *present = false;
      return 0.0;
    }
    *present = true;
    std::sort(vals.begin(), vals.end());
    return (vals[(vals.size() - 1) / 2] + vals[vals.size() / 2]) / 2.0;
  };

  std::ofstream img(path, std::ios::binary);
  if (!img) throw std::runtime_error("emit_heatmap: cannot open " + path);
  img << "P6\n" << ws.size() << ' ' << ds.size() << "\n255\n";

  std::string csv_path = path;
  if (csv_path.size() > 4 && csv_path.substr(csv_path.size() - 4) == ".ppm")
    csv_path = csv_path.substr(0, csv_path.size() - 4) + ".csv";
  else
    csv_path += ".csv";
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw std::runtime_error("emit_heatmap: cannot open " + csv_path);
  csv << "depth,width,median_rel_loss_log10\n";

  for (int depth : ds) {
    for (int width : ws) {
      bool present = false;
      double med = median_for(depth, width, &present);
      unsigned char px[3];
      if (!present) {
        px[0] = 255;
        px[1] = 0;
        px[2] = 0;  // pure red marks a cell with no usable trial
        csv << depth << ',' << width << ",nan\n";
      } else {
        double v = std::min(0.0, std::max(-6.0, med));
        // [-6, 0] -> [0, 255], round half up; darker = smaller loss
        int g = int(std::floor((v + 6.0) / 6.0 * 255.0 + 0.5));
        g = std::min(255, std::max(0, g));
        px[0] = px[1] = px[2] = static_cast<unsigned char>(g);
        csv << depth << ',' << width << ',' << format_double(med, 10) << '\n';
      }
      img.write(reinterpret_cast<const char*>(px), 3);
    }
  }
  if (!img || !csv) throw std::runtime_error("emit_heatmap: short write");
}

void apply_config_file(ScanConfig& cfg, const std::string& path) {
  auto kv = read_kv_file(path);
  for (const auto& [key, val] : kv) {
    if (key == "depths") {
      cfg.depths = parse_int_list(val);
    } else if (key == "widths") {
      cfg.widths = parse_int_list(val);
    } else if (key == "schemes") {
      cfg.schemes.clear();
      std::size_t start = 0;
      std::string s = val;
      for (;;) {
        auto comma = s.find(',', start);
        std::string tok = s.substr(start, comma == std::string::npos
                                              ? std::string::npos
                                              : comma - start);
        auto b = tok.find_first_not_of(" \t");
        auto e = tok.find_last_not_of(" \t");
        if (b != std::string::npos)
          cfg.schemes.push_back(init_kind_from_string(tok.substr(b, e - b + 1)));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    } else if (key == "trials") {
      cfg.trials = int(parse_long(val));
    } else if (key == "steps") {
      cfg.steps = parse_long(val);
    } else if (key == "checkpoints") {
      cfg.checkpoints = parse_long_list(val);
    } else if (key == "eta") {
      if (val == "auto") {
        cfg.eta_auto = true;
      } else {
        cfg.eta_auto = false;
        cfg.eta_fixed = parse_double(val);
      }
    } else if (key == "master_seed") {
      cfg.master_seed = parse_u64(val);
    } else if (key == "data_dx") {
      cfg.data_dx = int(parse_long(val));
    } else if (key == "data_dy") {
      cfg.data_dy = int(parse_long(val));
    } else if (key == "data_n") {
      cfg.data_n = int(parse_long(val));
    } else if (key == "data_seed") {
      cfg.data_seed = parse_u64(val);
    } else if (key == "data_normalize") {
      cfg.data_normalize = parse_bool(val);
    } else if (key == "data_path") {
      cfg.data_path = val;
    } else if (key == "jobs") {
      cfg.jobs = int(parse_long(val));
    } else {
      throw std::invalid_argument(path + ": unknown config key '" + key + "'");
    }
  }
}

}  // namespace dln
