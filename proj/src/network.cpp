#include "dln/network.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "dln/kvfile.hpp"
#include "dln/rng.hpp"

namespace dln {

namespace fs = std::filesystem;

double NetworkState::alpha() const { return std::exp(log_alpha); }

double NetworkState::log_gamma() const {
  double acc = log_alpha;
  for (double c : log_layer_scale) acc += c;
  return acc;
}

void NetworkState::validate() const {
  const int L = plan.depth();
  if (static_cast<int>(weights.size()) != L)
    throw std::invalid_argument("NetworkState: weight count != depth");
  if (static_cast<int>(log_layer_scale.size()) != L)
    throw std::invalid_argument("NetworkState: scale count != depth");
  for (int i = 0; i < L; ++i) {
    if (weights[i].rows() != plan.dims[i + 1] ||
        weights[i].cols() != plan.dims[i])
      throw std::invalid_argument("NetworkState: W_" + std::to_string(i + 1) +
                                  " shape breaks the chain");
  }
  if (!std::isfinite(log_alpha))
    throw std::invalid_argument("NetworkState: non-finite log_alpha");
}

NetworkState init_weights(const DimensionPlan& plan, const InitScheme& scheme,
                          std::uint64_t seed) {
  plan.validate();
  const int L = plan.depth();
  if (!scheme.sigma.empty() &&
      static_cast<int>(scheme.sigma.size()) != L)
    throw std::invalid_argument("init_weights: sigma list length != depth");
  for (double s : scheme.sigma)
    if (!(s > 0.0)) throw std::invalid_argument("init_weights: sigma must be > 0");

  NetworkState net;
  net.plan = plan;
  net.scheme = scheme;
  net.seed = seed;
  net.weights.reserve(L);
  net.log_layer_scale.reserve(L);

  if (scheme.kind == InitKind::orthogonal) {
    if (!plan.hidden_uniform())
      throw std::invalid_argument(
          "init_weights: orthogonal scheme needs uniform hidden width");
    const int m = plan.hidden_width();
    if (m < std::max(plan.d_in(), plan.d_out()))
      throw std::invalid_argument(
          "init_weights: orthogonal scheme needs m >= max(d_x, d_y)");
    const double root_m = std::sqrt(double(m));
    for (int i = 1; i <= L; ++i) {
      SplitMix64 gen(mix_seed(seed, i));
      Matrix q = sample_haar_orthogonal(m, gen);
      if (L == 1) {
        net.weights.push_back(root_m *
                              q.topLeftCorner(plan.d_out(), plan.d_in()));
      } else if (i == 1) {
        net.weights.push_back(root_m * q.leftCols(plan.d_in()));
      } else if (i == L) {
        net.weights.push_back(root_m * q.topRows(plan.d_out()));
      } else {
        net.weights.push_back(root_m * q);
      }
      net.log_layer_scale.push_back(0.5 * std::log(double(m)));
    }
  } else {
    for (int i = 1; i <= L; ++i) {
      SplitMix64 gen(mix_seed(seed, i));
      const double sig = scheme.sigma_for(i);
      Matrix w = sig * gaussian_matrix(plan.dims[i], plan.dims[i - 1], gen);
      net.weights.push_back(std::move(w));
      net.log_layer_scale.push_back(0.5 * std::log(double(plan.dims[i])) +
                                    std::log(sig));
    }
  }
  net.log_alpha = output_log_scale(plan, scheme);
  net.validate();
  return net;
}

ProductCache build_cache(const NetworkState& net, const Matrix& X) {
  if (X.rows() != net.plan.d_in())
    throw std::invalid_argument("build_cache: X row count != input width");
  const int L = net.depth();
  ProductCache cache;
  cache.prefix.resize(L + 1);
  cache.suffix.resize(L + 2);
  cache.prefix[0] = X;
  for (int i = 1; i <= L; ++i) {
    const double inv_c = std::exp(-net.log_layer_scale[i - 1]);
    cache.prefix[i].noalias() = net.weights[i - 1] * cache.prefix[i - 1];
    cache.prefix[i] *= inv_c;
  }
  cache.suffix[L + 1] = Matrix::Identity(net.plan.d_out(), net.plan.d_out());
  for (int i = L; i >= 1; --i) {
    const double inv_c = std::exp(-net.log_layer_scale[i - 1]);
    cache.suffix[i].noalias() = cache.suffix[i + 1] * net.weights[i - 1];
    cache.suffix[i] *= inv_c;
  }
  return cache;
}

Matrix forward_output(const NetworkState& net, const Matrix& X) {
  if (X.rows() != net.plan.d_in())
    throw std::invalid_argument("forward_output: X row count != input width");
  Matrix p = X;
  for (int i = 1; i <= net.depth(); ++i) {
    const double inv_c = std::exp(-net.log_layer_scale[i - 1]);
    p = net.weights[i - 1] * p;
    p *= inv_c;
  }
  return std::exp(net.log_gamma()) * p;
}

double loss(const NetworkState& net, const Dataset& ds) {
  Matrix u = forward_output(net, ds.X);
  return 0.5 * (u - ds.Y).squaredNorm();
}

Matrix partial_product(const NetworkState& net, int i, int j) {
  const int L = net.depth();
  if (i < 1 || j > L || j < i - 1)
    throw std::invalid_argument("partial_product: bad range (" +
                                std::to_string(i) + "," + std::to_string(j) +
                                ")");
  Matrix out = Matrix::Identity(net.plan.dims[i - 1], net.plan.dims[i - 1]);
  for (int k = i; k <= j; ++k) out = net.weights[k - 1] * out;
  return out;
}

std::pair<double, double> log_sigma_extremes(const NetworkState& net, int i,
                                             int j) {
  const int L = net.depth();
  if (i < 1 || j > L || j < i)
    throw std::invalid_argument("log_sigma_extremes: bad range");
  // Raw-weight chain with per-step Frobenius renormalization: the true
  // product is (prod of the renormalizers) * M, so its log-singular-values
  // are finite-computable at any depth.
  double log_scale = 0.0;
  Matrix m = Matrix::Identity(net.plan.dims[i - 1], net.plan.dims[i - 1]);
  for (int k = i; k <= j; ++k) {
    m = net.weights[k - 1] * m;
    const double f = m.norm();
    if (f <= 0.0) {
      constexpr double kNegInf = -std::numeric_limits<double>::infinity();
      return {kNegInf, kNegInf};
    }
    m /= f;
    log_scale += std::log(f);
  }
  auto sv = singular_values(m);
  double lo = sv.back() > 0.0
                  ? std::log(sv.back())
                  : -std::numeric_limits<double>::infinity();
  return {log_scale + std::log(sv.front()), log_scale + lo};
}

std::vector<Matrix> gradients(const NetworkState& net, const Dataset& ds) {
  ProductCache cache = build_cache(net, ds.X);
  Matrix u = std::exp(net.log_gamma()) * cache.prefix[net.depth()];
  return gradients(net, ds, cache, u);
}

std::vector<Matrix> gradients(const NetworkState& net, const Dataset& ds,
                              const ProductCache& cache, const Matrix& U) {
  const int L = net.depth();
  Matrix resid = U - ds.Y;
  std::vector<Matrix> grads(L);
  const double log_gamma = net.log_gamma();
  for (int i = 1; i <= L; ++i) {
    // G_i = alpha W_{L:i+1}^T (U - Y) (W_{i-1:1} X)^T; on the scaled chain the
    // prefactor collapses to exp(log_gamma - log c_i).
    const double scale = std::exp(log_gamma - net.log_layer_scale[i - 1]);
    Matrix left = cache.suffix[i + 1].transpose() * resid;  // d_i x n
    grads[i - 1].noalias() = left * cache.prefix[i - 1].transpose();
    grads[i - 1] *= scale;
  }
  return grads;
}

std::pair<Matrix, double> least_squares_opt(const Dataset& ds) {
  Eigen::BDCSVD<Matrix> svd(ds.X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0)
    throw std::invalid_argument("least_squares_opt: zero X");
  Vector s_pinv(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k)
    s_pinv(k) = s(k) > kRankTol * s(0) ? 1.0 / s(k) : 0.0;
  // Wopt = Y X^+ = Y V S^+ U^T (min-norm solution).
  Matrix wopt = ds.Y * svd.matrixV() * s_pinv.asDiagonal() *
                svd.matrixU().transpose();
  double l = 0.5 * (wopt * ds.X - ds.Y).squaredNorm();
  return {std::move(wopt), l};
}

void save_checkpoint(const std::string& dir, const NetworkState& net) {
  fs::create_directories(dir);
  for (int i = 1; i <= net.depth(); ++i)
    write_matrix(dir + "/W_" + std::to_string(i) + ".mat", net.weights[i - 1]);
  std::ofstream meta(dir + "/meta", std::ios::binary);
  if (!meta) throw std::runtime_error("save_checkpoint: cannot write meta");
  meta << "dims=";
  for (std::size_t i = 0; i < net.plan.dims.size(); ++i)
    meta << (i ? "," : "") << net.plan.dims[i];
  meta << "\nscheme=" << to_string(net.scheme.kind) << '\n';
  if (!net.scheme.sigma.empty()) {
    meta << "sigma=";
    for (std::size_t i = 0; i < net.scheme.sigma.size(); ++i)
      meta << (i ? "," : "") << format_double(net.scheme.sigma[i]);
    meta << '\n';
  }
  meta << "log_alpha=" << format_double(net.log_alpha) << '\n';
  meta << "alpha=" << format_double(net.alpha()) << '\n';
  meta << "seed=" << net.seed << '\n';
  meta << "step=" << net.step << '\n';
}

NetworkState load_checkpoint(const std::string& dir) {
  auto kv = read_kv_file(dir + "/meta");
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end())
      throw std::runtime_error("load_checkpoint: meta lacks '" +
                               std::string(key) + "'");
    return it->second;
  };
  NetworkState net;
  net.plan.dims = parse_int_list(need("dims"));
  net.plan.validate();
  net.scheme.kind = init_kind_from_string(need("scheme"));
  if (auto it = kv.find("sigma"); it != kv.end())
    net.scheme.sigma = parse_double_list(it->second);
  if (auto it = kv.find("seed"); it != kv.end()) net.seed = parse_u64(it->second);
  if (auto it = kv.find("step"); it != kv.end()) net.step = parse_long(it->second);
  net.log_alpha = kv.count("log_alpha") ? parse_double(need("log_alpha"))
                                        : std::log(parse_double(need("alpha")));
  const int L = net.plan.depth();
  for (int i = 1; i <= L; ++i)
    net.weights.push_back(read_matrix(dir + "/W_" + std::to_string(i) + ".mat"));
  for (int i = 1; i <= L; ++i) {
    if (net.scheme.kind == InitKind::orthogonal) {
      net.log_layer_scale.push_back(0.5 *
                                    std::log(double(net.plan.hidden_width())));
    } else {
      net.log_layer_scale.push_back(0.5 * std::log(double(net.plan.dims[i])) +
                                    std::log(net.scheme.sigma_for(i)));
    }
  }
  net.validate();
  return net;
}

}  // namespace dln
