#include "dln/init.hpp"

#include <cmath>
#include <stdexcept>

namespace dln {

std::string to_string(InitKind k) {
  return k == InitKind::orthogonal ? "orthogonal" : "gaussian";
}

InitKind init_kind_from_string(const std::string& s) {
  if (s == "orthogonal") return InitKind::orthogonal;
  if (s == "gaussian") return InitKind::gaussian;
  throw std::invalid_argument("unknown init scheme '" + s + "'");
}

double InitScheme::sigma_for(int layer) const {
  if (sigma.empty()) return 1.0;
  if (layer < 1 || layer > static_cast<int>(sigma.size()))
    throw std::invalid_argument("sigma_for: layer out of range");
  return sigma[layer - 1];
}

DimensionPlan DimensionPlan::uniform(int L, int d_x, int d_y, int m) {
  if (L < 1) throw std::invalid_argument("DimensionPlan: depth must be >= 1");
  DimensionPlan p;
  p.dims.resize(L + 1);
  p.dims.front() = d_x;
  for (int i = 1; i < L; ++i) p.dims[i] = m;
  p.dims.back() = d_y;
  p.validate();
  return p;
}

void DimensionPlan::validate() const {
  if (dims.size() < 2)
    throw std::invalid_argument("DimensionPlan: needs at least d_0 and d_1");
  for (int d : dims)
    if (d < 1) throw std::invalid_argument("DimensionPlan: widths must be >= 1");
}

bool DimensionPlan::hidden_uniform() const {
  for (std::size_t i = 2; i + 1 < dims.size(); ++i)
    if (dims[i] != dims[1]) return false;
  return true;
}

int DimensionPlan::hidden_width() const {
  if (depth() == 1) return std::max(d_in(), d_out());
  if (!hidden_uniform())
    throw std::invalid_argument("hidden_width: hidden dims are not uniform");
  return dims[1];
}

Matrix gaussian_matrix(int rows, int cols, SplitMix64& gen) {
  Matrix out(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) out(i, j) = gen.normal();
  return out;
}

Matrix sample_haar_orthogonal(int m, SplitMix64& gen) {
  if (m < 1) throw std::invalid_argument("sample_haar_orthogonal: m >= 1");
  Matrix g = gaussian_matrix(m, m, gen);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Fold sign(diag(R)) into Q's columns; without this the Householder
  // convention (nonzero diag pattern) skews the distribution off Haar.
  for (int j = 0; j < m; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

double output_log_scale(const DimensionPlan& plan, const InitScheme& scheme) {
  const int L = plan.depth();
  const int d_y = plan.d_out();
  if (scheme.kind == InitKind::orthogonal) {
    const int m = plan.hidden_width();
    return -0.5 * ((L - 1) * std::log(double(m)) + std::log(double(d_y)));
  }
  // gaussian: alpha^2 * d_y sigma_L^2 * prod_{i<L} d_i sigma_i^2 = 1
  double acc = std::log(double(d_y)) + 2.0 * std::log(scheme.sigma_for(L));
  for (int i = 1; i < L; ++i)
    acc += std::log(double(plan.dims[i])) + 2.0 * std::log(scheme.sigma_for(i));
  return -0.5 * acc;
}

double output_scale(const DimensionPlan& plan, const InitScheme& scheme) {
  return std::exp(output_log_scale(plan, scheme));
}

bool gaussian_scale_sane(const DimensionPlan& plan, const InitScheme& scheme,
                         double c_exponent) {
  const int L = plan.depth();
  const double lo = std::pow(double(L), -c_exponent);
  const double hi = std::pow(double(L), c_exponent);
  for (int i = 1; i <= L; ++i) {
    double s = scheme.sigma_for(i);
    double v = double(plan.dims[i]) * s * s;
    if (v < lo || v > hi) return false;
  }
  return true;
}

}  // namespace dln
