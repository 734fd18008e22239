#include "dln/linalg.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dln {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// SVD backend choice: Jacobi is the most accurate and is cheap for the small
// matrices that dominate the theory checks; BDC wins on the larger stacks.
template <typename Solver>
std::vector<double> sv_with(const Matrix& a) {
  Solver svd(a);
  const auto& s = svd.singularValues();
  return std::vector<double>(s.data(), s.data() + s.size());
}

std::vector<double> sv_impl(const Matrix& a) {
  if (std::min(a.rows(), a.cols()) <= 32)
    return sv_with<Eigen::JacobiSVD<Matrix>>(a);
  return sv_with<Eigen::BDCSVD<Matrix>>(a);
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions disagree (" +
                                    std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
  return a * b;
}

std::vector<double> singular_values(const Matrix& a) {
  return sv_impl(a);  // Eigen returns them sorted descending already
}

double spectral_norm(const Matrix& a) {
  auto s = sv_impl(a);
  return s.empty() ? 0.0 : s.front();
}

double min_singular_value(const Matrix& a) {
  auto s = sv_impl(a);
  return s.empty() ? 0.0 : s.back();
}

std::vector<double> sym_eigvals(const Matrix& a) {
  require(a.rows() == a.cols(), "sym_eigvals: matrix is not square");
  Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("sym_eigvals: eigensolver failed to converge");
  const auto& ev = es.eigenvalues();  // ascending
  std::vector<double> out(ev.data(), ev.data() + ev.size());
  std::reverse(out.begin(), out.end());
  return out;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  // Guard the allocation before multiplying the sizes out.
  const double cells = static_cast<double>(a.rows()) * a.cols() *
                       static_cast<double>(b.rows()) * b.cols();
  require(cells <= 5e8, "kron: result would exceed the allocation budget");
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector vec(const Matrix& a) {
  // Column-first stacking; MatrixXd is column-major so this is a straight copy.
  return Eigen::Map<const Vector>(a.data(), a.size());
}

std::string format_double(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

double parse_double(const std::string& s) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty() || errno == ERANGE)
    throw std::invalid_argument("parse_double: bad numeric field '" + s + "'");
  return v;
}

void write_matrix(const std::string& path, const Matrix& a) {
  std::ofstream f(path, std::ios::binary);  // binary: LF endings everywhere
  if (!f) throw std::runtime_error("write_matrix: cannot open " + path);
  f << a.rows() << ' ' << a.cols() << '\n';
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j) f << ' ';
      f << format_double(a(i, j));
    }
    f << '\n';
  }
  if (!f) throw std::runtime_error("write_matrix: short write to " + path);
}

Matrix read_matrix(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_matrix: cannot open " + path);
  long rows = 0, cols = 0;
  if (!(f >> rows >> cols) || rows < 1 || cols < 1)
    throw std::runtime_error("read_matrix: bad header in " + path);
  Matrix out(rows, cols);
  std::string tok;
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) {
      if (!(f >> tok))
        throw std::runtime_error("read_matrix: truncated data in " + path);
      out(i, j) = parse_double(tok);
    }
  if (f >> tok)
    throw std::runtime_error("read_matrix: trailing data in " + path);
  if (!out.allFinite())
    throw std::runtime_error("read_matrix: non-finite entries in " + path);
  return out;
}

}  // namespace dln
