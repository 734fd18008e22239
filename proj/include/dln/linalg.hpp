#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace dln {

// Dense double-precision matrix, the only scalar carrier in the project.
// Eigen provides the arithmetic; every routine below adds the validation and
// accuracy contract the rest of the code relies on.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Checked product. Throws std::invalid_argument on inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

// Singular values, descending, length min(rows, cols).
std::vector<double> singular_values(const Matrix& a);

// Largest / smallest singular value (smallest over min(rows, cols)).
double spectral_norm(const Matrix& a);
double min_singular_value(const Matrix& a);

// Eigenvalues of a (nearly) symmetric matrix, descending. The input is
// symmetrized as (A + A^T)/2 first to absorb accumulation error; non-square
// input throws std::invalid_argument.
std::vector<double> sym_eigvals(const Matrix& a);

// Kronecker product with the standard block layout. Throws if the result
// dimensions would overflow a reasonable allocation budget.
Matrix kron(const Matrix& a, const Matrix& b);

// Column-first vectorization.
Vector vec(const Matrix& a);

// Locale-independent formatting used by every serializer in the project.
// format_double(v) produces the %.17g form, which round-trips doubles.
std::string format_double(double v, int precision = 17);
double parse_double(const std::string& s);

// Text serialization: first line "rows cols", then one whitespace-separated
// row per line at full precision. Reading validates shape, count and
// finiteness; failures throw std::runtime_error.
void write_matrix(const std::string& path, const Matrix& a);
Matrix read_matrix(const std::string& path);

}  // namespace dln
