#pragma once

#include "merge/matrix.hpp"

namespace merge {

/// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
/// C += A^T * B
void matmul_at_b_acc(const Matrix& a, const Matrix& b, Matrix& c);
/// C = A * B^T
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

/// Column means of an n x p matrix.
std::vector<double> column_means(const Matrix& x);

} // namespace merge
